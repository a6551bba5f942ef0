/**
 * Page 2: observation and current member side by side with Accept, Reject,
 * Jump, Back and Next. Accept/Reject label and advance; relabeling any
 * member simply overwrites, so only final decisions survive. Keyboard: a
 * accept, r reject, arrows move.
 */

import { ApiClient } from "../api.js";
import { makeScale } from "../color.js";
import { drawField, gridDims } from "../render.js";
import { UiSession } from "../session.js";

export async function renderSelection(
  root: HTMLElement,
  api: ApiClient,
  session: UiSession,
): Promise<() => void> {
  const bounds = await session.ensureScaleBounds();
  const scale = makeScale(bounds.min, bounds.max);
  const observation = await api.observation();
  const dims = gridDims(session.gridShape, observation.values.length);

  const pair = document.createElement("div");
  pair.className = "pair";
  const obsFig = document.createElement("figure");
  obsFig.className = "observation";
  const obsCanvas = document.createElement("canvas");
  drawField(obsCanvas, observation.values, dims, scale);
  const obsCap = document.createElement("figcaption");
  obsCap.textContent = "observation";
  obsFig.append(obsCanvas, obsCap);

  const memFig = document.createElement("figure");
  const memCanvas = document.createElement("canvas");
  const memCap = document.createElement("figcaption");
  memFig.append(memCanvas, memCap);
  pair.append(obsFig, memFig);

  const controls = document.createElement("div");
  controls.className = "controls";
  const backBtn = button("Back");
  const acceptBtn = button("Accept", "accept");
  const rejectBtn = button("Reject", "reject");
  const nextBtn = button("Next");
  const jumpInput = document.createElement("input");
  jumpInput.className = "jump";
  jumpInput.placeholder = "index";
  const jumpBtn = button("Jump");
  controls.append(backBtn, acceptBtn, rejectBtn, nextBtn, jumpInput, jumpBtn);

  const inlineError = document.createElement("div");
  inlineError.className = "inline-error";
  const hint = document.createElement("div");
  hint.className = "hint";
  hint.textContent = "keys: a accept, r reject, arrows move";

  root.replaceChildren(pair, controls, inlineError, hint);

  async function showCurrent(): Promise<void> {
    const member = await api.member(session.index);
    drawField(memCanvas, member.values, dims, scale);
    const badge = `<span class="badge l${member.label}">${member.label}</span>`;
    memCap.innerHTML = `run ${session.index} of ${session.n - 1} ${badge}`;
    nextBtn.disabled = !session.canNext();
    backBtn.disabled = session.index === 0;
    inlineError.textContent = "";
  }

  async function act(fn: () => Promise<void> | void): Promise<void> {
    try {
      await fn();
      await showCurrent();
    } catch (err) {
      inlineError.textContent = String(err instanceof Error ? err.message : err);
    }
  }

  acceptBtn.onclick = () => act(() => session.accept());
  rejectBtn.onclick = () => act(() => session.reject());
  nextBtn.onclick = () => act(() => void session.advance());
  backBtn.onclick = () => act(() => void session.back());
  jumpBtn.onclick = () => {
    const result = session.jump(Number(jumpInput.value));
    if (result.ok) {
      void showCurrent();
    } else {
      inlineError.textContent = result.message;
    }
  };

  const onKey = (ev: KeyboardEvent) => {
    if (ev.target instanceof HTMLInputElement) return;
    if (ev.key === "a") acceptBtn.click();
    else if (ev.key === "r") rejectBtn.click();
    else if (ev.key === "ArrowRight" || ev.key === "n") nextBtn.click();
    else if (ev.key === "ArrowLeft" || ev.key === "b") backBtn.click();
  };
  document.addEventListener("keydown", onKey);

  await showCurrent();
  return () => document.removeEventListener("keydown", onKey);
}

function button(text: string, cls?: string): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = text;
  if (cls) b.className = cls;
  return b;
}
