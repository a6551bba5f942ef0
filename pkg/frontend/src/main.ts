/**
 * Hash-routed entry point. The session connects once at startup; an
 * unreachable API is a blocking condition, not a degraded mode.
 */

import { HttpApi } from "./api.js";
import { renderOverview } from "./pages/overview.js";
import { renderReview } from "./pages/review.js";
import { renderSelection } from "./pages/selection.js";
import { UiSession } from "./session.js";

const api = new HttpApi();
let session: UiSession | null = null;
let teardown: (() => void) | null = null;

function appRoot(): HTMLElement {
  return document.getElementById("app") as HTMLElement;
}

function blockingBanner(message: string): void {
  const banner = document.createElement("div");
  banner.className = "banner";
  const text = document.createElement("p");
  text.textContent = `Cannot reach the classification service: ${message}`;
  const retry = document.createElement("button");
  retry.textContent = "Retry";
  retry.onclick = () => void start();
  banner.append(text, retry);
  appRoot().replaceChildren(banner);
}

function tabs(active: string): HTMLElement {
  const nav = document.createElement("nav");
  nav.className = "tabs";
  for (const [hash, name] of [["#/", "Overview"], ["#/select", "Selection"],
                              ["#/review", "Review"]]) {
    const link = document.createElement("a");
    link.href = hash;
    link.textContent = name;
    if (name.toLowerCase() === active) link.className = "active";
    nav.appendChild(link);
  }
  return nav;
}

async function route(): Promise<void> {
  if (!session) return;
  if (teardown) {
    teardown();
    teardown = null;
  }
  const hash = window.location.hash || "#/";
  const page = document.createElement("div");
  try {
    if (hash.startsWith("#/select")) {
      const part = hash.split("/")[2];
      if (part !== undefined) {
        const jumped = session.jump(Number(part));
        if (!jumped.ok) session.jump(0);
      }
      appRoot().replaceChildren(tabs("selection"), page);
      teardown = await renderSelection(page, api, session);
    } else if (hash.startsWith("#/review")) {
      appRoot().replaceChildren(tabs("review"), page);
      await renderReview(page, api, session);
    } else {
      appRoot().replaceChildren(tabs("overview"), page);
      await renderOverview(page, api, session);
    }
  } catch (err) {
    blockingBanner(err instanceof Error ? err.message : String(err));
  }
}

async function start(): Promise<void> {
  try {
    session = await UiSession.connect(api, { wrapAtEnd: false });
  } catch (err) {
    blockingBanner(err instanceof Error ? err.message : String(err));
    return;
  }
  await route();
}

window.addEventListener("hashchange", () => void route());
void start();
