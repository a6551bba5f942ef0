/**
 * Page 1: every member as a thumbnail heatmap next to the observation, all
 * on one shared color scale, so the expert can see which runs look right
 * before working through them one by one.
 */

import { ApiClient } from "../api.js";
import { makeScale } from "../color.js";
import { drawField, gridDims } from "../render.js";
import { UiSession } from "../session.js";

export async function renderOverview(root: HTMLElement, api: ApiClient,
                                     session: UiSession): Promise<void> {
  const bounds = await session.ensureScaleBounds();
  const scale = makeScale(bounds.min, bounds.max);
  const observation = await api.observation();
  const dims = gridDims(session.gridShape, observation.values.length);

  const grid = document.createElement("div");
  grid.className = "grid";

  const obsCell = document.createElement("div");
  obsCell.className = "cell observation";
  const obsCanvas = document.createElement("canvas");
  drawField(obsCanvas, observation.values, dims, scale);
  obsCell.appendChild(obsCanvas);
  const obsCaption = document.createElement("span");
  obsCaption.className = "caption";
  obsCaption.textContent = "observation";
  obsCell.appendChild(obsCaption);
  grid.appendChild(obsCell);

  for (let i = 0; i < session.n; i++) {
    const member = await api.member(i);
    const cell = document.createElement("div");
    cell.className = "cell";
    const canvas = document.createElement("canvas");
    drawField(canvas, member.values, dims, scale);
    cell.appendChild(canvas);
    const caption = document.createElement("span");
    caption.className = "caption";
    const badge = `<span class="badge l${member.label}">${member.label}</span>`;
    caption.innerHTML = `run ${i} ${badge}`;
    cell.appendChild(caption);
    cell.onclick = () => {
      window.location.hash = `#/select/${i}`;
    };
    grid.appendChild(cell);
  }

  root.replaceChildren(grid);
}
