/**
 * Page 3: the full tally, a per-member list with links back to the
 * selection page for anything still unsure, and the Save button. Saving is
 * always allowed (an untouched session writes a file of zeros); the written
 * path is shown on success and the server's error verbatim on failure.
 */

import { ApiClient, ApiError } from "../api.js";
import { UiSession } from "../session.js";

const LABEL_NAMES = ["unlabeled", "acceptable", "unacceptable"] as const;

export async function renderReview(root: HTMLElement, _api: ApiClient,
                                   session: UiSession): Promise<void> {
  await session.reload();
  const tally = session.tally();

  const summary = document.createElement("p");
  summary.textContent = `${tally["1"]} acceptable / ${tally["2"]} `
    + `unacceptable / ${tally["0"]} unlabeled`;

  const table = document.createElement("table");
  table.className = "review";
  table.innerHTML = "<tr><th>run</th><th>label</th><th></th></tr>";
  session.labels().forEach((label, i) => {
    const row = document.createElement("tr");
    row.innerHTML =
      `<td>${i}</td>` +
      `<td><span class="badge l${label}">${LABEL_NAMES[label]}</span></td>`;
    const linkCell = document.createElement("td");
    const link = document.createElement("a");
    link.href = `#/select/${i}`;
    link.textContent = "revisit";
    linkCell.appendChild(link);
    row.appendChild(linkCell);
    table.appendChild(row);
  });

  const saveBtn = document.createElement("button");
  saveBtn.textContent = "Save classification";
  const result = document.createElement("div");
  result.className = "save-result";
  saveBtn.onclick = async () => {
    try {
      const path = await session.save();
      result.className = "save-result";
      result.textContent = `saved to ${path}`;
    } catch (err) {
      result.className = "save-result error";
      result.textContent =
        err instanceof ApiError ? err.detail : String(err);
    }
  };

  root.replaceChildren(summary, saveBtn, result, table);
}
