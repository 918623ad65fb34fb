/** History page: previously annotated sentences, newest first, with
 * timestamps.  Clicking a row opens the annotation page pre-filled with
 * the stored latest tags for editing. */
import { ApiClient, HistoryEntry } from "../api";
import { el } from "../dom";

export interface HistoryContext {
  api: ApiClient;
  task: string;
  onEdit: (entry: HistoryEntry) => void;
}

export function renderHistoryPage(
  context: HistoryContext,
  entries: HistoryEntry[],
): HTMLElement {
  const root = el("div", { class: "page history-page" });
  root.append(el("h2", {}, `${context.task.toUpperCase()} history`));
  if (entries.length === 0) {
    root.append(el("p", { class: "empty" }, "Nothing annotated yet."));
    return root;
  }
  const list = el("ul", { class: "history-list", "data-testid": "history-list" });
  for (const entry of entries) {
    const label = entry.tags ? entry.tags.join(" ") : entry.matrix_language ?? "";
    const row = el(
      "li",
      { class: "history-row", "data-testid": `history-row-${entry.sentence_id}` },
      el("span", { class: "stamp" }, entry.timestamp),
      el("span", { class: "text" }, entry.text),
      el("span", { class: "tags" }, label),
      el("span", { class: "version" }, `v${entry.version}`),
    );
    row.addEventListener("click", () => context.onEdit(entry));
    list.append(row);
  }
  root.append(list);
  return root;
}
