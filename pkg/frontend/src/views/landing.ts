/** Annotator landing page: the available tasks as clickable cards. */
import { TaskInfo } from "../api";
import { el } from "../dom";

const TASK_TITLES: Record<string, string> = {
  lid: "Token-level Language Identification",
  pos: "Token-level POS Tagging",
  mli: "Matrix Language Identification",
};

export interface LandingContext {
  tasks: TaskInfo[];
  isAdmin: boolean;
  onSelect: (task: string) => void;
  onHistory: (task: string) => void;
  onAdmin: () => void;
}

export function renderLandingPage(context: LandingContext): HTMLElement {
  const root = el("div", { class: "page landing-page" });
  root.append(el("h2", {}, "Pick a task"));
  const cards = el("div", { class: "task-cards" });
  for (const task of context.tasks) {
    const open = el("button", { class: "open", "data-testid": `open-${task.id}` },
                    "Annotate");
    open.addEventListener("click", () => context.onSelect(task.id));
    const history = el("button", { class: "history", "data-testid": `history-${task.id}` },
                       "History & edit");
    history.addEventListener("click", () => context.onHistory(task.id));
    cards.append(
      el("div", { class: "task-card" },
         el("h3", {}, TASK_TITLES[task.id] ?? task.id),
         el("p", { class: "tagset" }, task.tagset.join(" · ")),
         open, history),
    );
  }
  root.append(cards);
  if (context.isAdmin) {
    const adminButton = el("button", { class: "admin", "data-testid": "open-admin" },
                           "Admin dashboard");
    adminButton.addEventListener("click", context.onAdmin);
    root.append(adminButton);
  }
  return root;
}
