/** Application shell: session handling and a small hash router.
 *
 * All data flows through the documented HTTP API; tagsets are fetched at
 * login time (never hardcoded) so a configured MLI language list shows up
 * everywhere automatically.
 */
import { ApiClient, HistoryEntry, TaskInfo } from "./api";
import { clear, el } from "./dom";
import { renderAdminPage } from "./views/admin";
import { renderAnnotatePage } from "./views/annotate";
import { renderHistoryPage } from "./views/history";
import { renderLandingPage } from "./views/landing";
import { renderLoginPage } from "./views/login";

interface AppState {
  api: ApiClient;
  role: string | null;
  tasks: TaskInfo[];
  editEntry: HistoryEntry | null;
}

export function startApp(mount: HTMLElement, api = new ApiClient()): void {
  const state: AppState = { api, role: null, tasks: [], editEntry: null };

  const stored = window.localStorage.getItem("commentator-session");
  if (stored) {
    const session = JSON.parse(stored);
    api.token = session.token;
    state.role = session.role;
  }

  const go = (hash: string) => {
    window.location.hash = hash;
    render();
  };

  const tagsetOf = (task: string) =>
    state.tasks.find((t) => t.id === task)?.tagset ?? [];

  const requireTasks = async () => {
    if (state.tasks.length === 0) state.tasks = await state.api.tasks();
  };

  const render = async () => {
    const hash = window.location.hash || "#/";
    clear(mount);

    if (!api.token) {
      mount.append(
        renderLoginPage({
          api,
          onLogin: (role) => {
            state.role = role;
            window.localStorage.setItem(
              "commentator-session",
              JSON.stringify({ token: api.token, role }),
            );
            go("#/");
          },
        }),
      );
      return;
    }

    try {
      await requireTasks();
    } catch {
      // Token expired or server unreachable: back to login.
      api.token = null;
      window.localStorage.removeItem("commentator-session");
      void render();
      return;
    }

    const bar = el("nav", { class: "topbar" });
    const home = el("button", {}, "Tasks");
    home.addEventListener("click", () => go("#/"));
    const logout = el("button", {}, "Log out");
    logout.addEventListener("click", () => {
      api.token = null;
      state.role = null;
      window.localStorage.removeItem("commentator-session");
      go("#/");
    });
    bar.append(el("strong", {}, "commentator"), home, logout);
    mount.append(bar);

    const [, route, task] = hash.split("/");
    if (route === "annotate" && task) {
      mount.append(
        renderAnnotatePage({
          api,
          task,
          tagset: tagsetOf(task),
          onExit: () => go(`#/history/${task}`),
        }).root,
      );
    } else if (route === "edit" && task && state.editEntry) {
      const entry = state.editEntry;
      mount.append(
        renderAnnotatePage({
          api,
          task,
          tagset: tagsetOf(task),
          edit: {
            sentenceId: entry.sentence_id,
            text: entry.text,
            tags: entry.tags,
            matrixLanguage: entry.matrix_language,
          },
          onExit: () => go(`#/history/${task}`),
        }).root,
      );
    } else if (route === "history" && task) {
      const entries = await api.history(task);
      mount.append(
        renderHistoryPage(
          {
            api,
            task,
            onEdit: (entry) => {
              state.editEntry = entry;
              go(`#/edit/${task}`);
            },
          },
          entries,
        ),
      );
    } else if (route === "admin") {
      if (state.role !== "admin") {
        go("#/");
        return;
      }
      mount.append(renderAdminPage({ api, tasks: state.tasks.map((t) => t.id) }));
    } else {
      mount.append(
        renderLandingPage({
          tasks: state.tasks,
          isAdmin: state.role === "admin",
          onSelect: (id) => go(`#/annotate/${id}`),
          onHistory: (id) => go(`#/history/${id}`),
          onAdmin: () => go("#/admin"),
        }),
      );
    }
  };

  window.addEventListener("hashchange", () => void render());
  void render();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp(document.getElementById("app") as HTMLElement);
}
