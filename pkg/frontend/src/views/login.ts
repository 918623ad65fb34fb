/** Login / signup page. */
import { ApiClient, ApiError } from "../api";
import { el } from "../dom";

export interface LoginContext {
  api: ApiClient;
  onLogin: (role: string) => void;
}

export function renderLoginPage(context: LoginContext): HTMLElement {
  const root = el("div", { class: "page login-page" });
  const username = el("input", { type: "text", placeholder: "username",
                                 "data-testid": "username" }) as HTMLInputElement;
  const password = el("input", { type: "password", placeholder: "password",
                                 "data-testid": "password" }) as HTMLInputElement;
  const status = el("p", { class: "status", "data-testid": "login-status" });

  const act = async (signupFirst: boolean) => {
    try {
      if (signupFirst) await context.api.signup(username.value, password.value);
      const session = await context.api.login(username.value, password.value);
      context.onLogin(session.role);
    } catch (error) {
      status.textContent = error instanceof ApiError ? error.message : "request failed";
    }
  };

  const loginButton = el("button", { "data-testid": "login-button" }, "Log in");
  loginButton.addEventListener("click", () => void act(false));
  const signupButton = el("button", { "data-testid": "signup-button" }, "Sign up");
  signupButton.addEventListener("click", () => void act(true));

  root.append(
    el("h2", {}, "commentator"),
    el("p", {}, "Annotate code-mixed text: language, POS, matrix language."),
    username, password, loginButton, signupButton, status,
  );
  return root;
}
