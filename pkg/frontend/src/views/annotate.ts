/** Annotation page for all three tasks.
 *
 * LID renders one color-coded button per token that cycles through the
 * tagset on click; POS renders one dropdown per token with every tag;
 * MLI renders a single selector over the configured language list.  The
 * instruction sidebar sits on the left, the feedback box below the
 * sentence.  The working buffer survives failed submissions.
 */
import { ApiClient, ApiError, Assignment } from "../api";
import {
  Buffer,
  cycleTag,
  initMatrixBuffer,
  initTokenBuffer,
  payloadOf,
  validateBuffer,
} from "../buffer";
import { clear, el, tagColorClass } from "../dom";

export const INSTRUCTIONS: Record<string, string[]> = {
  lid: [
    "Click a token's tag button until the desired language appears.",
    "hi = Hindi, en = English, un = unidentified (mentions, hashtags, numbers, typos).",
    "Tags are pre-filled by the recommender; correct the wrong ones.",
    "Use the feedback box to report broken or sensitive sentences.",
  ],
  pos: [
    "Pick the part-of-speech for every token from its dropdown.",
    "X marks foreign words, typos and abbreviations.",
    "Tags are pre-filled by the recommender; correct the wrong ones.",
    "Use the feedback box to report broken or sensitive sentences.",
  ],
  mli: [
    "Select the language that provides the sentence's syntactic frame.",
    "Pick `other` when neither listed language supplies the structure.",
    "Use the feedback box to report broken or sensitive sentences.",
  ],
};

export interface AnnotateContext {
  api: ApiClient;
  task: string;
  tagset: string[];
  /** Editing an item opened from history instead of annotating the queue. */
  edit?: { sentenceId: number; text: string; tags?: string[]; matrixLanguage?: string };
  onExit: () => void;
}

export interface AnnotateView {
  root: HTMLElement;
  buffer: Buffer | null;
}

export function renderAnnotatePage(context: AnnotateContext): AnnotateView {
  const view: AnnotateView = {
    root: el("div", { class: "page annotate-page" }),
    buffer: null,
  };
  const sidebar = el(
    "aside",
    { class: "sidebar", "data-testid": "instructions" },
    el("h3", {}, "Instructions"),
    el("ul", {}, ...(INSTRUCTIONS[context.task] ?? []).map((line) => el("li", {}, line))),
  );
  const workspace = el("section", { class: "workspace" });
  view.root.append(sidebar, workspace);

  const showMessage = (kind: string, text: string, retry?: () => void) => {
    const banner = el("div", { class: `banner banner-${kind}` }, text);
    if (retry) {
      const button = el("button", { class: "retry" }, "Retry");
      button.addEventListener("click", retry);
      banner.append(button);
    }
    workspace.prepend(banner);
  };

  const renderBuffer = (sentenceText: string) => {
    clear(workspace);
    const buffer = view.buffer as Buffer;
    workspace.append(
      el("h2", {}, context.edit ? `Edit ${context.task.toUpperCase()}` : context.task.toUpperCase()),
      el("p", { class: "sentence", "data-testid": "sentence-text" }, sentenceText),
    );

    const tokenRow = el("div", { class: "token-row", "data-testid": "token-row" });
    if (buffer.kind === "tokens" && context.task === "lid") {
      buffer.tokens.forEach((token, index) => {
        const button = el(
          "button",
          { class: `tag-button ${tagColorClass(buffer.tags[index], buffer.tagset)}`,
            "data-testid": `tag-button-${index}` },
          el("span", { class: "surface" }, token),
          el("span", { class: "tag" }, buffer.tags[index]),
        );
        button.addEventListener("click", () => {
          buffer.tags[index] = cycleTag(buffer.tags[index], buffer.tagset);
          renderBuffer(sentenceText);
        });
        tokenRow.append(button);
      });
    } else if (buffer.kind === "tokens") {
      buffer.tokens.forEach((token, index) => {
        const select = el("select", { "data-testid": `tag-select-${index}` });
        for (const tag of buffer.tagset) {
          const option = el("option", { value: tag }, tag);
          if (tag === buffer.tags[index]) option.selected = true;
          select.append(option);
        }
        select.addEventListener("change", () => {
          buffer.tags[index] = select.value;
          updateControls();
        });
        tokenRow.append(
          el("label", { class: "token-cell" }, el("span", { class: "surface" }, token), select),
        );
      });
    } else {
      const select = el("select", { "data-testid": "matrix-select" });
      select.append(el("option", { value: "" }, "choose the matrix language"));
      for (const tag of buffer.tagset) {
        const option = el("option", { value: tag }, tag);
        if (tag === buffer.matrixLanguage) option.selected = true;
        select.append(option);
      }
      select.addEventListener("change", () => {
        buffer.matrixLanguage = select.value || null;
        updateControls();
      });
      tokenRow.append(select);
    }
    workspace.append(tokenRow);

    const feedbackBox = el("textarea", {
      class: "feedback",
      placeholder: "Enter Your Feedback Here",
      "data-testid": "feedback-box",
    }) as HTMLTextAreaElement;
    feedbackBox.value = buffer.feedback;
    feedbackBox.addEventListener("input", () => {
      buffer.feedback = feedbackBox.value;
    });

    const violationsBox = el("ul", { class: "violations", "data-testid": "violations" });
    const submitButton = el(
      "button",
      { class: "submit", "data-testid": "submit" },
      context.edit ? "Save changes" : "Submit and next",
    ) as HTMLButtonElement;

    const updateControls = () => {
      const violations = validateBuffer(buffer);
      submitButton.disabled = violations.length > 0;
      clear(violationsBox);
      for (const violation of violations) violationsBox.append(el("li", {}, violation));
    };
    submitButton.addEventListener("click", () => void submit(sentenceText));
    workspace.append(feedbackBox, violationsBox, submitButton);
    updateControls();
  };

  let inFlight = false;
  const submit = async (sentenceText: string) => {
    if (inFlight) return;
    inFlight = true;
    const buffer = view.buffer as Buffer;
    try {
      if (context.edit) {
        await context.api.edit(context.task, buffer.sentenceId, payloadOf(buffer),
                               buffer.feedback.trim() || undefined);
        context.onExit();
        return;
      }
      await context.api.submit(context.task, buffer.sentenceId, payloadOf(buffer),
                               buffer.feedback.trim() || undefined);
      await loadNext();
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        // Server-side violations: show them, keep the buffer untouched.
        renderBuffer(sentenceText);
        const box = workspace.querySelector('[data-testid="violations"]') as HTMLElement;
        for (const violation of error.violations) box.append(el("li", {}, violation));
        showMessage("error", error.message);
      } else {
        renderBuffer(sentenceText);
        showMessage("error", "Could not reach the server; your tags are kept.", () =>
          void submit(sentenceText),
        );
      }
    } finally {
      inFlight = false;
    }
  };

  const applyAssignment = (assignment: Assignment) => {
    if (assignment.done || !assignment.sentence) {
      clear(workspace).append(
        el("div", { class: "done", "data-testid": "done" },
           "All sentences annotated for this task."),
      );
      view.buffer = null;
      return;
    }
    const sentence = assignment.sentence;
    view.buffer =
      context.task === "mli"
        ? initMatrixBuffer(context.task, sentence.id, sentence.tokens, context.tagset)
        : initTokenBuffer(context.task, sentence.id, sentence.tokens, context.tagset,
                          assignment.suggestion?.tags ?? null);
    renderBuffer(sentence.text);
  };

  const loadNext = async () => {
    try {
      applyAssignment(await context.api.next(context.task));
    } catch {
      clear(workspace);
      showMessage("error", "Could not fetch the next sentence.", () => void loadNext());
    }
  };

  if (context.edit) {
    const tokens = context.edit.text.split(/\s+/u).filter((t) => t.length > 0);
    view.buffer =
      context.task === "mli"
        ? initMatrixBuffer(context.task, context.edit.sentenceId, tokens, context.tagset,
                           context.edit.matrixLanguage ?? null)
        : initTokenBuffer(context.task, context.edit.sentenceId, tokens, context.tagset,
                          context.edit.tags ?? null);
    renderBuffer(context.edit.text);
  } else {
    void loadNext();
  }
  return view;
}
