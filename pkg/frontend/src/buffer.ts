/** Working tag buffer for one assignment.
 *
 * The buffer starts as an exact copy of the server suggestion and must
 * validate against the task tagset before submission is enabled.  Tag
 * cycling follows tagset order (hi -> en -> un -> hi for LID), which is
 * the same order the server's tagset endpoint reports.
 */

export interface TokenTaskBuffer {
  kind: "tokens";
  task: string;
  sentenceId: number;
  tokens: string[];
  tags: string[];
  tagset: string[];
  feedback: string;
}

export interface MatrixTaskBuffer {
  kind: "matrix";
  task: string;
  sentenceId: number;
  tokens: string[];
  matrixLanguage: string | null;
  tagset: string[];
  feedback: string;
}

export type Buffer = TokenTaskBuffer | MatrixTaskBuffer;

export function cycleTag(current: string, tagset: string[]): string {
  const index = tagset.indexOf(current);
  if (index < 0) throw new Error(`tag ${current} is not in the tagset`);
  return tagset[(index + 1) % tagset.length];
}

export function initTokenBuffer(
  task: string,
  sentenceId: number,
  tokens: string[],
  tagset: string[],
  suggestion: string[] | null | undefined,
): TokenTaskBuffer {
  const tags =
    suggestion && suggestion.length === tokens.length
      ? [...suggestion]
      : tokens.map(() => tagset[0]);
  return { kind: "tokens", task, sentenceId, tokens, tags, tagset, feedback: "" };
}

export function initMatrixBuffer(
  task: string,
  sentenceId: number,
  tokens: string[],
  tagset: string[],
  selected: string | null = null,
): MatrixTaskBuffer {
  return {
    kind: "matrix",
    task,
    sentenceId,
    tokens,
    matrixLanguage: selected,
    tagset,
    feedback: "",
  };
}

/** Local violations; submission stays disabled while any exist. */
export function validateBuffer(buffer: Buffer): string[] {
  const violations: string[] = [];
  if (buffer.kind === "tokens") {
    if (buffer.tags.length !== buffer.tokens.length) {
      violations.push(
        `length mismatch: ${buffer.tags.length} tags for ${buffer.tokens.length} tokens`,
      );
    }
    for (const tag of buffer.tags) {
      if (!buffer.tagset.includes(tag)) violations.push(`unknown tag: ${tag}`);
    }
  } else if (buffer.matrixLanguage === null) {
    violations.push("select a matrix language");
  } else if (!buffer.tagset.includes(buffer.matrixLanguage)) {
    violations.push(`unknown tag: ${buffer.matrixLanguage}`);
  }
  return violations;
}

export function payloadOf(buffer: Buffer): string[] | string {
  return buffer.kind === "tokens" ? buffer.tags : (buffer.matrixLanguage as string);
}

/** Tokens for an edit opened from history, where the server sends the
 * sentence text rather than the token list; tokenization is the same
 * whitespace split the server uses. */
export function tokensOf(text: string): string[] {
  return text.split(/\s+/u).filter((token) => token.length > 0);
}
