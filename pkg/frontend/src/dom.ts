/** Tiny DOM construction helpers; no framework needed at this size. */

type Child = Node | string;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function clear(node: HTMLElement): HTMLElement {
  node.replaceChildren();
  return node;
}

/** CSS class used to color-code a tag button or chip. */
export function tagColorClass(tag: string, tagset: string[]): string {
  const lower = tag.toLowerCase();
  if (["hi", "en", "un", "other"].includes(lower)) return `tag-${lower}`;
  return `tag-c${tagset.indexOf(tag) % 7}`;
}
