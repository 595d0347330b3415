// Tiny DOM construction helpers; enough that the views stay readable without
// pulling in a framework.

type Child = Node | string;

type Attrs = Record<string, string | boolean | EventListener>;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.replace(/^on/, ""), value);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
      else node.removeAttribute(key);
      if (key === "disabled" && "disabled" in node) {
        (node as unknown as { disabled: boolean }).disabled = value;
      }
    } else if (key === "value" && "value" in node) {
      (node as unknown as { value: string }).value = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clearChildren(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function option(value: string, label?: string): HTMLOptionElement {
  return el("option", { value }, label ?? value);
}
