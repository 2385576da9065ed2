// Client-side transform of the server's layout XML into HTML spans, 1:1:
// m:row -> span.row, m:o -> span.op, m:i -> span.ident, m:n -> span.num,
// m:fenced -> span.fenced (with literal parens), href -> a.sym-link whose
// hash route points at the declaring page.

const LAYOUT_NS = "urn:mathwiki:layout";

export function pageHash(name: string): string {
  return `#/page/${name}`;
}

export function layoutToHtml(layoutXml: string, doc: Document): HTMLElement {
  const parser = new (doc.defaultView as Window & typeof globalThis).DOMParser();
  const wrapped = `<wrap xmlns:m="${LAYOUT_NS}">${layoutXml}</wrap>`;
  const tree = parser.parseFromString(wrapped, "text/xml");
  if (tree.getElementsByTagName("parsererror").length > 0) {
    const failed = doc.createElement("span");
    failed.className = "layout-error";
    failed.textContent = "unrenderable layout";
    return failed;
  }
  const root = tree.documentElement.firstElementChild;
  const host = doc.createElement("span");
  host.className = "formula";
  if (root !== null) {
    host.appendChild(convert(root, doc));
  }
  return host;
}

function convert(elem: Element, doc: Document): Node {
  const inner = build(elem, doc);
  const href = elem.getAttribute("href");
  if (href === null) {
    return inner;
  }
  const link = doc.createElement("a");
  link.className = "sym-link";
  link.setAttribute("href", pageHash(href));
  link.appendChild(inner);
  return link;
}

function build(elem: Element, doc: Document): HTMLElement {
  const local = elem.localName;
  const span = doc.createElement("span");
  switch (local) {
    case "row":
      span.className = "row";
      for (const child of Array.from(elem.children)) {
        span.appendChild(convert(child, doc));
      }
      return span;
    case "fenced": {
      span.className = "fenced";
      span.appendChild(doc.createTextNode("("));
      const child = elem.firstElementChild;
      if (child !== null) {
        span.appendChild(convert(child, doc));
      }
      span.appendChild(doc.createTextNode(")"));
      return span;
    }
    case "o":
      span.className = "op";
      span.textContent = elem.textContent ?? "";
      return span;
    case "i": {
      const text = elem.textContent ?? "";
      // qualified `theory?name` displays are notation fallbacks; plain
      // identifiers can never contain "?"
      span.className = text.includes("?") ? "ident fallback" : "ident";
      span.textContent = text;
      return span;
    }
    case "n":
      span.className = "num";
      span.textContent = elem.textContent ?? "";
      return span;
    default:
      span.className = "unknown";
      span.textContent = elem.textContent ?? "";
      return span;
  }
}
