// Single-page app: browse pages, view rendered formulae with clickable
// symbol links, inspect the extracted/inferred links box, edit page source,
// save with optimistic concurrency, and surface what the save invalidated.

import { ApiError, LinksBox, SaveReceipt, Tasks, TripleRow, WikiApi } from "./api.js";
import { layoutToHtml, pageHash } from "./layout.js";

export interface ViewState {
  page: string | null;
  mode: "view" | "edit";
  draft: string;
  baseRevision: number | null;
  lastReceipt: SaveReceipt | null;
}

export class App {
  readonly state: ViewState = {
    page: null,
    mode: "view",
    draft: "",
    baseRevision: null,
    lastReceipt: null,
  };

  constructor(
    readonly api: WikiApi,
    readonly root: HTMLElement,
  ) {}

  private get doc(): Document {
    return this.root.ownerDocument;
  }

  // --- routing ------------------------------------------------------------

  async route(hash: string): Promise<void> {
    const path = hash.replace(/^#\/?/, "");
    if (path === "" || path === "pages") {
      await this.showIndex();
    } else if (path === "tasks") {
      await this.showTasks();
    } else if (path.startsWith("page/")) {
      const rest = path.slice("page/".length);
      if (rest.endsWith("/edit")) {
        await this.showEdit(rest.slice(0, -"/edit".length));
      } else {
        await this.showPage(rest);
      }
    } else {
      this.renderMessage(`unknown route: ${hash}`);
    }
  }

  // --- views ---------------------------------------------------------------

  async showIndex(): Promise<void> {
    const pages = await this.api.listPages();
    const section = this.freshView("index-view", "All pages");
    const list = this.el("ul", "page-list");
    for (const page of pages) {
      const item = this.el("li");
      item.appendChild(this.pageLink(page.name));
      item.appendChild(this.text(` (${page.kind}, rev ${page.head_revision})`));
      list.appendChild(item);
    }
    section.appendChild(list);
    const tasksLink = this.el("a", "tasks-link", "Where work needs to be done");
    tasksLink.setAttribute("href", "#/tasks");
    section.appendChild(tasksLink);
  }

  async showPage(name: string): Promise<void> {
    this.state.page = name;
    this.state.mode = "view";
    let data;
    try {
      data = await this.api.getPage(name);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.renderCreationPrompt(name);
        return;
      }
      throw error;
    }
    this.state.baseRevision = data.head_revision;

    const section = this.freshView("page-view", name);
    const meta = this.el("p", "page-meta", `${data.kind} page, revision ${data.head_revision}`);
    section.appendChild(meta);

    const formulaBox = this.el("div", "rendered-formula");
    formulaBox.appendChild(layoutToHtml(await this.api.renderedLayout(name), this.doc));
    section.appendChild(formulaBox);

    section.appendChild(this.informalBlock(data.source));
    section.appendChild(this.linksPanel(await this.api.links(name)));

    const editLink = this.el("a", "edit-link", "Edit");
    editLink.setAttribute("href", `${pageHash(name)}/edit`);
    section.appendChild(editLink);
  }

  async showEdit(name: string): Promise<void> {
    this.state.page = name;
    this.state.mode = "edit";
    let source = "";
    let base: number | null = null;
    try {
      const data = await this.api.getPage(name);
      source = data.source;
      base = data.head_revision;
    } catch (error) {
      if (!(error instanceof ApiError && error.status === 404)) throw error;
      // new page: empty draft, no base revision
    }
    this.state.draft = source;
    this.state.baseRevision = base;
    this.renderEditor(name);
  }

  async showTasks(): Promise<void> {
    const tasks = await this.api.tasks();
    const section = this.freshView("tasks-view", "Where work needs to be done");
    section.appendChild(this.taskList("unproven", "Unproven assertions", tasks.unproven));
    section.appendChild(this.taskList("undefined-symbols", "Undefined symbols", tasks.undefined_symbols));
    section.appendChild(this.taskList("missing-notations", "Symbols without notation", tasks.missing_notations));
    section.appendChild(this.taskList(
      "dangling-refs",
      "Dangling references",
      tasks.dangling_refs.map(([page, target]) => `${page} → ${target}`),
      tasks.dangling_refs.map(([page]) => page),
    ));
  }

  // --- saving ----------------------------------------------------------------

  async saveDraft(): Promise<void> {
    const name = this.state.page;
    if (name === null) return;
    const textarea = this.root.querySelector<HTMLTextAreaElement>("textarea.editor");
    if (textarea !== null) {
      this.state.draft = textarea.value; // byte-exact: no normalization
    }
    try {
      const receipt = await this.api.savePage(
        name,
        this.state.draft,
        this.state.baseRevision ?? undefined,
      );
      this.state.lastReceipt = receipt;
      this.state.baseRevision = receipt.new_revision;
      this.renderEditor(name);
      this.renderSaveNotice(receipt);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        await this.renderConflict(name, error);
      } else if (error instanceof ApiError && error.status === 422) {
        this.renderParseError(error);
      } else {
        throw error;
      }
    }
  }

  // --- view builders ------------------------------------------------------------

  private freshView(className: string, title: string): HTMLElement {
    this.root.textContent = "";
    const section = this.el("section", className);
    section.appendChild(this.el("h1", "title", title));
    this.root.appendChild(section);
    return section;
  }

  private renderMessage(message: string): void {
    this.freshView("message-view", message);
  }

  private renderCreationPrompt(name: string): void {
    const section = this.freshView("creation-prompt", `${name} does not exist yet`);
    const link = this.el("a", "create-link", "Create this page");
    link.setAttribute("href", `${pageHash(name)}/edit`);
    section.appendChild(link);
  }

  private renderEditor(name: string): void {
    const section = this.freshView("edit-view", `Editing ${name}`);
    const textarea = this.doc.createElement("textarea");
    textarea.className = "editor";
    textarea.value = this.state.draft;
    textarea.rows = 18;
    section.appendChild(textarea);

    const save = this.el("button", "save-button", "Save");
    save.addEventListener("click", () => {
      void this.saveDraft();
    });
    section.appendChild(save);

    const back = this.el("a", "back-link", "Back to page");
    back.setAttribute("href", pageHash(name));
    section.appendChild(back);

    section.appendChild(this.el("div", "save-status"));
  }

  private renderSaveNotice(receipt: SaveReceipt): void {
    const status = this.root.querySelector(".save-status");
    if (status === null) return;
    status.textContent = "";
    const notice = this.el("div", "save-notice");
    notice.appendChild(this.el(
      "p", "saved-line", `Saved as revision ${receipt.new_revision}.`,
    ));
    const invalidated = this.el("div", "invalidated-pages");
    if (receipt.invalidated.length === 0) {
      invalidated.appendChild(this.el("p", "none", "No other pages needed re-rendering."));
    } else {
      invalidated.appendChild(this.el(
        "p", "lead", `Pages re-rendered (${receipt.invalidated.length}):`,
      ));
      const list = this.el("ul", "invalidated-list");
      for (const page of receipt.invalidated) {
        const item = this.el("li");
        item.appendChild(this.pageLink(page));
        list.appendChild(item);
      }
      invalidated.appendChild(list);
    }
    notice.appendChild(invalidated);
    for (const warning of receipt.warnings) {
      notice.appendChild(this.el("p", "warning", `${warning.code}: ${warning.message}`));
    }
    status.appendChild(notice);
  }

  private async renderConflict(name: string, error: ApiError): Promise<void> {
    const status = this.root.querySelector(".save-status");
    if (status === null) return;
    status.textContent = "";
    const panel = this.el("div", "conflict-panel");
    panel.appendChild(this.el(
      "p", "conflict-line",
      `Save conflict: the page is at revision ${error.detail.head_revision}, ` +
      "your draft was based on an older revision.",
    ));
    const server = await this.api.getPage(name);
    const serverBox = this.doc.createElement("textarea");
    serverBox.className = "server-version";
    serverBox.readOnly = true;
    serverBox.value = server.source;
    const mineBox = this.doc.createElement("textarea");
    mineBox.className = "draft-version";
    mineBox.readOnly = true;
    mineBox.value = this.state.draft;
    panel.appendChild(this.el("p", "label", "Current server version:"));
    panel.appendChild(serverBox);
    panel.appendChild(this.el("p", "label", "Your draft:"));
    panel.appendChild(mineBox);

    const takeTheirs = this.el("button", "take-server", "Load server version into editor");
    takeTheirs.addEventListener("click", () => {
      this.state.draft = server.source;
      this.state.baseRevision = server.head_revision;
      this.renderEditor(name);
    });
    panel.appendChild(takeTheirs);
    status.appendChild(panel);
  }

  private renderParseError(error: ApiError): void {
    const status = this.root.querySelector(".save-status");
    if (status === null) return;
    status.textContent = "";
    const line = error.detail.line;
    const column = error.detail.column;
    const where = line !== undefined ? ` at line ${line}, column ${column}` : "";
    status.appendChild(this.el(
      "p", "parse-error", `${error.code}${where}: ${error.message}`,
    ));
    const textarea = this.root.querySelector<HTMLTextAreaElement>("textarea.editor");
    if (textarea !== null && line !== undefined) {
      // highlight the offending line by selecting it
      const lines = textarea.value.split("\n");
      const upto = lines.slice(0, line - 1);
      const start = upto.reduce((n, s) => n + s.length + 1, 0);
      const end = start + (lines[line - 1]?.length ?? 0);
      textarea.focus();
      textarea.setSelectionRange(start, end);
      textarea.dataset["errorLine"] = String(line);
    }
  }

  private informalBlock(source: string): HTMLElement {
    const block = this.el("div", "informal");
    const parser = new (this.doc.defaultView as Window & typeof globalThis).DOMParser();
    const tree = parser.parseFromString(source, "text/xml");
    if (tree.getElementsByTagName("parsererror").length > 0) {
      return block;
    }
    for (const cmp of Array.from(tree.getElementsByTagName("CMP"))) {
      const para = this.el("p", "informal-text");
      for (const node of Array.from(cmp.childNodes)) {
        if (node.nodeType === 3) {
          para.appendChild(this.text(node.textContent ?? ""));
        } else if (node.nodeType === 1 && (node as Element).localName === "link") {
          const target = (node as Element).getAttribute("to") ?? "";
          const anchor = this.el("a", "inline-link", node.textContent ?? target);
          anchor.setAttribute("href", pageHash(target));
          para.appendChild(anchor);
        }
      }
      block.appendChild(para);
    }
    for (const imports of Array.from(tree.getElementsByTagName("imports"))) {
      const target = imports.getAttribute("from") ?? "";
      const para = this.el("p", "imports-line", "imports ");
      para.appendChild(this.pageLink(target));
      block.appendChild(para);
    }
    return block;
  }

  private linksPanel(box: LinksBox): HTMLElement {
    const panel = this.el("aside", "links-panel");
    panel.appendChild(this.el("h2", "links-title", "RDF links"));
    panel.appendChild(this.tripleList("extracted", "Extracted", box.extracted));
    panel.appendChild(this.tripleList("inferred", "Inferred", box.inferred));
    return panel;
  }

  private tripleList(className: string, title: string, triples: TripleRow[]): HTMLElement {
    const div = this.el("div", `links-${className}`);
    div.appendChild(this.el("h3", "links-subtitle", title));
    const list = this.el("ul", "triple-list");
    for (const [s, p, o] of triples) {
      const item = this.el("li", "triple");
      item.appendChild(this.el("span", "subject", s));
      item.appendChild(this.text(" "));
      item.appendChild(this.el("span", "predicate", p));
      item.appendChild(this.text(" "));
      const objectLink = this.pageLink(o);
      objectLink.className = "object";
      item.appendChild(objectLink);
      list.appendChild(item);
    }
    div.appendChild(list);
    return div;
  }

  private taskList(className: string, title: string, labels: string[], targets?: string[]): HTMLElement {
    const div = this.el("div", `tasks-${className}`);
    div.appendChild(this.el("h3", "tasks-subtitle", `${title} (${labels.length})`));
    const list = this.el("ul", "task-list");
    labels.forEach((label, i) => {
      const item = this.el("li", "task");
      const target = targets ? targets[i] : label;
      const anchor = this.el("a", "task-link", label);
      anchor.setAttribute("href", pageHash(target ?? label));
      item.appendChild(anchor);
      list.appendChild(item);
    });
    div.appendChild(list);
    return div;
  }

  // --- small DOM helpers -----------------------------------------------------

  private el(tag: string, className?: string, text?: string): HTMLElement {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private text(value: string): Node {
    return this.doc.createTextNode(value);
  }

  private pageLink(name: string): HTMLElement {
    const anchor = this.el("a", "page-link", name);
    anchor.setAttribute("href", pageHash(name));
    return anchor;
  }
}
