// Typed client for the wiki HTTP API. All state changes go through these
// endpoints; the UI never recomputes server results locally.

export type TripleRow = [string, string, string];

export interface PageInfo {
  name: string;
  kind: "theory" | "statement";
  head_revision: number;
}

export interface PageData {
  source: string;
  head_revision: number;
  kind: "theory" | "statement";
}

export interface ApiWarning {
  code: string;
  message: string;
  symbol?: string;
}

export interface SaveReceipt {
  new_revision: number;
  invalidated: string[];
  warnings: ApiWarning[];
}

export interface LinksBox {
  extracted: TripleRow[];
  inferred: TripleRow[];
}

export interface RevisionInfo {
  id: number;
  parent: number | null;
  author: string;
  timestamp: string;
  tombstone: boolean;
}

export interface Tasks {
  unproven: string[];
  undefined_symbols: string[];
  missing_notations: string[];
  dangling_refs: [string, string][];
}

export interface ErrorDetail {
  head_revision?: number | null;
  line?: number;
  column?: number;
  error_code?: string;
  [key: string]: unknown;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: ErrorDetail = {},
  ) {
    super(message);
  }
}

async function fail(response: Response): Promise<never> {
  let code = "HttpError";
  let message = `${response.status} ${response.statusText}`;
  let detail: ErrorDetail = {};
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      code = body.code ?? code;
      message = body.message ?? message;
      detail = body.detail ?? {};
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(response.status, code, message, detail);
}

export class WikiApi {
  constructor(readonly baseUrl: string = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) await fail(response);
    return (await response.json()) as T;
  }

  private async text(path: string, accept?: string): Promise<string> {
    const init = accept ? { headers: { Accept: accept } } : undefined;
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) await fail(response);
    return response.text();
  }

  listPages(): Promise<PageInfo[]> {
    return this.json("/pages");
  }

  getPage(name: string): Promise<PageData> {
    return this.json(`/pages/${name}`);
  }

  savePage(name: string, source: string, baseRevision?: number, author?: string): Promise<SaveReceipt> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (author) headers["X-Author"] = author;
    return this.json(`/pages/${name}`, {
      method: "PUT",
      headers,
      body: JSON.stringify({ source, base_revision: baseRevision ?? null }),
    });
  }

  renderedLayout(name: string): Promise<string> {
    return this.text(`/pages/${name}/rendered`, "text/xml");
  }

  links(name: string): Promise<LinksBox> {
    return this.json(`/pages/${name}/links`);
  }

  history(name: string): Promise<RevisionInfo[]> {
    return this.json(`/pages/${name}/history`);
  }

  tasks(): Promise<Tasks> {
    return this.json("/tasks");
  }

  importDocument(xml: string): Promise<{ pages: string[] }> {
    return this.json("/import", {
      method: "POST",
      headers: { "Content-Type": "application/xml" },
      body: xml,
    });
  }

  exportTheory(name: string, closure = false): Promise<string> {
    return this.text(`/export/${name}?closure=${closure}`);
  }

  query(patterns: TripleRow[], negations: TripleRow[] = []): Promise<Record<string, string>[]> {
    return this.json("/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ patterns, negations }),
    });
  }
}
