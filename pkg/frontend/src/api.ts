/** Typed client for the local verification service (JSON schema version 1).
 *
 * The service is the single authority for parsing, condition generation,
 * span computation, and hint rewriting; this client performs no parsing of
 * its own.
 */

/** Half-open byte range [start, end) into the UTF-8 encoded source. */
export type Span = [number, number];

export interface OriginRecord {
  kind: string;
  path: string;
  text: string;
}

export interface ResultRecord {
  result: "Proved" | "Unproved" | "Timeout" | "SolverError";
  time_ms: number;
  model?: Record<string, string>;
  detail?: string;
}

export interface VcRecord {
  id: string;
  formula: string;
  origin: OriginRecord;
  label: string;
  spans: Span[];
  solver: string;
  result: ResultRecord | null;
}

/** A parse or generation error scoped to one document. */
export interface DocError {
  span: Span | null;
  message: string;
}

export interface ExampleFile {
  name: string;
  source: string;
}

export type VerifyOutcome =
  | ({ id: string } & ResultRecord)
  | { id: string; error: string };

export interface ParseResponse {
  ok: boolean;
  errors: DocError[];
}

export interface VcsResponse {
  schema: number;
  vcs: VcRecord[];
  errors: DocError[];
}

export interface VerifyResponse {
  schema: number;
  results: VerifyOutcome[];
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly detail: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchFn = (input, init) => fetch(input, init);

export class Api {
  constructor(
    readonly base: string = "http://127.0.0.1:8899",
    private readonly fetchFn: FetchFn = defaultFetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.base + path, init);
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      const detail = payload && typeof payload === "object" ? (payload as { detail?: unknown }).detail : null;
      throw new ApiError(`${method} ${path} failed (${response.status})`, response.status, detail ?? null);
    }
    return payload as T;
  }

  parse(source: string): Promise<ParseResponse> {
    return this.request("POST", "/parse", { source });
  }

  vcs(source: string): Promise<VcsResponse> {
    return this.request("POST", "/vcs", { source });
  }

  verify(source: string, vcIds: string[] | null = null, timeoutMs?: number): Promise<VerifyResponse> {
    const body: Record<string, unknown> = { source, vc_ids: vcIds };
    if (timeoutMs !== undefined) body.timeout_ms = timeoutMs;
    return this.request("POST", "/verify", body);
  }

  setSolver(source: string, vcId: string, solver: string): Promise<{ source: string }> {
    return this.request("POST", "/set_solver", { source, vc_id: vcId, solver });
  }

  examples(): Promise<{ examples: ExampleFile[] }> {
    return this.request("GET", "/examples");
  }
}
