import type {
  ChangeRequest,
  CustomerView,
  ErrorPayload,
  FileUploadResult,
  LoginResponse,
  PackageView,
  QueuePage,
  RequestDetail,
  SessionInfo,
  SubmitRequestBody,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: Record<string, unknown>;

  constructor(status: number, payload: ErrorPayload) {
    super(payload.message);
    this.name = "ApiError";
    this.status = status;
    this.code = payload.code;
    this.details = payload.details ?? {};
  }
}

export interface QueueQuery {
  status?: string;
  sort?: string;
  kind?: string;
  page?: number;
  pageSize?: number;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the HTTP API.  Holds the bearer token after login;
 * every failure surfaces as ApiError carrying the server's error.code. */
export class ApiClient {
  readonly baseUrl: string;
  private token: string | null = null;
  private readonly doFetch: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // Never hold an unbound window.fetch: calling it with a foreign `this`
    // throws "Illegal invocation" in browsers.
    this.doFetch = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  get authenticated(): boolean {
    return this.token !== null;
  }

  setToken(token: string | null): void {
    this.token = token;
  }

  getToken(): string | null {
    return this.token;
  }

  private async call<T>(
    method: string,
    path: string,
    opts: { body?: unknown; query?: Record<string, string>; raw?: BodyInit; text?: boolean } = {},
  ): Promise<T> {
    let url = this.baseUrl + path;
    if (opts.query) {
      const params = new URLSearchParams();
      for (const [key, value] of Object.entries(opts.query)) {
        if (value !== "") params.set(key, value);
      }
      const qs = params.toString();
      if (qs) url += "?" + qs;
    }
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const init: RequestInit = { method, headers };
    if (opts.body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(opts.body);
    } else if (opts.raw !== undefined) {
      headers["Content-Type"] = "application/octet-stream";
      init.body = opts.raw;
    }
    const response = await this.doFetch(url, init);
    if (!response.ok) {
      let payload: ErrorPayload = {
        code: "HttpError",
        message: `${response.status} ${response.statusText}`,
        details: {},
      };
      try {
        const parsed = (await response.json()) as { error?: ErrorPayload };
        if (parsed.error) payload = parsed.error;
      } catch {
        // non-JSON error body; keep the generic payload
      }
      throw new ApiError(response.status, payload);
    }
    if (opts.text) return (await response.text()) as T;
    return (await response.json()) as T;
  }

  // -- sessions --------------------------------------------------------------

  async login(email: string, secret: string): Promise<LoginResponse> {
    const body = await this.call<LoginResponse>("POST", "/login", {
      body: { email, secret },
    });
    this.token = body.token;
    return body;
  }

  async logout(): Promise<void> {
    try {
      await this.call("POST", "/logout", { body: {} });
    } finally {
      this.token = null;
    }
  }

  session(): Promise<SessionInfo> {
    return this.call("GET", "/session");
  }

  async setVerification(answers: string[]): Promise<void> {
    await this.call("POST", "/verification", { body: { answers } });
  }

  // -- queue and requests ----------------------------------------------------

  queueView(query: QueueQuery = {}): Promise<QueuePage> {
    return this.call("GET", "/queue", {
      query: {
        status: query.status ?? "",
        sort: query.sort ?? "",
        kind: query.kind ?? "",
        page: query.page ? String(query.page) : "",
        page_size: query.pageSize ? String(query.pageSize) : "",
      },
    });
  }

  requestDetail(requestId: number): Promise<RequestDetail> {
    return this.call("GET", `/requests/${requestId}`);
  }

  submitRequest(body: SubmitRequestBody): Promise<ChangeRequest> {
    return this.call("POST", "/requests", { body });
  }

  assignRequest(requestId: number, assignee: string): Promise<ChangeRequest> {
    return this.call("POST", `/requests/${requestId}/assign`, { body: { assignee } });
  }

  transitionRequest(requestId: number, action: string): Promise<ChangeRequest> {
    return this.call("POST", `/requests/${requestId}/transition`, { body: { action } });
  }

  suspendRequest(requestId: number, resume = false): Promise<ChangeRequest> {
    return this.call("POST", `/requests/${requestId}/suspend`, {
      body: resume ? { resume: true } : {},
    });
  }

  reportCsv(target: string): Promise<string> {
    return this.call("GET", "/reports", {
      query: { target, format: "csv" },
      text: true,
    });
  }

  // -- customers and packages ------------------------------------------------

  customerView(customerId: string): Promise<CustomerView> {
    return this.call("GET", `/customers/${customerId}`);
  }

  packageView(packageId: string): Promise<PackageView> {
    return this.call("GET", `/packages/${packageId}`);
  }

  uploadFile(content: BodyInit): Promise<FileUploadResult> {
    return this.call("PUT", "/files", { raw: content });
  }
}
