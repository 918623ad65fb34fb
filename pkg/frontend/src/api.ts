/** Typed client for the annotation platform's HTTP API (the only surface
 * this UI talks to). */

export interface TaskInfo {
  id: string;
  tagset: string[];
}

export interface AssignmentSentence {
  id: number;
  text: string;
  tokens: string[];
}

export interface Suggestion {
  task: string;
  tags: string[];
}

export interface Assignment {
  done: boolean;
  sentence?: AssignmentSentence;
  suggestion?: Suggestion | null;
}

export interface HistoryEntry {
  sentence_id: number;
  text: string;
  tags?: string[];
  matrix_language?: string;
  timestamp: string;
  version: number;
}

export interface ImportReport {
  inserted: number;
  skipped_duplicates: number;
  rejected: [number, string][];
}

export interface KappaDocument {
  annotators: number[];
  matrix: (number | null)[][];
  mean: number | null;
  insufficient_pairs: number[][];
}

export interface Metrics {
  task: string;
  corpus_size: number;
  mean_cmi: number | null;
  cmi_histogram: number[];
  kappa: KappaDocument | null;
  completion_counts: Record<string, number>;
  computed_at: string;
}

export interface Progress {
  counts: Record<string, number>;
  corpus_size: number;
}

export interface LoginResponse {
  token: string;
  role: string;
  expires_at: string;
}

export interface ExportFilters {
  min_cmi?: string;
  max_cmi?: string;
  min_kappa?: string;
  annotators?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly violations: string[] = [],
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  token: string | null = null;

  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    contentType = "application/json",
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: string | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = contentType;
      payload = contentType === "application/json" ? JSON.stringify(body) : (body as string);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: payload,
    });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(
        response.status,
        parsed.code ?? "error",
        parsed.message ?? response.statusText,
        parsed.violations ?? [],
      );
    }
    return parsed as T;
  }

  async signup(username: string, password: string): Promise<{ annotator_id: number }> {
    return this.request("POST", "/api/auth/signup", { username, password });
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    const session = await this.request<LoginResponse>("POST", "/api/auth/login", {
      username,
      password,
    });
    this.token = session.token;
    return session;
  }

  async tasks(): Promise<TaskInfo[]> {
    const body = await this.request<{ tasks: TaskInfo[] }>("GET", "/api/tasks");
    return body.tasks;
  }

  async next(task: string): Promise<Assignment> {
    return this.request("GET", `/api/tasks/${task}/next`);
  }

  async submit(
    task: string,
    sentenceId: number,
    payload: string[] | string,
    feedback?: string,
  ): Promise<{ version: number }> {
    return this.request("POST", `/api/tasks/${task}/annotations`, {
      sentence_id: sentenceId,
      ...(typeof payload === "string" ? { matrix_language: payload } : { tags: payload }),
      ...(feedback ? { feedback } : {}),
    });
  }

  async history(task: string): Promise<HistoryEntry[]> {
    return this.request("GET", `/api/tasks/${task}/history`);
  }

  async edit(
    task: string,
    sentenceId: number,
    payload: string[] | string,
    feedback?: string,
  ): Promise<{ version: number }> {
    return this.request("PUT", `/api/tasks/${task}/annotations/${sentenceId}`, {
      ...(typeof payload === "string" ? { matrix_language: payload } : { tags: payload }),
      ...(feedback ? { feedback } : {}),
    });
  }

  async uploadCsv(csvText: string): Promise<ImportReport> {
    return this.request("POST", "/api/admin/upload", csvText, "text/csv");
  }

  async metrics(task: string): Promise<Metrics> {
    return this.request("GET", `/api/admin/metrics?task=${encodeURIComponent(task)}`);
  }

  async progress(task: string): Promise<Progress> {
    return this.request("GET", `/api/admin/progress?task=${encodeURIComponent(task)}`);
  }

  exportPath(task: string, filters: ExportFilters): string {
    const params = new URLSearchParams({ task });
    for (const [key, value] of Object.entries(filters)) {
      if (value !== undefined && value !== "") params.set(key, value);
    }
    return `/api/admin/export?${params.toString()}`;
  }

  /** Fetch a filtered CSV export as text (downloads need the auth header,
   * so a plain anchor href will not do). */
  async exportCsv(task: string, filters: ExportFilters): Promise<string> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchFn(`${this.baseUrl}${this.exportPath(task, filters)}`, {
      method: "GET",
      headers,
    });
    if (!response.ok) {
      const parsed = JSON.parse(await response.text());
      throw new ApiError(response.status, parsed.code ?? "error", parsed.message ?? "export failed");
    }
    return response.text();
  }
}
