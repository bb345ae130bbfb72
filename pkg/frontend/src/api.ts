/**
 * Typed client for the control service's JSON API.
 *
 * The interfaces below mirror the server payloads field for field; the
 * console renders these values verbatim and never rederives them locally
 * (the server owns the money math in particular).
 */

export interface ClusterDoc {
  name: string;
  phase: string;
  node_count: number;
  healthy_count: number;
}

export interface PlacementDoc {
  placed: number;
  unplaced: number;
}

export interface StudentDoc {
  uid: string;
  snapshots: number;
  last_backup_t: number | null;
  final_done: boolean;
}

export interface BackupInfoDoc {
  interval_s: number;
  next_backup_in_s: number | null;
  final_done_count: number;
}

export interface CostDoc {
  node_cost: string;
  node_cost_cents: number;
  mgmt_cost: string;
  mgmt_cost_cents: number;
  total: string;
  total_cents: number;
  node_hours: string;
  node_hours_approx: number;
}

export interface StatusDoc {
  session_id: string;
  title: string;
  state: string;
  now_s: number;
  open_at_s: number;
  close_at_s: number;
  opened_at_s: number | null;
  closed_at_s: number | null;
  released_at_s: number | null;
  fail_reason: string | null;
  cluster: ClusterDoc | null;
  placement: PlacementDoc | null;
  students: StudentDoc[];
  backup: BackupInfoDoc;
  cost: { planned: CostDoc; accrued: CostDoc | null };
  allowlist_entries: number;
}

export interface SessionRowDoc {
  session_id: string;
  title: string;
  state: string;
  students: number;
}

export interface LoginDoc {
  token: string;
  uid: string;
  role: string;
  expires_at_s: number;
}

export interface SnapshotRowDoc {
  uid: string;
  seq: number;
  kind: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  token: string | null = null;

  constructor(
    readonly baseUrl: string,
    readonly sessionId: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    if (this.token) headers["authorization"] = `Bearer ${this.token}`;
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    let doc: any = {};
    if (text) {
      try {
        doc = JSON.parse(text);
      } catch {
        doc = {};
      }
    }
    if (!res.ok) {
      throw new ApiError(res.status, doc.error ?? "unknown", doc.message ?? `HTTP ${res.status}`);
    }
    return doc as T;
  }

  private sp(tail: string): string {
    return `/v1/sessions/${encodeURIComponent(this.sessionId)}${tail}`;
  }

  listSessions(): Promise<{ sessions: SessionRowDoc[] }> {
    return this.request("GET", "/v1/sessions");
  }

  status(): Promise<StatusDoc> {
    return this.request("GET", this.sp(""));
  }

  async login(uid: string, secret: string): Promise<LoginDoc> {
    const doc = await this.request<LoginDoc>("POST", this.sp("/login"), { uid, secret });
    this.token = doc.token;
    return doc;
  }

  provision(): Promise<{ cluster: string; state: string }> {
    return this.request("POST", this.sp("/provision"), {});
  }

  advanceTo(toS: number): Promise<{ now_s: number; state: string }> {
    return this.request("POST", this.sp("/advance"), { to_s: toS });
  }

  advanceBy(byS: number): Promise<{ now_s: number; state: string }> {
    return this.request("POST", this.sp("/advance"), { by_s: byS });
  }

  backup(): Promise<{ snapshots: SnapshotRowDoc[] }> {
    return this.request("POST", this.sp("/backups"), {});
  }

  scale(target: number): Promise<{ target: number; state: string }> {
    return this.request("POST", this.sp("/scale"), { target });
  }

  close(): Promise<{ state: string }> {
    return this.request("POST", this.sp("/close"), {});
  }

  release(force = false, reason?: string): Promise<{ state: string; released_at_s: number | null }> {
    const body: Record<string, unknown> = { force };
    if (reason !== undefined) body.reason = reason;
    return this.request("POST", this.sp("/release"), body);
  }
}
