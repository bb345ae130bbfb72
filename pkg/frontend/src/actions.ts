/**
 * Mutation dispatch with the console's two safety rules baked in:
 * at most one request in flight, and close/release go nowhere without
 * an explicit confirm flag. Results land in a bounded log that the
 * view renders inline; a 409 from the server is an ordinary outcome
 * here, never an exception that escapes to the render loop.
 */

import { ApiClient, ApiError } from "./api.js";

export type Action =
  | { kind: "backup" }
  | { kind: "resize"; target: number }
  | { kind: "close" }
  | { kind: "release"; force?: boolean; reason?: string };

export interface ActionLogEntry {
  at: number;
  label: string;
  outcome: string;
  detail: string;
}

export interface ActionState {
  pending: Action | null;
  log: ActionLogEntry[];
}

export interface IssueResult {
  ok: boolean;
  refused?: "confirm-required" | "busy";
  error?: ApiError;
}

const LOG_LIMIT = 30;

export function actionLabel(action: Action): string {
  switch (action.kind) {
    case "backup":
      return "backup";
    case "resize":
      return `resize(${action.target})`;
    case "close":
      return "close";
    case "release":
      return action.force ? "release(force)" : "release";
  }
}

export function isDestructive(action: Action): boolean {
  return action.kind === "close" || action.kind === "release";
}

export class ActionRunner {
  readonly state: ActionState = { pending: null, log: [] };

  constructor(
    private readonly client: ApiClient,
    private readonly onChange: (state: ActionState) => void,
    private readonly now: () => number = Date.now,
  ) {}

  async issue(action: Action, confirm = false): Promise<IssueResult> {
    if (this.state.pending !== null) return { ok: false, refused: "busy" };
    if (isDestructive(action) && !confirm) {
      this.push(action, "refused", `${action.kind} needs an explicit confirm`);
      return { ok: false, refused: "confirm-required" };
    }
    this.state.pending = action;
    this.onChange(this.state);
    try {
      const detail = await this.run(action);
      this.push(action, "200", detail);
      return { ok: true };
    } catch (err) {
      if (err instanceof ApiError) {
        this.push(action, `${err.status} ${err.code}`, err.message);
        return { ok: false, error: err };
      }
      this.push(action, "network-error", err instanceof Error ? err.message : String(err));
      return { ok: false };
    } finally {
      this.state.pending = null;
      this.onChange(this.state);
    }
  }

  private async run(action: Action): Promise<string> {
    switch (action.kind) {
      case "backup": {
        const res = await this.client.backup();
        return `captured ${res.snapshots.length} snapshot(s)`;
      }
      case "resize": {
        const res = await this.client.scale(action.target);
        return `target ${res.target}, state ${res.state}`;
      }
      case "close": {
        const res = await this.client.close();
        return `state ${res.state}`;
      }
      case "release": {
        const res = await this.client.release(action.force ?? false, action.reason);
        return `state ${res.state}`;
      }
    }
  }

  private push(action: Action, outcome: string, detail: string): void {
    this.state.log.unshift({ at: this.now(), label: actionLabel(action), outcome, detail });
    if (this.state.log.length > LOG_LIMIT) this.state.log.length = LOG_LIMIT;
    this.onChange(this.state);
  }
}
