/**
 * Status polling loop.
 *
 * One fetch per interval against GET /v1/sessions/{id}. A failed poll
 * bumps a consecutive-miss counter; three misses in a row flag the view
 * as stale until a poll succeeds again. A 401 anywhere flips the
 * login-required flag, which only an explicit ackLogin clears (a
 * successful status read proves nothing about the token).
 */

import { ApiError } from "./api.js";
import type { StatusDoc } from "./api.js";

export const STALE_AFTER_MISSES = 3;
export const DEFAULT_INTERVAL_MS = 2000;

export interface PollerState {
  doc: StatusDoc | null;
  missed: number;
  stale: boolean;
  loginRequired: boolean;
  lastError: string | null;
}

export interface PollerOptions {
  intervalMs?: number;
  schedule?: (fn: () => void, ms: number) => unknown;
  cancel?: (handle: unknown) => void;
}

export class Poller {
  readonly intervalMs: number;
  readonly state: PollerState = {
    doc: null,
    missed: 0,
    stale: false,
    loginRequired: false,
    lastError: null,
  };

  private readonly schedule: (fn: () => void, ms: number) => unknown;
  private readonly cancel: (handle: unknown) => void;
  private timer: unknown = null;
  private running = false;

  constructor(
    private readonly fetchStatus: () => Promise<StatusDoc>,
    private readonly onChange: (state: PollerState) => void,
    opts: PollerOptions = {},
  ) {
    this.intervalMs = opts.intervalMs ?? DEFAULT_INTERVAL_MS;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = opts.cancel ?? ((h) => clearTimeout(h as ReturnType<typeof setTimeout>));
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    const loop = () => {
      void this.pollOnce().finally(() => {
        if (this.running) this.timer = this.schedule(loop, this.intervalMs);
      });
    };
    this.timer = this.schedule(loop, 0);
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
  }

  async pollOnce(): Promise<void> {
    try {
      const doc = await this.fetchStatus();
      this.state.doc = doc;
      this.state.missed = 0;
      this.state.stale = false;
      this.state.lastError = null;
    } catch (err) {
      this.state.missed += 1;
      this.state.stale = this.state.missed >= STALE_AFTER_MISSES;
      this.state.lastError = err instanceof Error ? err.message : String(err);
      if (err instanceof ApiError && err.status === 401) this.state.loginRequired = true;
    }
    this.onChange(this.state);
  }

  /** Surface the login prompt (no token yet, or an action hit a 401). */
  requireLogin(): void {
    this.state.loginRequired = true;
    this.onChange(this.state);
  }

  /** A login succeeded; drop the prompt. */
  ackLogin(): void {
    this.state.loginRequired = false;
    this.onChange(this.state);
  }
}
