import type { StatusDoc } from "../src/api.js";

/** A mid-exam status document, as the control service would send it. */
export function statusDoc(overrides: Partial<StatusDoc> = {}): StatusDoc {
  return {
    session_id: "exam1",
    title: "Intro final",
    state: "Open",
    now_s: 1600,
    open_at_s: 600,
    close_at_s: 7800,
    opened_at_s: 600,
    closed_at_s: null,
    released_at_s: null,
    fail_reason: null,
    cluster: { name: "examlab-exam1", phase: "running", node_count: 3, healthy_count: 3 },
    placement: { placed: 2, unplaced: 0 },
    students: [
      { uid: "s001", snapshots: 1, last_backup_t: 1500, final_done: false },
      { uid: "s002", snapshots: 1, last_backup_t: 1500, final_done: false },
    ],
    backup: { interval_s: 900, next_backup_in_s: 800, final_done_count: 0 },
    cost: {
      planned: {
        node_cost: "$0.85",
        node_cost_cents: 85,
        mgmt_cost: "$0.20",
        mgmt_cost_cents: 20,
        total: "$1.05",
        total_cents: 105,
        node_hours: "6",
        node_hours_approx: 6.0,
      },
      accrued: {
        node_cost: "$0.13",
        node_cost_cents: 13,
        mgmt_cost: "$0.04",
        mgmt_cost_cents: 4,
        total: "$0.17",
        total_cents: 17,
        node_hours: "13/12",
        node_hours_approx: 1.0833,
      },
    },
    allowlist_entries: 1,
    ...overrides,
  };
}
