/**
 * Shapes the raw status document into what the console shows.
 *
 * This is a straight mapping layer: every number and string comes out of
 * the API response unchanged. Cost strings pass through verbatim; the
 * helpers at the bottom only format times for display.
 */

import type { StatusDoc } from "./api.js";

export interface StudentRow {
  uid: string;
  snapshots: number;
  lastBackupT: number | null;
  finalDone: boolean;
}

export interface SessionView {
  sessionId: string;
  title: string;
  state: string;
  nowS: number;
  failReason: string | null;
  clusterName: string | null;
  clusterPhase: string | null;
  nodeCount: number;
  healthyCount: number;
  placed: number;
  unplaced: number;
  costSoFar: string | null;
  costSoFarHours: string | null;
  plannedCost: string;
  nextBackupInS: number | null;
  backupIntervalS: number;
  finalDoneCount: number;
  students: StudentRow[];
}

export function buildView(doc: StatusDoc): SessionView {
  const accrued = doc.cost.accrued;
  return {
    sessionId: doc.session_id,
    title: doc.title,
    state: doc.state,
    nowS: doc.now_s,
    failReason: doc.fail_reason,
    clusterName: doc.cluster ? doc.cluster.name : null,
    clusterPhase: doc.cluster ? doc.cluster.phase : null,
    nodeCount: doc.cluster ? doc.cluster.node_count : 0,
    healthyCount: doc.cluster ? doc.cluster.healthy_count : 0,
    placed: doc.placement ? doc.placement.placed : 0,
    unplaced: doc.placement ? doc.placement.unplaced : doc.students.length,
    costSoFar: accrued ? accrued.total : null,
    costSoFarHours: accrued ? accrued.node_hours : null,
    plannedCost: doc.cost.planned.total,
    nextBackupInS: doc.backup.next_backup_in_s,
    backupIntervalS: doc.backup.interval_s,
    finalDoneCount: doc.backup.final_done_count,
    students: doc.students.map((s) => ({
      uid: s.uid,
      snapshots: s.snapshots,
      lastBackupT: s.last_backup_t,
      finalDone: s.final_done,
    })),
  };
}

/** "247" -> "4:07"; null means no backup is scheduled. */
export function formatCountdown(seconds: number | null): string {
  if (seconds === null) return "-";
  const s = Math.max(0, Math.round(seconds));
  const m = Math.floor(s / 60);
  return `${m}:${String(s % 60).padStart(2, "0")}`;
}

/** Sim-clock instant for table cells, e.g. "t+1500s". */
export function formatInstant(t: number | null): string {
  if (t === null) return "-";
  return `t+${Math.round(t)}s`;
}
