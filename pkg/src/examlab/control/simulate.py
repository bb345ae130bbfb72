"""End-to-end simulated exam: plan, provision, open, back up, close, release.

Runs entirely on the virtual clock against a throwaway home directory and
returns a JSON-able report of what happened.  Useful both as an operator
dry-run ("what will this exam cost and when do backups land") and as the
basis for end-to-end tests.
"""

from __future__ import annotations

import tempfile
import time

from ..backup import FINAL, PERIODIC
from ..errors import BackupGuardError
from ..pricing import budget_total_cents, format_usd
from ..session import SessionState
from .home import ExamLabHome


def make_roster(students: int) -> str:
    lines = ["uid,full_name,role,initial_secret", "prof,Sample Teacher,teacher,pw-prof"]
    for i in range(1, students + 1):
        lines.append(f"s{i:03d},Student {i:03d},student,pw-s{i:03d}")
    return "\n".join(lines) + "\n"


def default_config(
    session_id: str = "sim-exam",
    students_hint: int = 30,
    node_type: str = "n1-standard-1",
    region: str = "us-central1",
    open_at_s: float = 600.0,
    duration_s: float = 7200.0,
    backup_interval_s: float = 900.0,
    pod_cpu_millis: int = 900,
    pod_ram_mb: int = 3200,
    catalog: str = "gcp-us-central1",
) -> dict:
    return {
        "session_id": session_id,
        "title": f"Simulated exam ({students_hint} students)",
        "region": region,
        "node_type": node_type,
        "open_at_s": open_at_s,
        "duration_s": duration_s,
        "backup_interval_s": backup_interval_s,
        "student_pod": {"cpu_millis": pod_cpu_millis, "ram_mb": pod_ram_mb},
        "allowlist": ["docs.python.org", "exam.campus.example"],
        "catalog": catalog,
    }


def run_simulation(config_doc: dict | None = None, students: int = 30, home_dir: str | None = None) -> dict:
    started = time.perf_counter()
    if config_doc is None:
        config_doc = default_config(students_hint=students)
    tmp = None
    if home_dir is None:
        tmp = tempfile.TemporaryDirectory(prefix="examlab-sim-")
        home_dir = tmp.name
    try:
        home = ExamLabHome(home_dir)
        rt = home.create_session(config_doc, make_roster(students))
        ctl = rt.controller

        ctl.provision()
        ctl.advance_to(ctl.config.open_at_s)
        # seed every workspace: one shared handout, one per-student file
        handout = b"# Exam rules\nRead everything before you start.\n"
        for uid in ctl.student_uids:
            ctl.workspace(uid).put("README.md", handout)
            ctl.workspace(uid).put("main.py", f"# answer file for {uid}\n".encode())

        early_release_refused = False
        try:
            ctl.release()
        except BackupGuardError:
            early_release_refused = True

        minute = 0
        while ctl.state is SessionState.OPEN:
            wait = ctl.status()["backup"]["next_backup_in_s"]
            minute += 1
            for uid in ctl.student_uids:
                ctl.workspace(uid).put("notes.md", f"progress checkpoint {minute} for {uid}\n".encode())
            ctl.advance(wait)

        ctl.advance(60.0)
        ctl.release()
        rt.save()

        events = ctl.provider.event_log()
        running = next(e for e in events if e.kind == "cluster-running")
        deleted = next(e for e in events if e.kind == "cluster-deleted")
        per_kind: dict[str, dict[str, int]] = {PERIODIC: {}, FINAL: {}}
        for snap in ctl.store.list_snapshots(ctl.config.session_id):
            if snap.kind in per_kind:
                per_kind[snap.kind][snap.student_uid] = per_kind[snap.kind].get(snap.student_uid, 0) + 1
        usage = ctl.usage_timeline()
        accrued = ctl.accrued_estimate()
        budget_cents = budget_total_cents(accrued)

        return {
            "session_id": ctl.config.session_id,
            "students": len(ctl.student_uids),
            "final_state": ctl.state.value,
            "cluster_running_at_s": running.t,
            "cluster_deleted_at_s": deleted.t,
            "node_count": running.detail["node_count"],
            "opened_at_s": ctl.opened_at,
            "closed_at_s": ctl.closed_at,
            "released_at_s": ctl.released_at,
            "early_release_refused": early_release_refused,
            "periodic_backups_per_student": per_kind[PERIODIC],
            "final_backups_per_student": per_kind[FINAL],
            "node_hours": str(usage.node_hours()),
            "node_hours_float": float(usage.node_hours()),
            "cost": accrued.as_dict(),
            "budget_total_cents": budget_cents,
            "budget_total_usd": format_usd(budget_cents),
            "store": ctl.store.blob_stats(),
            "provider_events": len(events),
            "journal_entries": len(ctl.journal),
            "wall_seconds": time.perf_counter() - started,
        }
    finally:
        if tmp is not None:
            tmp.cleanup()
