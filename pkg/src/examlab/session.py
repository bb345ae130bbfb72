"""Exam session lifecycle.

One session owns one cluster, one roster of students, and one snapshot
history.  The state machine is strict: Planned, Provisioning, Ready, Open,
Closing, BackedUp, Released, with Failed reachable from any live state.
Release is guarded: it refuses until every student has a final backup, and
the only way around the guard is an explicit force that leaves a warning in
the journal.

Time is a virtual clock.  ``advance_to`` walks the agenda of interesting
instants (provider events, the scheduled open, each backup tick, the close)
and performs due work at each one, so a simulated exam behaves identically
no matter how coarsely the caller steps the clock.
"""

from __future__ import annotations

import json
import re
from base64 import b64decode, b64encode
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .backup import FINAL, PERIODIC, BackupPolicy, SnapshotStore, Workspace
from .errors import (
    BackupGuardError,
    ConfigError,
    FinalBackupError,
    IllegalTransitionError,
    UnknownHandleError,
    UnknownStudentError,
)
from .pricing import CostEstimate, PriceCatalog, UsageTimeline, estimate_fixed, estimate_timeline
from .provider import AutoscaleBounds, ClusterPhase, ClusterSpec, SimProvider
from .scheduler import AutoscalePolicy, NodeBox, NodeShape, PodSpec, autoscale_decision, place, required_nodes

_SESSION_ID_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")
_HOST_RE = re.compile(r"^(\*\.)?[A-Za-z0-9]([A-Za-z0-9-]*[A-Za-z0-9])?(\.[A-Za-z0-9]([A-Za-z0-9-]*[A-Za-z0-9])?)*$")


class SessionState(str, Enum):
    PLANNED = "Planned"
    PROVISIONING = "Provisioning"
    READY = "Ready"
    OPEN = "Open"
    CLOSING = "Closing"
    BACKED_UP = "BackedUp"
    RELEASED = "Released"
    FAILED = "Failed"


LEGAL_TRANSITIONS: dict[SessionState, set[SessionState]] = {
    SessionState.PLANNED: {SessionState.PROVISIONING, SessionState.FAILED},
    SessionState.PROVISIONING: {SessionState.READY, SessionState.FAILED},
    SessionState.READY: {SessionState.OPEN, SessionState.FAILED},
    SessionState.OPEN: {SessionState.CLOSING, SessionState.FAILED},
    SessionState.CLOSING: {SessionState.BACKED_UP, SessionState.FAILED},
    SessionState.BACKED_UP: {SessionState.RELEASED, SessionState.FAILED},
    SessionState.FAILED: set(),
    SessionState.RELEASED: set(),
}

TERMINAL_STATES = {SessionState.RELEASED}


@dataclass(frozen=True)
class AllowlistManifest:
    """Permitted network destinations during the exam, as a stable artifact."""

    session_id: str
    entries: tuple[str, ...]

    def as_dict(self) -> dict:
        return {"session_id": self.session_id, "entries": list(self.entries)}

    def as_text(self) -> str:
        head = f"# allowed destinations for session {self.session_id}\n"
        return head + "".join(f"{e}\n" for e in self.entries)


@dataclass(frozen=True)
class ExamConfig:
    session_id: str
    title: str
    region: str
    node_type: str
    cluster_name: str
    open_at_s: float
    duration_s: float
    backup_interval_s: float
    pod_cpu_millis: int
    pod_ram_mb: int
    autoscale_enabled: bool = False
    autoscale_min: int = 3
    autoscale_max: int = 3
    headroom_pods: int = 0
    allowlist: tuple[str, ...] = ()
    catalog: str = "gcp-us-central1"

    @classmethod
    def parse(cls, doc: dict) -> "ExamConfig":
        errs: list[str] = []

        def need(key, kind, check=None, why=""):
            val = doc.get(key)
            if val is None:
                errs.append(f"{key}: required")
                return None
            if kind is float and isinstance(val, int):
                val = float(val)
            if not isinstance(val, kind):
                errs.append(f"{key}: expected {kind.__name__}, got {type(val).__name__}")
                return None
            if check is not None and not check(val):
                errs.append(f"{key}: {why}")
                return None
            return val

        session_id = need("session_id", str, lambda v: bool(_SESSION_ID_RE.match(v)), "must be a lowercase dns-style id")
        title = doc.get("title", session_id or "")
        if not isinstance(title, str):
            errs.append("title: expected str")
            title = ""
        region = need("region", str, lambda v: bool(v), "must be nonempty")
        node_type = need("node_type", str, lambda v: bool(v), "must be nonempty")
        cluster_name = doc.get("cluster_name", f"examlab-{session_id}" if session_id else None)
        if not isinstance(cluster_name, str) or not cluster_name:
            errs.append("cluster_name: must be a nonempty str")
        open_at_s = need("open_at_s", float, lambda v: v >= 0, "must be >= 0")
        duration_s = need("duration_s", float, lambda v: v > 0, "must be > 0")
        backup_interval_s = doc.get("backup_interval_s", 900)
        if not isinstance(backup_interval_s, (int, float)) or backup_interval_s <= 0:
            errs.append("backup_interval_s: must be a number > 0")
        pod = doc.get("student_pod")
        pod_cpu = pod_ram = None
        if not isinstance(pod, dict):
            errs.append("student_pod: required object with cpu_millis and ram_mb")
        else:
            pod_cpu = pod.get("cpu_millis")
            pod_ram = pod.get("ram_mb")
            if not isinstance(pod_cpu, int) or pod_cpu <= 0:
                errs.append("student_pod.cpu_millis: must be an int > 0")
            if not isinstance(pod_ram, int) or pod_ram <= 0:
                errs.append("student_pod.ram_mb: must be an int > 0")
        auto = doc.get("autoscaling", {})
        enabled, amin, amax, headroom = False, 3, 3, 0
        if not isinstance(auto, dict):
            errs.append("autoscaling: must be an object")
        else:
            enabled = auto.get("enabled", False)
            amin = auto.get("min_nodes", 3)
            amax = auto.get("max_nodes", 3)
            headroom = auto.get("headroom_pods", 0)
            if not isinstance(enabled, bool):
                errs.append("autoscaling.enabled: must be a bool")
                enabled = False
            for key, val in (("min_nodes", amin), ("max_nodes", amax), ("headroom_pods", headroom)):
                if not isinstance(val, int) or val < 0:
                    errs.append(f"autoscaling.{key}: must be an int >= 0")
            if enabled and isinstance(amin, int) and isinstance(amax, int) and not (3 <= amin <= amax):
                errs.append("autoscaling: requires 3 <= min_nodes <= max_nodes")
        allow = doc.get("allowlist", [])
        entries: list[str] = []
        if not isinstance(allow, list) or not all(isinstance(a, str) for a in allow):
            errs.append("allowlist: must be a list of hostnames")
        else:
            for a in allow:
                if not _HOST_RE.match(a):
                    errs.append(f"allowlist: {a!r} is not a hostname (wildcards only as a leading *. )")
                else:
                    entries.append(a)
        catalog = doc.get("catalog", "gcp-us-central1")
        if not isinstance(catalog, str) or not catalog:
            errs.append("catalog: must be a nonempty str")
        unknown = sorted(
            set(doc)
            - {
                "session_id", "title", "region", "node_type", "cluster_name", "open_at_s", "duration_s",
                "backup_interval_s", "student_pod", "autoscaling", "allowlist", "catalog",
            }
        )
        for key in unknown:
            errs.append(f"{key}: unknown field")
        if errs:
            raise ConfigError(errs)
        return cls(
            session_id=session_id,
            title=title or session_id,
            region=region,
            node_type=node_type,
            cluster_name=cluster_name,
            open_at_s=float(open_at_s),
            duration_s=float(duration_s),
            backup_interval_s=float(backup_interval_s),
            pod_cpu_millis=pod_cpu,
            pod_ram_mb=pod_ram,
            autoscale_enabled=enabled,
            autoscale_min=amin,
            autoscale_max=amax,
            headroom_pods=headroom,
            allowlist=tuple(sorted(set(entries))),
            catalog=catalog,
        )

    def as_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "title": self.title,
            "region": self.region,
            "node_type": self.node_type,
            "cluster_name": self.cluster_name,
            "open_at_s": self.open_at_s,
            "duration_s": self.duration_s,
            "backup_interval_s": self.backup_interval_s,
            "student_pod": {"cpu_millis": self.pod_cpu_millis, "ram_mb": self.pod_ram_mb},
            "autoscaling": {
                "enabled": self.autoscale_enabled,
                "min_nodes": self.autoscale_min,
                "max_nodes": self.autoscale_max,
                "headroom_pods": self.headroom_pods,
            },
            "allowlist": list(self.allowlist),
            "catalog": self.catalog,
        }


class SessionController:
    """Drives one exam session end to end against a provider and a store."""

    def __init__(
        self,
        config: ExamConfig,
        catalog: PriceCatalog,
        provider: SimProvider,
        store: SnapshotStore,
        student_uids: list[str],
    ):
        self.config = config
        self.catalog = catalog
        self.provider = provider
        self.store = store
        self.student_uids = sorted(student_uids)
        self.state = SessionState.PLANNED
        self.cluster_handle: str | None = None
        self.opened_at: float | None = None
        self.closed_at: float | None = None
        self.released_at: float | None = None
        self.fail_reason: str | None = None
        self.journal: list[dict] = []
        self.workspaces: dict[str, Workspace] = {uid: Workspace() for uid in self.student_uids}
        self.policy = BackupPolicy(interval_s=config.backup_interval_s)
        self._pending_ticks: list[tuple[float, str]] = []
        self._final_done: set[str] = set()
        node_type = catalog.require(config.node_type)
        self.node_shape = NodeShape(
            cpu_capacity_millis=node_type.cpus * 1000,
            ram_capacity_mb=int(node_type.ram_gb * 1024),
        )
        required = required_nodes(self._pods(), self.node_shape) if self.student_uids else 0
        planned = max(3, required)
        if config.autoscale_enabled:
            # initial size must sit inside the autoscaler's bounds
            planned = min(max(planned, config.autoscale_min), config.autoscale_max)
        self.planned_nodes = planned
        self._journal_entry("plan", {
            "students": len(self.student_uids),
            "node_type": config.node_type,
            "required_nodes": required,
            "planned_nodes": self.planned_nodes,
            "planned_cost": self.planned_estimate().as_dict(),
        })

    # -- clock ------------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.provider.now

    def advance_to(self, t: float) -> None:
        """Step the virtual clock to t, doing all due work at each exact instant."""
        while True:
            stop = self._next_stop(t)
            if stop is None:
                break
            self.provider.advance_to(stop)
            self._poke()
        if t > self.provider.now:
            self.provider.advance_to(t)
        self._poke()

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise IllegalTransitionError("cannot advance the clock backwards")
        self.advance_to(self.now + dt)

    def _next_stop(self, t: float) -> float | None:
        now = self.provider.now
        stops = []
        due = self.provider.next_due()
        if due is not None:
            stops.append(due)
        if self.state in (SessionState.PROVISIONING, SessionState.READY):
            stops.append(self.config.open_at_s)
        if self.state is SessionState.OPEN:
            if self._pending_ticks:
                stops.append(self._pending_ticks[0][0])
            stops.append(self.close_at)
        live = [s for s in stops if now < s <= t]
        return min(live) if live else None

    @property
    def close_at(self) -> float:
        base = self.opened_at if self.opened_at is not None else self.config.open_at_s
        return base + self.config.duration_s

    # -- lifecycle ----------------------------------------------------------------

    def cluster_spec(self) -> ClusterSpec:
        return ClusterSpec(
            cluster_name=self.config.cluster_name,
            region=self.config.region,
            node_type_name=self.config.node_type,
            initial_node_count=self.planned_nodes,
            autoscaling=AutoscaleBounds(
                enabled=self.config.autoscale_enabled,
                min_nodes=self.config.autoscale_min,
                max_nodes=self.config.autoscale_max,
            ),
        )

    def provision(self) -> str:
        self._require(SessionState.PLANNED, "provision")
        self.cluster_handle = self.provider.create_cluster(self.cluster_spec())
        self._transition(SessionState.PROVISIONING)
        return self.cluster_handle

    def open_exam(self) -> None:
        self._require(SessionState.READY, "open")
        self._open(auto=False)

    def close_exam(self) -> None:
        if self.state is SessionState.OPEN:
            self._begin_close(auto=False)
        elif self.state is SessionState.CLOSING:
            self._finish_close()  # retry the final backups
        else:
            raise IllegalTransitionError(f"cannot close from {self.state.value}")

    def release(self) -> None:
        if self.state is SessionState.RELEASED:
            raise IllegalTransitionError("session is already released")
        if self.state is not SessionState.BACKED_UP:
            raise BackupGuardError(
                f"refusing release from {self.state.value}: final backups are not confirmed"
            )
        self._delete_cluster()
        self._transition(SessionState.RELEASED)
        self.released_at = self.now

    def force_release(self, reason: str) -> None:
        if self.state in TERMINAL_STATES:
            raise IllegalTransitionError("session is already released")
        self._journal_entry("warning", {
            "forced": True,
            "from": self.state.value,
            "reason": reason,
            "final_backups_missing": sorted(set(self.student_uids) - self._final_done),
        })
        self._delete_cluster()
        self._transition(SessionState.RELEASED, forced=True)
        self.released_at = self.now

    def fail(self, reason: str) -> None:
        if self.state in TERMINAL_STATES or self.state is SessionState.FAILED:
            raise IllegalTransitionError(f"cannot fail from {self.state.value}")
        self.fail_reason = reason
        self._transition(SessionState.FAILED, detail={"reason": reason})

    def scale(self, target: int) -> None:
        if self.state not in (SessionState.READY, SessionState.OPEN):
            raise IllegalTransitionError(f"cannot scale from {self.state.value}")
        self.provider.resize_cluster(self.cluster_handle, target)
        self._journal_entry("scale", {"target": target})

    def backup_now(self, uid: str | None = None) -> list:
        """Take a manual snapshot for one student, or for everyone."""
        if self.state not in (SessionState.OPEN, SessionState.CLOSING):
            raise IllegalTransitionError(f"cannot back up from {self.state.value}")
        uids = [uid] if uid else list(self.student_uids)
        snaps = []
        for u in uids:
            if u not in self.workspaces:
                raise UnknownStudentError(f"unknown uid {u!r}")
            snaps.append(self._capture(u, self.now, "manual"))
        return snaps

    # -- workspaces -----------------------------------------------------------------

    def workspace(self, uid: str) -> Workspace:
        try:
            return self.workspaces[uid]
        except KeyError:
            raise UnknownStudentError(f"unknown uid {uid!r}") from None

    def write_student_file(self, uid: str, path: str, data: bytes) -> None:
        self.workspace(uid).put(path, data)

    def drop_workspace(self, uid: str) -> None:
        """Failure injection: lose a student's live files before the final backup."""
        self.workspace(uid)
        del self.workspaces[uid]

    # -- reporting ------------------------------------------------------------------

    def allowlist_manifest(self) -> AllowlistManifest:
        return AllowlistManifest(session_id=self.config.session_id, entries=self.config.allowlist)

    def planned_estimate(self) -> CostEstimate:
        hours = Fraction(self.config.duration_s).limit_denominator(10**9) / 3600
        return estimate_fixed(self.catalog, self.config.node_type, self.planned_nodes, hours)

    def usage_timeline(self) -> UsageTimeline | None:
        if self.cluster_handle is None:
            return None
        points: list[tuple[Fraction, int]] = []
        end = Fraction(self.now).limit_denominator(10**9)
        for ev in self.provider.event_log():
            if ev.cluster != self.cluster_handle:
                continue
            t = Fraction(ev.t).limit_denominator(10**9)
            count = None
            if ev.kind == "cluster-running":
                count = ev.detail["node_count"]
            elif ev.kind == "resize-completed":
                count = ev.detail["node_count"]
            elif ev.kind == "cluster-deleted":
                count = 0
                end = t
            if count is None:
                continue
            if points and points[-1][0] == t:
                points[-1] = (t, count)
            else:
                points.append((t, count))
        if not points:
            return None
        return UsageTimeline.build(points, max(end, points[-1][0]))

    def accrued_estimate(self) -> CostEstimate | None:
        timeline = self.usage_timeline()
        if timeline is None:
            return None
        return estimate_timeline(self.catalog, self.config.node_type, timeline)

    def placement(self):
        state = self.provider.state(self.cluster_handle)
        boxes = [NodeBox(n.node_id, self.node_shape) for n in state.nodes]
        return place(self._pods(), boxes)

    def status(self) -> dict:
        cluster = None
        if self.cluster_handle is not None:
            try:
                cs = self.provider.state(self.cluster_handle)
                cluster = {
                    "name": self.cluster_handle,
                    "phase": cs.phase.value,
                    "node_count": len(cs.nodes),
                    "healthy_count": cs.healthy_count,
                }
            except UnknownHandleError:
                cluster = {"name": self.cluster_handle, "phase": ClusterPhase.DELETED.value, "node_count": 0, "healthy_count": 0}
        placement = None
        if self.cluster_handle is not None:
            try:
                pl = self.placement()
                placement = {"placed": len(pl.assignments), "unplaced": len(pl.unplaced)}
            except UnknownHandleError:
                placement = None
        counts = {uid: 0 for uid in self.student_uids}
        last_t: dict[str, float | None] = {uid: None for uid in self.student_uids}
        for snap in self.store.list_snapshots(self.config.session_id):
            if snap.student_uid in counts:
                counts[snap.student_uid] += 1
                last_t[snap.student_uid] = snap.t
        next_backup = None
        if self.state is SessionState.OPEN:
            upcoming = [t for t, _ in self._pending_ticks] + [self.close_at]
            next_backup = min(upcoming) - self.now
        accrued = self.accrued_estimate()
        return {
            "session_id": self.config.session_id,
            "title": self.config.title,
            "state": self.state.value,
            "now_s": self.now,
            "open_at_s": self.config.open_at_s,
            "close_at_s": self.close_at,
            "opened_at_s": self.opened_at,
            "closed_at_s": self.closed_at,
            "released_at_s": self.released_at,
            "fail_reason": self.fail_reason,
            "cluster": cluster,
            "placement": placement,
            "students": [
                {"uid": uid, "snapshots": counts[uid], "last_backup_t": last_t[uid], "final_done": uid in self._final_done}
                for uid in self.student_uids
            ],
            "backup": {
                "interval_s": self.config.backup_interval_s,
                "next_backup_in_s": next_backup,
                "final_done_count": len(self._final_done),
            },
            "cost": {
                "planned": self.planned_estimate().as_dict(),
                "accrued": accrued.as_dict() if accrued else None,
            },
            "allowlist_entries": len(self.config.allowlist),
        }

    # -- persistence ------------------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "state": self.state.value,
            "cluster_handle": self.cluster_handle,
            "opened_at": self.opened_at,
            "closed_at": self.closed_at,
            "released_at": self.released_at,
            "fail_reason": self.fail_reason,
            "journal": list(self.journal),
            "student_uids": list(self.student_uids),
            "pending_ticks": [list(t) for t in self._pending_ticks],
            "final_done": sorted(self._final_done),
            "workspaces": {
                uid: {path: b64encode(data).decode() for path, data in sorted(ws.files.items())}
                for uid, ws in sorted(self.workspaces.items())
            },
            "provider": self.provider.to_state(),
        }

    @classmethod
    def from_state(cls, state: dict, catalog: PriceCatalog, store: SnapshotStore) -> "SessionController":
        config = ExamConfig.parse(state["config"])
        provider = SimProvider.from_state(state["provider"])
        ctl = cls(config, catalog, provider, store, list(state["student_uids"]))
        ctl.journal = list(state["journal"])
        ctl.state = SessionState(state["state"])
        ctl.cluster_handle = state["cluster_handle"]
        ctl.opened_at = state["opened_at"]
        ctl.closed_at = state["closed_at"]
        ctl.released_at = state["released_at"]
        ctl.fail_reason = state["fail_reason"]
        ctl._pending_ticks = [(t, kind) for t, kind in state["pending_ticks"]]
        ctl._final_done = set(state["final_done"])
        ctl.workspaces = {
            uid: Workspace({path: b64decode(data) for path, data in files.items()})
            for uid, files in state["workspaces"].items()
        }
        return ctl

    def dump_json(self) -> str:
        return json.dumps(self.to_state(), sort_keys=True)

    @classmethod
    def load_json(cls, text: str, catalog: PriceCatalog, store: SnapshotStore) -> "SessionController":
        return cls.from_state(json.loads(text), catalog, store)

    # -- internals ----------------------------------------------------------------------

    def _pods(self) -> list[PodSpec]:
        return [
            PodSpec(uid=uid, cpu_millis=self.config.pod_cpu_millis, ram_mb=self.config.pod_ram_mb)
            for uid in self.student_uids
        ]

    def _require(self, expected: SessionState, verb: str) -> None:
        if self.state is not expected:
            raise IllegalTransitionError(f"cannot {verb} from {self.state.value}, requires {expected.value}")

    def _transition(self, to: SessionState, forced: bool = False, detail: dict | None = None) -> None:
        if not forced and to not in LEGAL_TRANSITIONS[self.state]:
            raise IllegalTransitionError(f"illegal transition {self.state.value} -> {to.value}")
        entry = {"from": self.state.value, "to": to.value, "forced": forced}
        if detail:
            entry.update(detail)
        self.state = to
        self._journal_entry("transition", entry)

    def _journal_entry(self, kind: str, detail: dict) -> None:
        self.journal.append({"t": self.now, "kind": kind, "detail": detail})

    def _open(self, auto: bool) -> None:
        self.opened_at = self.now
        self._transition(SessionState.OPEN, detail={"auto": auto, "scheduled_open_at_s": self.config.open_at_s})
        self._pending_ticks = [(t, kind) for t, kind in self.policy.due_ticks(self.opened_at, self.close_at) if kind == PERIODIC]

    def _begin_close(self, auto: bool) -> None:
        self.closed_at = self.now
        self._transition(SessionState.CLOSING, detail={"auto": auto})
        self._pending_ticks = []
        self._finish_close()

    def _finish_close(self) -> None:
        failed = []
        for uid in self.student_uids:
            if uid in self._final_done:
                continue
            if uid not in self.workspaces:
                failed.append(uid)
                continue
            self._capture(uid, self.now, FINAL)
            self._final_done.add(uid)
        if failed:
            raise FinalBackupError(sorted(failed))
        self._transition(SessionState.BACKED_UP)

    def _capture(self, uid: str, t: float, kind: str):
        snap = self.store.capture(self.config.session_id, uid, self.workspaces[uid], t, kind)
        self._journal_entry("backup", {"uid": uid, "seq": snap.seq, "kind": kind, "files": len(snap.files), "at": t})
        return snap

    def _delete_cluster(self) -> None:
        if self.cluster_handle is None:
            return
        try:
            self.provider.delete_cluster(self.cluster_handle)
        except UnknownHandleError:
            pass  # already gone

    def _autoscale_tick(self) -> None:
        if not self.config.autoscale_enabled or self.state is not SessionState.OPEN:
            return
        cs = self.provider.state(self.cluster_handle)
        if cs.phase is not ClusterPhase.RUNNING or not cs.nodes:
            return
        policy = AutoscalePolicy(
            enabled=True,
            min_nodes=self.config.autoscale_min,
            max_nodes=self.config.autoscale_max,
            headroom_pods=self.config.headroom_pods,
        )
        decision = autoscale_decision(self.placement(), policy)
        if decision is not None:
            self.provider.resize_cluster(self.cluster_handle, decision.target)
            self._journal_entry("scale", {"target": decision.target, "auto": True})

    def _poke(self) -> None:
        now = self.provider.now
        if self.state is SessionState.PROVISIONING:
            cs = self.provider.state(self.cluster_handle)
            if cs.phase is ClusterPhase.RUNNING:
                self._transition(SessionState.READY)
        if self.state is SessionState.READY and now >= self.config.open_at_s:
            self._open(auto=True)
        if self.state is SessionState.OPEN:
            while self._pending_ticks and self._pending_ticks[0][0] <= now:
                tick_t, _ = self._pending_ticks.pop(0)
                for uid in self.student_uids:
                    if uid in self.workspaces:
                        self._capture(uid, tick_t, PERIODIC)
            self._autoscale_tick()
        if self.state is SessionState.OPEN and now >= self.close_at:
            self._begin_close(auto=True)
