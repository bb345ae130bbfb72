"""Cluster provider contract with two drivers.

``SimProvider`` is a deterministic discrete-event simulation of cluster
create/resize/delete/repair on a virtual clock: every transition is scheduled
as data on an event heap and fires in (timestamp, insertion) order, so equal
call sequences always produce byte-identical event logs.  The script renderer
emits the equivalent provider-CLI command blocks for operators who drive a
real cluster by hand.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import (
    DuplicateNameError,
    IllegalTransitionError,
    InvalidSpecError,
    UnknownHandleError,
    UnknownNodeError,
)

_NAME_RE = re.compile(r"^[a-z]([a-z0-9-]*[a-z0-9])?$")

MIN_CLUSTER_NODES = 3


class ClusterPhase(str, Enum):
    PROVISIONING = "Provisioning"
    RUNNING = "Running"
    RESIZING = "Resizing"
    DELETING = "Deleting"
    DELETED = "Deleted"


class NodeHealth(str, Enum):
    HEALTHY = "Healthy"
    FAILED = "Failed"
    REPAIRING = "Repairing"


@dataclass(frozen=True)
class AutoscaleBounds:
    enabled: bool = False
    min_nodes: int = MIN_CLUSTER_NODES
    max_nodes: int = MIN_CLUSTER_NODES


@dataclass(frozen=True)
class ClusterSpec:
    cluster_name: str
    region: str
    node_type_name: str
    initial_node_count: int
    autoscaling: AutoscaleBounds = AutoscaleBounds()
    auto_repair: bool = True
    auto_upgrade: bool = True

    def problems(self) -> list[str]:
        errs = []
        if not _NAME_RE.match(self.cluster_name or ""):
            errs.append(f"cluster_name {self.cluster_name!r} is not a DNS label")
        if not self.region:
            errs.append("region must be nonempty")
        if not self.node_type_name:
            errs.append("node_type_name must be nonempty")
        if self.initial_node_count < MIN_CLUSTER_NODES:
            errs.append(f"initial_node_count {self.initial_node_count} is below the {MIN_CLUSTER_NODES}-node minimum")
        if self.autoscaling.enabled:
            a = self.autoscaling
            if not (MIN_CLUSTER_NODES <= a.min_nodes <= self.initial_node_count <= a.max_nodes):
                errs.append(
                    f"autoscaling bounds must satisfy {MIN_CLUSTER_NODES} <= min({a.min_nodes})"
                    f" <= initial({self.initial_node_count}) <= max({a.max_nodes})"
                )
        return errs

    def validate(self) -> None:
        errs = self.problems()
        if errs:
            raise InvalidSpecError("; ".join(errs))


@dataclass(frozen=True)
class NodeInstance:
    node_id: str
    node_type_name: str
    health: NodeHealth
    created_at: float


@dataclass(frozen=True)
class ClusterState:
    phase: ClusterPhase
    nodes: tuple[NodeInstance, ...]
    spec: ClusterSpec

    @property
    def healthy_count(self) -> int:
        return sum(1 for n in self.nodes if n.health is NodeHealth.HEALTHY)


@dataclass(frozen=True)
class SimConfig:
    provision_delay_s: float = 300.0
    resize_delay_per_node_s: float = 20.0
    repair_delay_s: float = 120.0
    random_seed: int = 0

    def __post_init__(self):
        if min(self.provision_delay_s, self.resize_delay_per_node_s, self.repair_delay_s) < 0:
            raise InvalidSpecError("simulation delays must be >= 0")


@dataclass(frozen=True)
class ProviderEvent:
    t: float
    kind: str
    cluster: str
    detail: dict

    def as_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, "cluster": self.cluster, "detail": self.detail}


@dataclass
class _Cluster:
    spec: ClusterSpec
    phase: ClusterPhase
    suffix: str
    nodes: list[NodeInstance] = field(default_factory=list)
    node_seq: int = 0
    target: int = 0
    transitions: list[tuple[str, str]] = field(default_factory=list)


class SimProvider:
    """Single-threaded simulated cluster provider on a virtual clock."""

    def __init__(self, config: SimConfig | None = None):
        self.config = config or SimConfig()
        self._now = 0.0
        self._clusters: dict[str, _Cluster] = {}
        self._graveyard: dict[str, _Cluster] = {}
        self._pending: list[tuple[float, int, dict]] = []
        self._schedule_seq = 0
        self._events: list[ProviderEvent] = []

    @property
    def now(self) -> float:
        return self._now

    # -- operations ---------------------------------------------------------

    def create_cluster(self, spec: ClusterSpec) -> str:
        spec.validate()
        name = spec.cluster_name
        if name in self._clusters:
            raise DuplicateNameError(f"cluster {name!r} already exists")
        suffix = hashlib.sha256(f"{self.config.random_seed}:{name}".encode()).hexdigest()[:4]
        rec = _Cluster(spec=spec, phase=ClusterPhase.PROVISIONING, suffix=suffix, target=spec.initial_node_count)
        rec.transitions.append(("", ClusterPhase.PROVISIONING.value))
        self._clusters[name] = rec
        self._emit(
            "cluster-provisioning",
            name,
            {
                "node_count": spec.initial_node_count,
                "node_type": spec.node_type_name,
                "region": spec.region,
                "autoscaling": {
                    "enabled": spec.autoscaling.enabled,
                    "min_nodes": spec.autoscaling.min_nodes,
                    "max_nodes": spec.autoscaling.max_nodes,
                },
                "auto_repair": spec.auto_repair,
                # accepted but a no-op in simulation; recorded here only
                "auto_upgrade": spec.auto_upgrade,
            },
        )
        self._schedule(self._now + self.config.provision_delay_s, {"op": "provision-complete", "cluster": name})
        return name

    def resize_cluster(self, handle: str, target: int) -> None:
        rec = self._require(handle)
        if rec.phase is not ClusterPhase.RUNNING:
            raise IllegalTransitionError(f"cluster {handle!r} is {rec.phase.value}, not Running")
        if target < MIN_CLUSTER_NODES:
            raise InvalidSpecError(f"resize target {target} is below the {MIN_CLUSTER_NODES}-node minimum")
        current = len(rec.nodes)
        if target == current:
            self._emit("resize-completed", handle, {"node_count": current, "added": [], "removed": []})
            return
        self._set_phase(rec, ClusterPhase.RESIZING)
        self._emit("resize-started", handle, {"current": current, "target": target})
        delay = abs(target - current) * self.config.resize_delay_per_node_s
        rec.target = target
        self._schedule(self._now + delay, {"op": "resize-complete", "cluster": handle, "target": target})

    def delete_cluster(self, handle: str) -> None:
        rec = self._require(handle)
        self._set_phase(rec, ClusterPhase.DELETING)
        self._emit("cluster-deleting", handle, {})
        rec.nodes = []
        self._set_phase(rec, ClusterPhase.DELETED)
        self._emit("cluster-deleted", handle, {})
        self._graveyard[handle] = self._clusters.pop(handle)

    def inject_node_failure(self, handle: str, node_id: str) -> None:
        rec = self._require(handle)
        if rec.phase is not ClusterPhase.RUNNING:
            raise IllegalTransitionError(f"cluster {handle!r} is {rec.phase.value}, not Running")
        idx = next((i for i, n in enumerate(rec.nodes) if n.node_id == node_id), None)
        if idx is None:
            raise UnknownNodeError(f"no node {node_id!r} in cluster {handle!r}")
        node = rec.nodes[idx]
        if node.health is not NodeHealth.HEALTHY:
            raise InvalidSpecError(f"node {node_id!r} is {node.health.value}, not Healthy", code="node-not-healthy")
        rec.nodes[idx] = replace(node, health=NodeHealth.FAILED)
        self._emit("node-failed", handle, {"node_id": node_id})
        if rec.spec.auto_repair:
            rec.nodes[idx] = replace(rec.nodes[idx], health=NodeHealth.REPAIRING)
            self._emit("node-repair-started", handle, {"node_id": node_id})
            self._schedule(
                self._now + self.config.repair_delay_s,
                {"op": "repair-complete", "cluster": handle, "node_id": node_id},
            )

    def advance(self, dt: float) -> list[ProviderEvent]:
        if dt < 0:
            raise InvalidSpecError("advance requires dt >= 0")
        return self.advance_to(self._now + dt)

    def advance_to(self, t: float) -> list[ProviderEvent]:
        if t < self._now:
            raise InvalidSpecError("cannot advance the clock backwards")
        fired: list[ProviderEvent] = []
        while self._pending and self._pending[0][0] <= t:
            due, _, payload = heapq.heappop(self._pending)
            self._now = max(self._now, due)
            before = len(self._events)
            self._fire(payload)
            fired.extend(self._events[before:])
        self._now = t
        return fired

    def next_due(self) -> float | None:
        return self._pending[0][0] if self._pending else None

    # -- inspection ---------------------------------------------------------

    def state(self, handle: str) -> ClusterState:
        rec = self._require(handle)
        return ClusterState(phase=rec.phase, nodes=tuple(rec.nodes), spec=rec.spec)

    def transitions(self, handle: str) -> list[tuple[str, str]]:
        rec = self._clusters.get(handle) or self._graveyard.get(handle)
        if rec is None:
            raise UnknownHandleError(f"unknown cluster {handle!r}")
        return list(rec.transitions)

    def event_log(self) -> list[ProviderEvent]:
        return list(self._events)

    def export_events_jsonl(self) -> str:
        return "\n".join(json.dumps(e.as_dict(), sort_keys=True) for e in self._events) + ("\n" if self._events else "")

    # -- persistence --------------------------------------------------------

    def to_state(self) -> dict:
        def spec_dict(s: ClusterSpec) -> dict:
            return {
                "cluster_name": s.cluster_name,
                "region": s.region,
                "node_type_name": s.node_type_name,
                "initial_node_count": s.initial_node_count,
                "autoscaling": {
                    "enabled": s.autoscaling.enabled,
                    "min_nodes": s.autoscaling.min_nodes,
                    "max_nodes": s.autoscaling.max_nodes,
                },
                "auto_repair": s.auto_repair,
                "auto_upgrade": s.auto_upgrade,
            }

        def cluster_dict(rec: _Cluster) -> dict:
            return {
                "spec": spec_dict(rec.spec),
                "phase": rec.phase.value,
                "suffix": rec.suffix,
                "nodes": [
                    {"node_id": n.node_id, "node_type_name": n.node_type_name, "health": n.health.value, "created_at": n.created_at}
                    for n in rec.nodes
                ],
                "node_seq": rec.node_seq,
                "target": rec.target,
                "transitions": [list(tr) for tr in rec.transitions],
            }

        return {
            "now": self._now,
            "config": {
                "provision_delay_s": self.config.provision_delay_s,
                "resize_delay_per_node_s": self.config.resize_delay_per_node_s,
                "repair_delay_s": self.config.repair_delay_s,
                "random_seed": self.config.random_seed,
            },
            "clusters": {name: cluster_dict(rec) for name, rec in self._clusters.items()},
            "graveyard": {name: cluster_dict(rec) for name, rec in self._graveyard.items()},
            "pending": [{"due": due, "seq": seq, "payload": payload} for due, seq, payload in sorted(self._pending)],
            "schedule_seq": self._schedule_seq,
            "events": [e.as_dict() for e in self._events],
        }

    @classmethod
    def from_state(cls, state: dict) -> "SimProvider":
        prov = cls(SimConfig(**state["config"]))
        prov._now = state["now"]
        prov._schedule_seq = state["schedule_seq"]
        prov._pending = [(p["due"], p["seq"], p["payload"]) for p in state["pending"]]
        heapq.heapify(prov._pending)
        prov._events = [ProviderEvent(e["t"], e["kind"], e["cluster"], e["detail"]) for e in state["events"]]

        def load_cluster(doc: dict) -> _Cluster:
            sd = doc["spec"]
            spec = ClusterSpec(
                cluster_name=sd["cluster_name"],
                region=sd["region"],
                node_type_name=sd["node_type_name"],
                initial_node_count=sd["initial_node_count"],
                autoscaling=AutoscaleBounds(**sd["autoscaling"]),
                auto_repair=sd["auto_repair"],
                auto_upgrade=sd["auto_upgrade"],
            )
            return _Cluster(
                spec=spec,
                phase=ClusterPhase(doc["phase"]),
                suffix=doc["suffix"],
                nodes=[
                    NodeInstance(n["node_id"], n["node_type_name"], NodeHealth(n["health"]), n["created_at"])
                    for n in doc["nodes"]
                ],
                node_seq=doc["node_seq"],
                target=doc["target"],
                transitions=[tuple(tr) for tr in doc["transitions"]],
            )

        prov._clusters = {name: load_cluster(doc) for name, doc in state["clusters"].items()}
        prov._graveyard = {name: load_cluster(doc) for name, doc in state["graveyard"].items()}
        return prov

    # -- internals ----------------------------------------------------------

    def _require(self, handle: str) -> _Cluster:
        rec = self._clusters.get(handle)
        if rec is None:
            raise UnknownHandleError(f"unknown cluster {handle!r}")
        return rec

    def _set_phase(self, rec: _Cluster, to: ClusterPhase) -> None:
        rec.transitions.append((rec.phase.value, to.value))
        rec.phase = to

    def _emit(self, kind: str, cluster: str, detail: dict) -> None:
        self._events.append(ProviderEvent(t=self._now, kind=kind, cluster=cluster, detail=detail))

    def _schedule(self, due: float, payload: dict) -> None:
        self._schedule_seq += 1
        heapq.heappush(self._pending, (due, self._schedule_seq, payload))

    def _new_node(self, rec: _Cluster) -> NodeInstance:
        rec.node_seq += 1
        return NodeInstance(
            node_id=f"{rec.spec.cluster_name}-{rec.suffix}-n{rec.node_seq:03d}",
            node_type_name=rec.spec.node_type_name,
            health=NodeHealth.HEALTHY,
            created_at=self._now,
        )

    def _fire(self, payload: dict) -> None:
        rec = self._clusters.get(payload["cluster"])
        if rec is None:
            return  # cluster deleted while the event was in flight
        op = payload["op"]
        if op == "provision-complete":
            if rec.phase is not ClusterPhase.PROVISIONING:
                return
            rec.nodes = [self._new_node(rec) for _ in range(rec.spec.initial_node_count)]
            self._set_phase(rec, ClusterPhase.RUNNING)
            self._emit("cluster-running", rec.spec.cluster_name, {"node_count": len(rec.nodes)})
        elif op == "resize-complete":
            if rec.phase is not ClusterPhase.RESIZING:
                return
            target = payload["target"]
            added, removed = [], []
            if target > len(rec.nodes):
                while len(rec.nodes) < target:
                    node = self._new_node(rec)
                    rec.nodes.append(node)
                    added.append(node.node_id)
            else:
                # scale-down victims: newest first (length before lex so n1000 > n999)
                rec.nodes.sort(key=lambda n: (n.created_at, len(n.node_id), n.node_id))
                while len(rec.nodes) > target:
                    removed.append(rec.nodes.pop().node_id)
            self._set_phase(rec, ClusterPhase.RUNNING)
            self._emit(
                "resize-completed",
                rec.spec.cluster_name,
                {"node_count": len(rec.nodes), "added": added, "removed": removed},
            )
        elif op == "repair-complete":
            idx = next((i for i, n in enumerate(rec.nodes) if n.node_id == payload["node_id"]), None)
            if idx is None or rec.nodes[idx].health is not NodeHealth.REPAIRING:
                return  # node already scaled away or otherwise gone
            replacement = self._new_node(rec)
            rec.nodes[idx] = replacement
            self._emit(
                "node-repaired",
                rec.spec.cluster_name,
                {"failed_node_id": payload["node_id"], "replacement_node_id": replacement.node_id},
            )
        else:
            raise AssertionError(f"unknown scheduled op {op!r}")


# -- lifecycle script rendering ----------------------------------------------

_BATCH_SDK_DIR = r"C:\Users\admin\AppData\Local\Google\Cloud SDK"


def render_create_script(spec: ClusterSpec, batch_wrapper: bool = False) -> str:
    spec.validate()
    flags = [f"--region {spec.region}", f"--num-nodes={spec.initial_node_count}", f"--machine-type={spec.node_type_name}"]
    if batch_wrapper:
        flags[0] = "--region %REGION%"
    if spec.auto_repair:
        flags.append("--enable-autorepair")
    if spec.auto_upgrade:
        flags.append("--enable-autoupgrade")
    if spec.autoscaling.enabled:
        flags.append("--enable-autoscaling")
        flags.append(f"--max-nodes={spec.autoscaling.max_nodes}")
        flags.append(f"--min-nodes={spec.autoscaling.min_nodes}")
    head = f"gcloud container clusters create {spec.cluster_name}"
    if batch_wrapper:
        body = f"{head} ^\n" + "^\n".join(f"  {f}" for f in flags) + "\n"
        return _wrap_batch("Create Kubernetes Cluster", body, set_region=spec.region)
    return f"{head} \\\n" + " \\\n".join(f"  {f}" for f in flags) + "\n"


def render_resize_script(spec: ClusterSpec, target: int, batch_wrapper: bool = False, banner: str = "Add") -> str:
    if target < MIN_CLUSTER_NODES:
        raise InvalidSpecError(f"resize target {target} is below the {MIN_CLUSTER_NODES}-node minimum")
    body = (
        f"gcloud container clusters resize {spec.cluster_name} \\\n"
        f"  --node-pool default-pool --num-nodes {target} --quiet\n"
    )
    if batch_wrapper:
        body = (
            f"gcloud container clusters resize {spec.cluster_name} ^\n"
            f"  --node-pool default-pool --num-nodes {target} --quiet\n"
        )
        return _wrap_batch(f"{banner} nodes cluster Kubernetes", body, done_line=True)
    return body


def render_delete_script(spec: ClusterSpec, batch_wrapper: bool = False) -> str:
    body = f"gcloud container clusters delete {spec.cluster_name}\n"
    if batch_wrapper:
        return _wrap_batch("Delete Kubernetes Cluster", body, set_region=spec.region)
    return body


def render_script(spec: ClusterSpec, action: str, target: int | None = None, batch_wrapper: bool = False) -> str:
    """Render one lifecycle script: action is "create", "scale" (with target) or "delete"."""
    if action == "create":
        return render_create_script(spec, batch_wrapper)
    if action == "scale":
        if target is None:
            raise InvalidSpecError("scale action requires a target node count")
        return render_resize_script(spec, target, batch_wrapper)
    if action == "delete":
        return render_delete_script(spec, batch_wrapper)
    raise InvalidSpecError(f"unknown script action {action!r}")


def render_lifecycle_scripts(spec: ClusterSpec, batch_wrapper: bool = False) -> dict[str, str]:
    """The four operator scripts: create, scale to max, scale to min, delete.

    Without autoscaling bounds the two resize targets fall back to the
    initial node count.
    """
    up = spec.autoscaling.max_nodes if spec.autoscaling.enabled else spec.initial_node_count
    down = spec.autoscaling.min_nodes if spec.autoscaling.enabled else spec.initial_node_count
    return {
        "create": render_create_script(spec, batch_wrapper),
        "scale-up": render_resize_script(spec, up, batch_wrapper, banner="Add"),
        "scale-down": render_resize_script(spec, down, batch_wrapper, banner="Remove"),
        "delete": render_delete_script(spec, batch_wrapper),
    }


def _wrap_batch(echo_line: str, body: str, set_region: str | None = None, done_line: bool = False) -> str:
    lines = ["ECHO OFF", "CLS", "SET PATH=", f"cd {_BATCH_SDK_DIR}", f"ECHO {echo_line}"]
    if set_region:
        lines.append(f"set REGION={set_region}")
    out = "\n".join(lines) + "\n" + body
    out += ("ECHO Done\n" if done_line else "ECHO ---\n") + "ECHO ON\n"
    return out
