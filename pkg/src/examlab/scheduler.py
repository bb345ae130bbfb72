"""Pod placement and fleet sizing.

Placement is first-fit-decreasing over two resource axes (cpu, ram) with
deterministic tie-breaking, so the same inputs always yield the same
assignment map.  Sizing answers "how many identical nodes does this pod set
need" and the autoscaler turns that into a bounded resize target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CapacityError, InvalidSpecError


@dataclass(frozen=True)
class PodSpec:
    uid: str
    cpu_millis: int
    ram_mb: int

    def __post_init__(self):
        if not self.uid:
            raise InvalidSpecError("pod uid must be nonempty")
        if self.cpu_millis <= 0 or self.ram_mb <= 0:
            raise InvalidSpecError(f"pod {self.uid!r} resources must be positive")


@dataclass(frozen=True)
class NodeShape:
    cpu_capacity_millis: int
    ram_capacity_mb: int

    def __post_init__(self):
        if self.cpu_capacity_millis <= 0 or self.ram_capacity_mb <= 0:
            raise InvalidSpecError("node capacities must be positive")

    def holds(self, pod: PodSpec) -> bool:
        return pod.cpu_millis <= self.cpu_capacity_millis and pod.ram_mb <= self.ram_capacity_mb

    def pods_per_node(self, pod: PodSpec) -> int:
        """How many copies of one uniform pod fit on a single node."""
        if not self.holds(pod):
            return 0
        return min(self.cpu_capacity_millis // pod.cpu_millis, self.ram_capacity_mb // pod.ram_mb)


@dataclass
class NodeBox:
    node_id: str
    shape: NodeShape
    pods: list[PodSpec] = field(default_factory=list)

    @property
    def cpu_used_millis(self) -> int:
        return sum(p.cpu_millis for p in self.pods)

    @property
    def ram_used_mb(self) -> int:
        return sum(p.ram_mb for p in self.pods)

    def fits(self, pod: PodSpec) -> bool:
        return (
            self.cpu_used_millis + pod.cpu_millis <= self.shape.cpu_capacity_millis
            and self.ram_used_mb + pod.ram_mb <= self.shape.ram_capacity_mb
        )

    def add(self, pod: PodSpec) -> None:
        if not self.fits(pod):
            raise CapacityError(f"pod {pod.uid!r} does not fit on node {self.node_id!r}")
        self.pods.append(pod)


@dataclass(frozen=True)
class Placement:
    assignments: dict[str, str]
    nodes: tuple[NodeBox, ...]
    unplaced: tuple[PodSpec, ...]

    def node_for(self, uid: str) -> str | None:
        return self.assignments.get(uid)

    def pods_on(self, node_id: str) -> tuple[PodSpec, ...]:
        for box in self.nodes:
            if box.node_id == node_id:
                return tuple(box.pods)
        return ()

    @property
    def used_node_count(self) -> int:
        return sum(1 for box in self.nodes if box.pods)


def _decreasing(pods) -> list[PodSpec]:
    ordered = sorted(pods, key=lambda p: (-p.cpu_millis, -p.ram_mb, p.uid))
    seen = set()
    for p in ordered:
        if p.uid in seen:
            raise InvalidSpecError(f"duplicate pod uid {p.uid!r}")
        seen.add(p.uid)
    return ordered


def place(pods, nodes) -> Placement:
    """First-fit-decreasing placement onto a fixed fleet.

    Pods go largest-first (cpu, then ram, then uid for stability); candidate
    nodes are tried in node_id order.  Pods that fit nowhere end up in
    ``unplaced`` rather than raising: the autoscaler reacts to them.
    """
    boxes = sorted((NodeBox(b.node_id, b.shape, list(b.pods)) for b in nodes), key=lambda b: b.node_id)
    assignments: dict[str, str] = {}
    unplaced: list[PodSpec] = []
    for pod in _decreasing(pods):
        for box in boxes:
            if box.fits(pod):
                box.add(pod)
                assignments[pod.uid] = box.node_id
                break
        else:
            unplaced.append(pod)
    return Placement(assignments=assignments, nodes=tuple(boxes), unplaced=tuple(unplaced))


def required_nodes(pods, shape: NodeShape) -> int:
    """Minimum fleet size by first-fit-decreasing onto unlimited empty nodes."""
    pods = _decreasing(pods)
    for pod in pods:
        if not shape.holds(pod):
            raise CapacityError(f"pod {pod.uid!r} exceeds a whole node ({pod.cpu_millis}m cpu, {pod.ram_mb}MB ram)")
    boxes: list[NodeBox] = []
    for pod in pods:
        for box in boxes:
            if box.fits(pod):
                box.add(pod)
                break
        else:
            box = NodeBox(node_id=f"fleet-{len(boxes):04d}", shape=shape)
            box.add(pod)
            boxes.append(box)
    return len(boxes)


@dataclass(frozen=True)
class AutoscalePolicy:
    enabled: bool = False
    min_nodes: int = 3
    max_nodes: int = 3
    headroom_pods: int = 0

    def __post_init__(self):
        if self.enabled and not (self.min_nodes <= self.max_nodes):
            raise InvalidSpecError("autoscale policy requires min_nodes <= max_nodes")
        if self.enabled and self.max_nodes < 3:
            raise InvalidSpecError("autoscale max_nodes must be >= 3, the smallest viable fleet")
        if self.headroom_pods < 0:
            raise InvalidSpecError("headroom_pods must be >= 0")


@dataclass(frozen=True)
class ResizeTo:
    target: int


def autoscale_decision(placement: Placement, policy: AutoscalePolicy) -> ResizeTo | None:
    """Pick a new fleet size, or None to leave the fleet alone.

    Needed capacity covers every pod (placed and unplaced) plus headroom
    copies of the largest pod.  The target is clamped to
    [max(3, min_nodes), max_nodes]; a clamped target equal to the current
    size means no change even if pods remain unplaced, because scaling
    cannot help at the boundary.
    """
    if not policy.enabled:
        return None
    if not placement.nodes:
        raise CapacityError("cannot derive a node shape from an empty fleet")
    shape = placement.nodes[0].shape
    pods = [p for box in placement.nodes for p in box.pods] + list(placement.unplaced)
    if policy.headroom_pods and pods:
        biggest = max(pods, key=lambda p: (p.cpu_millis, p.ram_mb))
        pods = pods + [
            PodSpec(uid=f"headroom-{i:02d}", cpu_millis=biggest.cpu_millis, ram_mb=biggest.ram_mb)
            for i in range(policy.headroom_pods)
        ]
    needed = required_nodes(pods, shape) if pods else 0
    floor = max(3, policy.min_nodes)
    target = min(max(needed, floor), policy.max_nodes)
    if target == len(placement.nodes):
        return None
    return ResizeTo(target=target)
