"""Node-type catalog and exact cost estimation.

All money travels as exact rationals (``fractions.Fraction`` of USD) until the
moment a figure is displayed, at which point it is rounded half-even to whole
cents exactly once.  Per-node-hour rates are stored as integer-cent numerators
over node-hour denominators so published 3-hour cluster prices reproduce to
the cent with no tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import ConfigError, DuplicateNameError, UnknownNodeTypeError

# Flat budget allowance, in cents, on top of node and management cost when
# budgeting a full exam window.  Covers what the provider's own calculator
# quotes beyond the bare node rate (boot disks, ancillary services, setup
# margin); deliberately generous so budget figures are upper bounds.
DEFAULT_OVERHEAD_ALLOWANCE_CENTS = 400

BUNDLED_CATALOG = "gcp-us-central1"


def as_fraction(value) -> Fraction:
    """Exact Fraction from int/str/Fraction, or the decimal reading of a float."""
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def round_half_even_cents(usd: Fraction) -> int:
    """Round an exact USD amount to integer cents, ties to even."""
    cents = usd * 100
    floor, rem = divmod(cents.numerator, cents.denominator)
    twice = 2 * rem
    if twice > cents.denominator:
        return floor + 1
    if twice < cents.denominator:
        return floor
    return floor + (floor % 2)


def format_usd(cents: int) -> str:
    sign = "-" if cents < 0 else ""
    cents = abs(cents)
    return f"{sign}${cents // 100}.{cents % 100:02d}"


@dataclass(frozen=True)
class NodeType:
    name: str
    cpus: int
    ram_gb: Fraction
    price_cents_per_node_hour: Fraction
    assumption: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ConfigError(["node type name must be nonempty"])
        if self.cpus < 1:
            raise ConfigError([f"{self.name}: cpus must be >= 1"])
        if self.ram_gb <= 0:
            raise ConfigError([f"{self.name}: ram_gb must be > 0"])
        if self.price_cents_per_node_hour < 0:
            raise ConfigError([f"{self.name}: price must be >= 0"])

    @property
    def hourly_price_usd(self) -> Fraction:
        return self.price_cents_per_node_hour / 100


@dataclass(frozen=True)
class PriceCatalog:
    node_types: dict[str, NodeType]
    mgmt_fee_cents_per_hour: Fraction = Fraction(0)

    def require(self, name: str) -> NodeType:
        try:
            return self.node_types[name]
        except KeyError:
            known = ", ".join(sorted(self.node_types)) or "<empty catalog>"
            raise UnknownNodeTypeError(f"unknown node type {name!r} (catalog has: {known})") from None


@dataclass(frozen=True)
class CostEstimate:
    """Exact node/management cost plus the rounded presentation fields.

    ``total_cents`` is the sum of the two rounded line items so printed
    statements always add up; each displayed field is rounded exactly once.
    """

    node_cost_usd: Fraction
    mgmt_cost_usd: Fraction
    node_hours: Fraction

    @property
    def node_cost_cents(self) -> int:
        return round_half_even_cents(self.node_cost_usd)

    @property
    def mgmt_cost_cents(self) -> int:
        return round_half_even_cents(self.mgmt_cost_usd)

    @property
    def total_cents(self) -> int:
        return self.node_cost_cents + self.mgmt_cost_cents

    def as_dict(self) -> dict:
        return {
            "node_cost": format_usd(self.node_cost_cents),
            "node_cost_cents": self.node_cost_cents,
            "mgmt_cost": format_usd(self.mgmt_cost_cents),
            "mgmt_cost_cents": self.mgmt_cost_cents,
            "total": format_usd(self.total_cents),
            "total_cents": self.total_cents,
            "node_hours": str(self.node_hours),
            "node_hours_approx": float(self.node_hours),
        }


@dataclass(frozen=True)
class UsageTimeline:
    """Node-count change points plus an end timestamp, in seconds."""

    points: tuple[tuple[Fraction, int], ...]
    end: Fraction

    @classmethod
    def build(cls, points, end) -> "UsageTimeline":
        norm = tuple((as_fraction(t), int(n)) for t, n in points)
        end_f = as_fraction(end)
        prev = None
        for t, n in norm:
            if n < 0:
                raise ConfigError([f"timeline node_count {n} is negative"])
            if prev is not None and t <= prev:
                raise ConfigError(["timeline timestamps must be strictly increasing"])
            prev = t
        if norm and end_f < norm[-1][0]:
            raise ConfigError(["timeline end precedes its last change point"])
        return cls(points=norm, end=end_f)

    def node_seconds(self) -> Fraction:
        total = Fraction(0)
        for i, (t, n) in enumerate(self.points):
            t_next = self.points[i + 1][0] if i + 1 < len(self.points) else self.end
            total += n * (t_next - t)
        return total

    def node_hours(self) -> Fraction:
        return self.node_seconds() / 3600


def read_catalog_doc(path) -> dict:
    """Read a catalog JSON document without parsing it into a PriceCatalog.

    ``path`` may also be the name of a bundled fixture (currently "gcp-us-central1").
    """
    if isinstance(path, str) and path == BUNDLED_CATALOG:
        raw = resources.files("examlab.data").joinpath("catalog.gcp-us-central1.json").read_text()
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError([f"catalog file not found: {p}"])
        raw = p.read_text()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"catalog is not valid JSON: {exc}"]) from exc


def load_catalog(path) -> PriceCatalog:
    """Load a price catalog from the documented JSON format."""
    return parse_catalog(read_catalog_doc(path))


def parse_catalog(doc: dict) -> PriceCatalog:
    if not isinstance(doc, dict) or "node_types" not in doc:
        raise ConfigError(["catalog must be an object with a node_types list"])
    node_types: dict[str, NodeType] = {}
    for entry in doc["node_types"]:
        try:
            name = entry["name"]
            nt = NodeType(
                name=name,
                cpus=int(entry["cpus"]),
                ram_gb=as_fraction(entry["ram_gb"]),
                price_cents_per_node_hour=Fraction(
                    int(entry["price_cents_numerator"]),
                    int(entry["price_node_hours_denominator"]),
                ),
                assumption=entry.get("assumption"),
            )
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError([f"bad node type entry {entry!r}: {exc}"]) from exc
        if name in node_types:
            raise DuplicateNameError(f"duplicate node type {name!r} in catalog")
        node_types[name] = nt
    fee = Fraction(int(doc.get("mgmt_fee_cents_per_hour", 0)))
    if fee < 0:
        raise ConfigError(["mgmt_fee_cents_per_hour must be >= 0"])
    return PriceCatalog(node_types=node_types, mgmt_fee_cents_per_hour=fee)


def estimate_fixed(catalog: PriceCatalog, node_type: str, node_count: int, hours) -> CostEstimate:
    """Cost of a constant-size cluster: rate x nodes x hours, exactly."""
    nt = catalog.require(node_type)
    if node_count < 0:
        raise ConfigError(["node_count must be >= 0"])
    hours_f = as_fraction(hours)
    if hours_f < 0:
        raise ConfigError(["hours must be >= 0"])
    node_hours = Fraction(node_count) * hours_f
    return CostEstimate(
        node_cost_usd=nt.hourly_price_usd * node_hours,
        mgmt_cost_usd=catalog.mgmt_fee_cents_per_hour / 100 * hours_f,
        node_hours=node_hours,
    )


def estimate_timeline(catalog: PriceCatalog, node_type: str, timeline: UsageTimeline) -> CostEstimate:
    """Cost of a resizing cluster: integral of node count over the timeline."""
    nt = catalog.require(node_type)
    node_hours = timeline.node_hours()
    wall_hours = (timeline.end - timeline.points[0][0]) / 3600 if timeline.points else Fraction(0)
    return CostEstimate(
        node_cost_usd=nt.hourly_price_usd * node_hours,
        mgmt_cost_usd=catalog.mgmt_fee_cents_per_hour / 100 * wall_hours,
        node_hours=node_hours,
    )


def budget_total_cents(estimate: CostEstimate, allowance_cents: int = DEFAULT_OVERHEAD_ALLOWANCE_CENTS) -> int:
    """Upper-bound exam budget: rounded estimate plus the flat overhead allowance."""
    return estimate.total_cents + allowance_cents
