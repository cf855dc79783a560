"""Shared domain types and the deterministic random-stream factory."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:
    from .energy import EnergyLedger
    from .localization import LocationArea
    from .ranging import RangingTable

NodeId = int

_U64 = 0xFFFFFFFFFFFFFFFF


class Role(Enum):
    ANCHOR = "anchor"
    UNKNOWN = "unknown"


class ChannelKind(Enum):
    FREE_SPACE = "freespace"
    SHADOWING = "shadowing"


class ProtocolMode(Enum):
    LATERATION_ONLY = "lateration"
    BOUNDING_BOX_ONLY = "bbox"
    PROCEDURE = "pme"


class Consideration(Enum):
    """Global deployment preference used to rank eligible protocols."""

    ACCURACY_FIRST = "accuracy-first"
    LIFETIME_FIRST = "lifetime-first"


class Protocol(Enum):
    LATERATION = "Lateration"
    BOUNDING_BOX = "BoundingBox"


@dataclass(frozen=True)
class Position:
    """A point in meters on the 2-D testing plane."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"position coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def clamped(self, width: float, height: float) -> "Position":
        return Position(min(max(self.x, 0.0), width), min(max(self.y, 0.0), height))


@dataclass(frozen=True)
class PositionEstimate:
    """Outcome of one protocol execution for one node."""

    position: Position
    protocol: Protocol
    location_area: Optional["LocationArea"]
    anchors_used: int

    def __post_init__(self) -> None:
        if self.protocol is Protocol.BOUNDING_BOX and self.location_area is None:
            raise ValueError("BoundingBox estimates must carry their location area")
        if self.protocol is Protocol.LATERATION and not 4 <= self.anchors_used <= 6:
            raise ValueError(f"Lateration uses 4..6 anchors, got {self.anchors_used}")


@dataclass
class NodeState:
    """One node of a replication: role, ground truth, and accumulated results.

    Anchors know their true position and never hold a procedure-produced
    estimate; `estimate` stays None for them even though the experiment
    harness still *measures* what the procedure would have produced.
    """

    id: NodeId
    role: Role
    true_position: Position
    ranging_table: Optional["RangingTable"] = None
    estimate: Optional[PositionEstimate] = None
    energy: Optional["EnergyLedger"] = None


def rng_stream(seed: int, stream_label: str) -> np.random.Generator:
    """Deterministic, label-separated random stream.

    Built on the counter-based Philox generator keyed by the 64-bit seed and
    a SHA-256 digest of the label, so distinct labels give statistically
    independent streams and replications can be reproduced out of order.
    """
    digest = hashlib.sha256(stream_label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 8], "little") for i in (0, 8, 16)]
    entropy = [seed & _U64, *words]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def validate_node_states(nodes: list[NodeState]) -> None:
    """Validation pass over per-node invariants; raises on violation."""
    seen: set[NodeId] = set()
    for node in nodes:
        if node.id < 0 or node.id in seen:
            raise ValueError(f"node ids must be unique and non-negative, got {node.id}")
        seen.add(node.id)
        if node.role is Role.ANCHOR and node.estimate is not None:
            raise ValueError(f"anchor {node.id} must not hold a self-estimate")
        if node.estimate is not None:
            table = node.ranging_table
            if table is None or len(table) == 0:
                raise ValueError(f"node {node.id} has an estimate but no ranging entries")
    if seen and sorted(seen) != list(range(len(seen))):
        raise ValueError("node ids must be dense 0..N-1")
