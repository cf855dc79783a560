"""Pattern Matching Engine: protocol selection and the per-node procedure.

The PME maps a node's environmental conditions (here: how many anchors it
is connected to) plus the deployment consideration to one protocol, and is
re-evaluated after every new anchor connection. Re-evaluation is replayed
after the beacon phase in first-decoded order, which is equivalent to
online operation for the reported metrics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .localization import (
    LATERATION_MAX_ANCHORS,
    LaterationProblem,
    LaterationSolution,
    bounding_box,
    solve_lateration,
)
from .model import Consideration, PositionEstimate, Protocol, ProtocolMode
from .ranging import RangingEntry, RangingTable


class AccuracyClass(Enum):
    FINE = "fine"
    COARSE = "coarse"


class EnergyClass(Enum):
    LOW = "low"
    VERY_LOW = "very-low"


@dataclass(frozen=True)
class ProtocolDescriptor:
    name: Protocol
    min_anchors: int
    max_useful_anchors: Optional[int]  # None: every new connection re-executes
    accuracy_class: AccuracyClass
    energy_class: EnergyClass

    def __post_init__(self) -> None:
        if self.min_anchors < 1:
            raise ValueError(f"min_anchors must be >= 1, got {self.min_anchors}")
        if self.max_useful_anchors is not None and self.max_useful_anchors < self.min_anchors:
            raise ValueError("max_useful_anchors must be >= min_anchors")


LATERATION_DESCRIPTOR = ProtocolDescriptor(
    name=Protocol.LATERATION,
    min_anchors=4,
    max_useful_anchors=LATERATION_MAX_ANCHORS,
    accuracy_class=AccuracyClass.FINE,
    energy_class=EnergyClass.LOW,
)

BOUNDING_BOX_DESCRIPTOR = ProtocolDescriptor(
    name=Protocol.BOUNDING_BOX,
    min_anchors=1,
    max_useful_anchors=None,
    accuracy_class=AccuracyClass.COARSE,
    energy_class=EnergyClass.VERY_LOW,
)

DEFAULT_REGISTRY: tuple[ProtocolDescriptor, ...] = (
    LATERATION_DESCRIPTOR,
    BOUNDING_BOX_DESCRIPTOR,
)


def registry_for_mode(mode: ProtocolMode) -> tuple[ProtocolDescriptor, ...]:
    """Individual-protocol modes restrict the registry; the procedure uses both."""
    if mode is ProtocolMode.LATERATION_ONLY:
        return (LATERATION_DESCRIPTOR,)
    if mode is ProtocolMode.BOUNDING_BOX_ONLY:
        return (BOUNDING_BOX_DESCRIPTOR,)
    return DEFAULT_REGISTRY


def select_protocol(
    connected_anchors: int,
    consideration: Consideration,
    registry: Sequence[ProtocolDescriptor] = DEFAULT_REGISTRY,
) -> Optional[Protocol]:
    """Pick the eligible protocol that best matches the deployment preference.

    Accuracy-first ranks fine accuracy ahead of coarse; lifetime-first ranks
    very-low energy ahead of low. Registry order breaks ties. Returns None
    when no protocol's minimum anchor requirement is met.
    """
    if not registry:
        raise ValueError("protocol registry must not be empty")
    if connected_anchors < 0:
        raise ValueError("connected_anchors must be non-negative")
    eligible = [d for d in registry if connected_anchors >= d.min_anchors]
    if not eligible:
        return None
    if consideration is Consideration.ACCURACY_FIRST:
        ranking = {AccuracyClass.FINE: 0, AccuracyClass.COARSE: 1}
        best = min(eligible, key=lambda d: ranking[d.accuracy_class])
    else:
        ranking = {EnergyClass.VERY_LOW: 0, EnergyClass.LOW: 1}
        best = min(eligible, key=lambda d: ranking[d.energy_class])
    return best.name


@dataclass
class ProcedureOutcome:
    estimate: Optional[PositionEstimate]
    executions: dict[Protocol, int] = field(
        default_factory=lambda: {Protocol.LATERATION: 0, Protocol.BOUNDING_BOX: 0}
    )

    @property
    def located(self) -> bool:
        return self.estimate is not None


def _strongest(entries: Sequence[RangingEntry], cap: int) -> list[RangingEntry]:
    ordered = sorted(entries, key=lambda e: (-e.mean_rssi_dbm, e.anchor_id))
    return ordered[:cap]


def run_procedure(
    table: RangingTable,
    consideration: Consideration,
    registry: Sequence[ProtocolDescriptor],
    plane: tuple[float, float],
    nominal_range_m: float,
    solver_cache: Optional[dict[tuple[int, ...], LaterationSolution]] = None,
) -> ProcedureOutcome:
    """Replay anchor connections one by one and execute the selected protocol.

    After each new connection the PME re-evaluates; connections past a
    protocol's max_useful_anchors trigger no further execution (so
    Lateration runs at 4, 5 and 6 connections and then freezes). The final
    estimate is the last one produced; every execution is counted (the
    counts drive energy billing) but earlier estimates are overwritten by
    later ones, so only the final execution has its geometry materialized.
    `solver_cache` lets callers share identical solves across protocol
    modes of the same replication.
    """
    outcome = ProcedureOutcome(estimate=None)
    entries = table.entries
    last_execution: Optional[tuple[Protocol, int]] = None
    for connected in range(1, len(entries) + 1):
        choice = select_protocol(connected, consideration, registry)
        if choice is None:
            continue
        descriptor = next(d for d in registry if d.name is choice)
        if (
            descriptor.max_useful_anchors is not None
            and connected > descriptor.max_useful_anchors
        ):
            continue
        outcome.executions[choice] += 1
        last_execution = (choice, connected)
    if last_execution is None:
        return outcome

    choice, connected = last_execution
    current = entries[:connected]
    if choice is Protocol.LATERATION:
        use = (
            current
            if connected <= LATERATION_MAX_ANCHORS
            else _strongest(current, LATERATION_MAX_ANCHORS)
        )
        key = tuple(sorted(e.anchor_id for e in use))
        solution = solver_cache.get(key) if solver_cache is not None else None
        if solution is None:
            problem = LaterationProblem(
                anchors=np.array([[e.anchor_position.x, e.anchor_position.y] for e in use]),
                distances=np.array([e.estimated_distance_m for e in use]),
            )
            solution = solve_lateration(problem, plane)
            if solver_cache is not None:
                solver_cache[key] = solution
        outcome.estimate = PositionEstimate(
            position=solution.position,
            protocol=Protocol.LATERATION,
            location_area=None,
            anchors_used=len(use),
        )
    else:
        ordered = _strongest(current, cap=len(current))  # strongest first for drop order
        result = bounding_box(
            [(e.anchor_position, nominal_range_m) for e in ordered], plane
        )
        outcome.estimate = PositionEstimate(
            position=result.estimate,
            protocol=Protocol.BOUNDING_BOX,
            location_area=result.area,
            anchors_used=result.anchors_used,
        )
    return outcome
