"""RSSI-based distance estimation, always assuming a free-space channel."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import NodeId, Position
from .propagation import SPEED_OF_LIGHT_M_S, RadioParams

MIN_DISTANCE_M = 0.01


@dataclass(frozen=True)
class RangingEntry:
    anchor_id: NodeId
    anchor_position: Position  # from the beacon payload
    mean_rssi_dbm: float
    sample_count: int
    estimated_distance_m: float


@dataclass
class RangingTable:
    """Per-anchor ranging results, ordered by first decoded beacon."""

    entries: list[RangingEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def get(self, anchor_id: NodeId) -> RangingEntry | None:
        for entry in self.entries:
            if entry.anchor_id == anchor_id:
                return entry
        return None


def rssi_sample(link_power_dbm: float, rng: np.random.Generator, sigma_db: float) -> float:
    """One RSSI reading: link power plus independent zero-mean normal noise."""
    if sigma_db < 0.0:
        raise ValueError(f"sigma_db must be non-negative, got {sigma_db}")
    return link_power_dbm + rng.normal(0.0, sigma_db)


def estimate_distance(
    mean_rssi_dbm: float, radio: RadioParams, max_distance_m: float
) -> float:
    """Invert free-space path loss at the averaged RSSI.

    Readings stronger than the transmit power are implausible and clamp to
    the 1 cm floor; weak readings clamp to max_distance_m (the plane
    diagonal in the simulator).
    """
    if mean_rssi_dbm > radio.tx_power_dbm:
        return MIN_DISTANCE_M
    reference = SPEED_OF_LIGHT_M_S / (4.0 * math.pi * radio.carrier_frequency_hz)
    d = reference * 10.0 ** ((radio.tx_power_dbm - mean_rssi_dbm) / 20.0)
    return min(max(d, MIN_DISTANCE_M), max_distance_m)


def build_ranging_table(
    samples: Sequence[tuple[NodeId, float]],
    anchor_positions: Mapping[NodeId, Position],
    radio: RadioParams,
    max_distance_m: float,
) -> RangingTable:
    """Group RSSI samples by sender and average them in dBm.

    `samples` must be in decode order; the table keeps anchors in
    first-decoded order, which is the connection order replayed by the
    localization procedure.
    """
    by_anchor: dict[NodeId, list[float]] = {}
    for anchor_id, rssi in samples:  # dict preserves first-seen order
        by_anchor.setdefault(anchor_id, []).append(rssi)

    entries = []
    for anchor_id, values in by_anchor.items():
        mean_rssi = float(np.mean(values))
        entries.append(
            RangingEntry(
                anchor_id=anchor_id,
                anchor_position=anchor_positions[anchor_id],
                mean_rssi_dbm=mean_rssi,
                sample_count=len(values),
                estimated_distance_m=estimate_distance(mean_rssi, radio, max_distance_m),
            )
        )
    return RangingTable(entries=entries)
