"""Beacon broadcasting over simplified non-persistent CSMA/CA.

Every anchor attempts `beacons_per_anchor` broadcasts at nominal times
k * beacon_interval. Each attempt draws one uniform backoff in
{0, .., contention_window-1} slots and then senses the channel: while any
transmission audible to the sender (at or above the carrier-sense
threshold) is in progress, the attempt is re-scheduled to the end of the
sensed busy period plus the same backoff. There are no retransmissions and
no acknowledgements; broadcasts are one-to-many.

A receiver decodes a beacon iff the beacon is audible at the receiver and
no other transmission audible there (including the receiver's own) overlaps
any part of its airtime -- no capture effect.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .model import ChannelKind, NodeId, Role
from .propagation import RadioParams, ShadowingField, link_power_matrix

if TYPE_CHECKING:
    from .deployment import Deployment


@dataclass(frozen=True)
class MacParams:
    header_bytes: int = 11
    beacon_payload_bytes: int = 40
    contention_window: int = 128
    slot_time_s: float = 417e-6
    beacons_per_anchor: int = 10
    beacon_interval_s: float = 1.0

    def __post_init__(self) -> None:
        if self.contention_window < 1:
            raise ValueError(f"contention_window must be >= 1, got {self.contention_window}")
        if self.slot_time_s <= 0.0 or self.beacon_interval_s <= 0.0:
            raise ValueError("slot_time_s and beacon_interval_s must be positive")
        if self.header_bytes < 0 or self.beacon_payload_bytes < 0:
            raise ValueError("frame sizes must be non-negative")
        if self.beacons_per_anchor < 0:
            raise ValueError(f"beacons_per_anchor must be >= 0, got {self.beacons_per_anchor}")


@dataclass(frozen=True)
class BeaconEvent:
    """One completed beacon transmission on the air."""

    sender: NodeId
    attempt: int
    start: float
    end: float


@dataclass(frozen=True)
class ReceivedBeacon:
    """One successfully decoded beacon at a receiver."""

    sender: NodeId
    rssi_dbm: float
    decoded_at: float


@dataclass
class ReceptionLog:
    """Per-receiver decoded beacons in chronological (decode-time) order."""

    entries: dict[NodeId, list[ReceivedBeacon]] = field(default_factory=dict)

    def for_node(self, node_id: NodeId) -> list[ReceivedBeacon]:
        return self.entries.get(node_id, [])


@dataclass(frozen=True)
class AirtimeAccount:
    """Per-node transmit seconds and the total phase duration T."""

    phase_duration_s: float
    tx_time_s: dict[NodeId, float]

    def tx_time(self, node_id: NodeId) -> float:
        return self.tx_time_s.get(node_id, 0.0)


def beacon_airtime(mac: MacParams, radio: RadioParams) -> float:
    """Seconds on air for one beacon frame (header + payload)."""
    bits = (mac.header_bytes + mac.beacon_payload_bytes) * 8
    return bits / radio.data_rate_bps


def run_beacon_phase(
    deployment: "Deployment",
    channel: ChannelKind,
    shadow: Optional[ShadowingField],
    radio: RadioParams,
    mac: MacParams,
    rng: np.random.Generator,
    trace: Optional[list] = None,
) -> tuple[ReceptionLog, AirtimeAccount]:
    """Simulate the beacon phase, returning decodes and airtime accounting.

    Deterministic for a given stream: simultaneous events are processed in
    (time, sender id, attempt) order, and sensing cannot detect a
    transmission that starts at the very same instant (which is how two
    anchors with identical backoff draws end up colliding).
    """
    nodes = deployment.nodes
    n = len(nodes)
    positions = np.array([[node.true_position.x, node.true_position.y] for node in nodes])
    power = link_power_matrix(positions, channel, radio, shadow)
    anchor_ids = [node.id for node in nodes if node.role is Role.ANCHOR]

    airtime = beacon_airtime(mac, radio)
    nominal_end = mac.beacons_per_anchor * mac.beacon_interval_s

    transmissions: list[BeaconEvent] = []
    if anchor_ids and mac.beacons_per_anchor > 0 and airtime > 0.0:
        transmissions = _contend(anchor_ids, power, radio, mac, rng, airtime, trace)

    phase_duration = nominal_end
    if transmissions:
        phase_duration = max(phase_duration, max(tx.end for tx in transmissions))

    log = _decode(transmissions, power, radio, n, trace)
    tx_time = {a: len([t for t in transmissions if t.sender == a]) * airtime for a in anchor_ids}
    return log, AirtimeAccount(phase_duration_s=phase_duration, tx_time_s=tx_time)


def _contend(
    anchor_ids: list[NodeId],
    power: np.ndarray,
    radio: RadioParams,
    mac: MacParams,
    rng: np.random.Generator,
    airtime: float,
    trace: Optional[list],
) -> list[BeaconEvent]:
    """Run the CSMA contention loop; returns transmissions in start order."""
    slot = mac.slot_time_s
    interval = mac.beacon_interval_s
    beacons = mac.beacons_per_anchor
    cs = power >= radio.carrier_sense_threshold_dbm  # [sender, listener] audible for sensing

    # One draw per (anchor, attempt), in fixed order so the schedule of the
    # stream does not depend on event interleaving.
    backoffs = rng.integers(0, mac.contention_window, size=(len(anchor_ids), beacons))
    anchor_index = {a: i for i, a in enumerate(anchor_ids)}

    heap: list[tuple[float, NodeId, int]] = []
    for i, a in enumerate(anchor_ids):
        heapq.heappush(heap, (backoffs[i, 0] * slot, a, 0))

    active: list[BeaconEvent] = []
    out: list[BeaconEvent] = []
    while heap:
        t, node, attempt = heapq.heappop(heap)
        active = [tx for tx in active if tx.end > t]
        busy_end = None
        for tx in active:
            # A transmission starting exactly at t is invisible to sensing.
            if tx.start < t and (tx.sender == node or cs[tx.sender, node]):
                busy_end = tx.end if busy_end is None else max(busy_end, tx.end)
        if busy_end is not None:
            retry = busy_end + backoffs[anchor_index[node], attempt] * slot
            if trace is not None:
                trace.append((t, "defer", node, None))
            heapq.heappush(heap, (retry, node, attempt))
            continue

        tx = BeaconEvent(sender=node, attempt=attempt, start=t, end=t + airtime)
        active.append(tx)
        out.append(tx)
        if trace is not None:
            trace.append((t, "tx-start", node, None))
        if attempt + 1 < beacons:
            activation = max((attempt + 1) * interval, tx.end)
            try_at = activation + backoffs[anchor_index[node], attempt + 1] * slot
            heapq.heappush(heap, (try_at, node, attempt + 1))
    return out


def _decode(
    transmissions: list[BeaconEvent],
    power: np.ndarray,
    radio: RadioParams,
    node_count: int,
    trace: Optional[list],
) -> ReceptionLog:
    log = ReceptionLog()
    if not transmissions:
        return log
    starts = np.array([tx.start for tx in transmissions])
    ends = np.array([tx.end for tx in transmissions])
    senders = np.array([tx.sender for tx in transmissions])

    # Open-interval overlap: touching endpoints do not interfere.
    overlap = (starts[None, :] < ends[:, None]) & (starts[:, None] < ends[None, :])
    np.fill_diagonal(overlap, False)

    with np.errstate(invalid="ignore"):
        audible = power[senders, :] >= radio.reception_threshold_dbm  # (txs, receivers)

    node_range = np.arange(node_count)
    for i, tx in enumerate(transmissions):
        candidates = audible[i].copy()
        candidates[tx.sender] = False
        if not candidates.any():
            continue
        others = np.nonzero(overlap[i])[0]
        if others.size:
            interference = audible[others].any(axis=0)
            interference[senders[others]] = True  # a node cannot receive while transmitting
            candidates &= ~interference
        for receiver in node_range[candidates]:
            rec = ReceivedBeacon(
                sender=int(tx.sender),
                rssi_dbm=float(power[tx.sender, receiver]),
                decoded_at=tx.end,
            )
            log.entries.setdefault(int(receiver), []).append(rec)
            if trace is not None:
                trace.append((tx.end, "decode", int(tx.sender), int(receiver)))
    return log
