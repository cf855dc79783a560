"""Beacon phase: airtime, contention, collisions, determinism."""
import numpy as np
import pytest

from wsnloc import MacParams, RadioParams, ScenarioConfig, beacon_airtime, rng_stream
from wsnloc.deployment import Deployment, deploy
from wsnloc.mac import run_beacon_phase
from wsnloc.model import ChannelKind, NodeState, Position, Role

PL_10M = 51.685692695240384


class FixedBackoffs:
    """Duck-typed stand-in for the generator: scripted backoff draws."""

    def __init__(self, per_anchor):
        self.per_anchor = per_anchor

    def integers(self, low, high, size):
        anchors, beacons = size
        out = np.zeros(size, dtype=np.int64)
        for i in range(anchors):
            out[i, :] = self.per_anchor[i]
        return out


def two_node_deployment(d: float) -> Deployment:
    nodes = [
        NodeState(0, Role.ANCHOR, Position(0.0, 0.0)),
        NodeState(1, Role.UNKNOWN, Position(d, 0.0)),
    ]
    return Deployment(nodes=nodes, anchor_count=1, plane_width=100.0, plane_height=100.0)


def test_beacon_airtime_at_defaults():
    assert beacon_airtime(MacParams(), RadioParams()) == pytest.approx(0.02125, abs=1e-12)


def test_beacon_airtime_of_empty_frame_is_zero():
    mac = MacParams(header_bytes=0, beacon_payload_bytes=0)
    assert beacon_airtime(mac, RadioParams()) == 0.0


def test_beacon_airtime_halves_when_rate_doubles():
    base = beacon_airtime(MacParams(), RadioParams())
    fast = beacon_airtime(MacParams(), RadioParams(data_rate_bps=2 * 19200.0))
    assert fast == pytest.approx(base / 2.0, abs=1e-15)


def test_single_sender_delivers_every_beacon():
    dep = two_node_deployment(10.0)
    log, airtime = run_beacon_phase(
        dep, ChannelKind.FREE_SPACE, None, RadioParams(), MacParams(), rng_stream(0, "mac")
    )
    received = log.for_node(1)
    assert len(received) == 10
    for beacon in received:
        assert beacon.sender == 0
        assert beacon.rssi_dbm == pytest.approx(-PL_10M, abs=1e-9)
    assert log.for_node(0) == []  # a receiver never logs its own transmissions
    assert airtime.tx_time(0) == pytest.approx(10 * 0.02125, abs=1e-12)
    assert airtime.tx_time(1) == 0.0
    assert airtime.phase_duration_s == pytest.approx(10.0, abs=1e-9)


def test_identical_backoffs_cause_full_overlap_collisions():
    nodes = [
        NodeState(0, Role.ANCHOR, Position(0.0, 0.0)),
        NodeState(1, Role.ANCHOR, Position(20.0, 0.0)),
        NodeState(2, Role.UNKNOWN, Position(10.0, 0.0)),
    ]
    dep = Deployment(nodes=nodes, anchor_count=2, plane_width=100.0, plane_height=100.0)
    log, _ = run_beacon_phase(
        dep, ChannelKind.FREE_SPACE, None, RadioParams(), MacParams(),
        FixedBackoffs([0, 0]),
    )
    assert log.entries == {}


def test_carrier_sensing_serializes_staggered_backoffs():
    nodes = [
        NodeState(0, Role.ANCHOR, Position(0.0, 0.0)),
        NodeState(1, Role.ANCHOR, Position(5.0, 0.0)),
        NodeState(2, Role.UNKNOWN, Position(2.5, 5.0)),
    ]
    dep = Deployment(nodes=nodes, anchor_count=2, plane_width=100.0, plane_height=100.0)
    log, _ = run_beacon_phase(
        dep, ChannelKind.FREE_SPACE, None, RadioParams(), MacParams(),
        FixedBackoffs([0, 1]),  # anchor 1's slot lands inside anchor 0's airtime
    )
    received = log.for_node(2)
    assert len(received) == 20
    assert sum(1 for b in received if b.sender == 0) == 10
    assert sum(1 for b in received if b.sender == 1) == 10
    # Anchors also hear each other once the deferral resolves the overlap.
    assert len(log.for_node(0)) == 10
    assert len(log.for_node(1)) == 10


def test_no_anchors_yields_an_empty_log():
    nodes = [NodeState(0, Role.UNKNOWN, Position(1.0, 1.0))]
    dep = Deployment(nodes=nodes, anchor_count=0, plane_width=100.0, plane_height=100.0)
    log, airtime = run_beacon_phase(
        dep, ChannelKind.FREE_SPACE, None, RadioParams(), MacParams(), rng_stream(0, "mac")
    )
    assert log.entries == {}
    assert airtime.phase_duration_s == pytest.approx(10.0)


def test_out_of_range_receiver_hears_nothing():
    dep = two_node_deployment(31.0)
    log, _ = run_beacon_phase(
        dep, ChannelKind.FREE_SPACE, None, RadioParams(), MacParams(), rng_stream(0, "mac")
    )
    assert log.for_node(1) == []


def test_phase_is_deterministic_for_a_seed():
    cfg = ScenarioConfig(node_count=40, anchor_density=0.5, rng_seed=3)
    dep = deploy(cfg, rng_stream(3, "deploy"))
    logs = []
    for _ in range(2):
        log, _ = run_beacon_phase(
            dep, ChannelKind.FREE_SPACE, None, cfg.radio, cfg.mac, rng_stream(3, "mac")
        )
        logs.append(log)
    assert logs[0] == logs[1]


def test_decode_order_is_chronological():
    cfg = ScenarioConfig(node_count=40, anchor_density=0.6, rng_seed=8)
    dep = deploy(cfg, rng_stream(8, "deploy"))
    log, _ = run_beacon_phase(
        dep, ChannelKind.FREE_SPACE, None, cfg.radio, cfg.mac, rng_stream(8, "mac")
    )
    saw_any = False
    for entries in log.entries.values():
        saw_any = saw_any or bool(entries)
        times = [e.decoded_at for e in entries]
        assert times == sorted(times)
    assert saw_any


def test_trace_records_transmissions_and_decodes():
    dep = two_node_deployment(10.0)
    trace: list = []
    run_beacon_phase(
        dep, ChannelKind.FREE_SPACE, None, RadioParams(), MacParams(),
        rng_stream(0, "mac"), trace=trace,
    )
    kinds = {kind for _, kind, _, _ in trace}
    assert "tx-start" in kinds
    assert "decode" in kinds
