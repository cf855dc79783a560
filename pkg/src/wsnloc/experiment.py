"""Monte-Carlo harness: replications, density sweeps, 99% CIs, CSV rows."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from multiprocessing import Pool
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .config import ScenarioConfig
from .deployment import Deployment, deploy
from .energy import charge_node
from .mac import AirtimeAccount, run_beacon_phase
from .model import (
    ChannelKind,
    NodeId,
    Position,
    PositionEstimate,
    Protocol,
    ProtocolMode,
    Role,
    rng_stream,
    validate_node_states,
)
from .pme import registry_for_mode, run_procedure
from .propagation import ShadowingField
from .ranging import RangingTable, build_ranging_table

SWEEP_CSV_HEADER = (
    "channel,mode,density,reps,mean_anchors,ci_anchors,located_frac,ci_located,"
    "mean_energy_mj,ci_energy,mean_error_m,ci_error,n_lateration,n_bbox"
)

RUN_CSV_HEADER = (
    "node_id,role,x,y,anchors_connected,located,protocol,est_x,est_y,error_m,energy_mj"
)

CONFIDENCE_LEVEL = 0.99


def node_error(estimate: Position, truth: Position) -> float:
    """Straight-line distance in meters between estimate and ground truth."""
    return estimate.distance_to(truth)


def composed_average_error(e_lat: float, n_lat: int, e_bbox: float, n_bbox: int) -> float:
    """Weighted mean error over nodes finishing on either protocol."""
    if n_lat < 0 or n_bbox < 0:
        raise ValueError("node counts must be non-negative")
    total = n_lat + n_bbox
    if total == 0:
        raise ValueError("average error undefined with no located nodes")
    return (e_lat * n_lat + e_bbox * n_bbox) / total


@dataclass(frozen=True)
class NodeOutcome:
    node_id: NodeId
    role: Role
    true_position: Position
    anchors_connected: int
    estimate: Optional[PositionEstimate]
    error_m: Optional[float]
    energy_mj: float
    lateration_executions: int

    @property
    def located(self) -> bool:
        return self.estimate is not None

    @property
    def protocol(self) -> Optional[Protocol]:
        return self.estimate.protocol if self.estimate else None


@dataclass
class ReplicationResult:
    channel: ChannelKind
    mode: ProtocolMode
    density: float
    seed: int
    replication_index: int
    phase_duration_s: float
    outcomes: list[NodeOutcome]

    def located_fraction(self) -> float:
        return sum(1 for o in self.outcomes if o.located) / len(self.outcomes)

    def mean_anchors_connected(self) -> float:
        return float(np.mean([o.anchors_connected for o in self.outcomes]))

    def mean_energy_mj(self) -> float:
        return float(np.mean([o.energy_mj for o in self.outcomes]))

    def protocol_count(self, protocol: Protocol) -> int:
        return sum(1 for o in self.outcomes if o.protocol is protocol)

    def protocol_mean_error(self, protocol: Protocol) -> float:
        errors = [o.error_m for o in self.outcomes if o.protocol is protocol]
        return float(np.mean(errors)) if errors else 0.0

    def mean_error_m(self) -> Optional[float]:
        """Per-replication average error via the composed weighted mean."""
        n_lat = self.protocol_count(Protocol.LATERATION)
        n_bbox = self.protocol_count(Protocol.BOUNDING_BOX)
        if n_lat + n_bbox == 0:
            return None
        return composed_average_error(
            self.protocol_mean_error(Protocol.LATERATION),
            n_lat,
            self.protocol_mean_error(Protocol.BOUNDING_BOX),
            n_bbox,
        )


@dataclass
class NetworkRealization:
    """Mode-independent outcome of one seeded network: who decoded what."""

    deployment: Deployment
    airtime: AirtimeAccount
    tables: dict[NodeId, RangingTable]


def simulate_network(config: ScenarioConfig, replication_index: int = 0) -> NetworkRealization:
    """Deploy, run the beacon phase, and build noisy ranging tables.

    Stream labels keep deployment, shadowing, MAC backoff and RSSI noise
    independent; the per-replication seed is rng_seed + replication_index so
    replications are reproducible out of order and paired across modes.
    """
    config.validate()
    seed = config.rng_seed + replication_index
    deployment = deploy(config, rng_stream(seed, "deploy"))
    shadow = None
    if config.channel is ChannelKind.SHADOWING:
        shadow = ShadowingField.build(
            config.node_count, config.sigma_shadowing_db, rng_stream(seed, "shadowing")
        )
    log, airtime = run_beacon_phase(
        deployment, config.channel, shadow, config.radio, config.mac, rng_stream(seed, "mac")
    )

    positions = {node.id: node.true_position for node in deployment.nodes}
    diagonal = config.plane_diagonal()
    rssi_rng = rng_stream(seed, "rssi")
    tables: dict[NodeId, RangingTable] = {}
    for node in deployment.nodes:  # id order fixes the noise-draw order
        entries = log.for_node(node.id)
        # One vectorized draw per node, bit-identical to per-sample calls.
        noise = rssi_rng.normal(0.0, config.sigma_rssi_db, size=len(entries))
        noisy = [
            (entry.sender, entry.rssi_dbm + float(nz)) for entry, nz in zip(entries, noise)
        ]
        tables[node.id] = build_ranging_table(noisy, positions, config.radio, diagonal)
    return NetworkRealization(deployment=deployment, airtime=airtime, tables=tables)


def evaluate_mode(
    realization: NetworkRealization,
    mode: ProtocolMode,
    config: ScenarioConfig,
    replication_index: int = 0,
    solver_caches: Optional[dict[NodeId, dict]] = None,
    update_states: bool = False,
) -> ReplicationResult:
    """Run the per-node procedure for one protocol mode over a realization.

    Estimation is measured for every node regardless of role (at 100%
    density all nodes are anchors and still use neighbors' beacons), but
    only unknown nodes ever store the estimate in their NodeState.
    """
    registry = registry_for_mode(mode)
    plane = (config.plane_width, config.plane_height)
    params = config.energy_params
    outcomes: list[NodeOutcome] = []
    for node in realization.deployment.nodes:
        table = realization.tables[node.id]
        cache = solver_caches.setdefault(node.id, {}) if solver_caches is not None else None
        result = run_procedure(
            table,
            config.consideration,
            registry,
            plane,
            config.radio.nominal_range_m,
            solver_cache=cache,
        )
        ledger = charge_node(
            realization.airtime.tx_time(node.id),
            realization.airtime.phase_duration_s,
            result.executions[Protocol.LATERATION],
            params,
        )
        error = (
            node_error(result.estimate.position, node.true_position)
            if result.estimate is not None
            else None
        )
        outcomes.append(
            NodeOutcome(
                node_id=node.id,
                role=node.role,
                true_position=node.true_position,
                anchors_connected=len(table),
                estimate=result.estimate,
                error_m=error,
                energy_mj=ledger.total_mj,
                lateration_executions=result.executions[Protocol.LATERATION],
            )
        )
        if update_states:
            node.ranging_table = table
            node.energy = ledger
            if node.role is Role.UNKNOWN:
                node.estimate = result.estimate
    if update_states:
        validate_node_states(realization.deployment.nodes)
    _validate_outcomes(outcomes)
    return ReplicationResult(
        channel=config.channel,
        mode=mode,
        density=config.anchor_density,
        seed=config.rng_seed,
        replication_index=replication_index,
        phase_duration_s=realization.airtime.phase_duration_s,
        outcomes=outcomes,
    )


def _validate_outcomes(outcomes: list[NodeOutcome]) -> None:
    for o in outcomes:
        if o.located != (o.error_m is not None):
            raise AssertionError("error must be present exactly for located nodes")
        if o.located and o.anchors_connected < 1:
            raise AssertionError("located nodes must have at least one connection")


def run_replication(config: ScenarioConfig, replication_index: int = 0) -> ReplicationResult:
    realization = simulate_network(config, replication_index)
    return evaluate_mode(
        realization, config.protocol_mode, config, replication_index, update_states=True
    )


@dataclass(frozen=True)
class RepMetrics:
    mean_anchors: float
    located_fraction: float
    mean_energy_mj: float
    mean_error_m: Optional[float]
    n_lateration: int
    n_bbox: int


def _metrics(result: ReplicationResult) -> RepMetrics:
    return RepMetrics(
        mean_anchors=result.mean_anchors_connected(),
        located_fraction=result.located_fraction(),
        mean_energy_mj=result.mean_energy_mj(),
        mean_error_m=result.mean_error_m(),
        n_lateration=result.protocol_count(Protocol.LATERATION),
        n_bbox=result.protocol_count(Protocol.BOUNDING_BOX),
    )


def _simulate_task(
    args: tuple[ScenarioConfig, ChannelKind, float, int, tuple[ProtocolMode, ...]],
) -> dict[ProtocolMode, RepMetrics]:
    base, channel, density, rep, modes = args
    config = replace(base, channel=channel, anchor_density=density)
    realization = simulate_network(config, rep)
    caches: dict[NodeId, dict] = {}
    return {
        mode: _metrics(evaluate_mode(realization, mode, config, rep, solver_caches=caches))
        for mode in modes
    }


@dataclass(frozen=True)
class SweepRow:
    channel: ChannelKind
    mode: ProtocolMode
    density: float
    reps: int
    mean_anchors: float
    ci_anchors: float
    located_frac: float
    ci_located: float
    mean_energy_mj: float
    ci_energy: float
    mean_error_m: Optional[float]
    ci_error: Optional[float]
    n_lateration: float
    n_bbox: float


def _ci_halfwidth(values: np.ndarray) -> float:
    """99% two-sided Student-t half width over per-replication means."""
    n = len(values)
    if n < 2:
        return 0.0
    t = stats.t.ppf(1.0 - (1.0 - CONFIDENCE_LEVEL) / 2.0, df=n - 1)
    return float(t * np.std(values, ddof=1) / math.sqrt(n))


def run_sweep(
    config: ScenarioConfig,
    densities: Sequence[float],
    replications: int,
    modes: Optional[Sequence[ProtocolMode]] = None,
    channels: Optional[Sequence[ChannelKind]] = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Run the full factorial sweep and aggregate 99% confidence intervals.

    Replication r of every (channel, density) cell uses seed rng_seed + r for
    all modes, so mode comparisons are paired. Aggregation folds in a fixed
    order regardless of worker count.
    """
    if replications < 2:
        raise ValueError("sweep needs at least 2 replications for confidence intervals")
    modes = tuple(modes) if modes is not None else tuple(ProtocolMode)
    channels = tuple(channels) if channels is not None else tuple(ChannelKind)

    tasks = [
        (config, channel, density, rep, modes)
        for channel in channels
        for density in densities
        for rep in range(replications)
    ]
    if jobs > 1:
        with Pool(processes=jobs) as pool:
            results = pool.map(_simulate_task, tasks, chunksize=4)
    else:
        results = [_simulate_task(task) for task in tasks]

    rows: list[SweepRow] = []
    index = 0
    for channel in channels:
        for density in densities:
            per_mode: dict[ProtocolMode, list[RepMetrics]] = {m: [] for m in modes}
            for _ in range(replications):
                for mode in modes:
                    per_mode[mode].append(results[index][mode])
                index += 1
            for mode in modes:
                rows.append(_aggregate(channel, mode, density, per_mode[mode]))
    rows.sort(key=lambda r: (r.channel.value, r.mode.value, r.density))
    return rows


def _aggregate(
    channel: ChannelKind, mode: ProtocolMode, density: float, metrics: list[RepMetrics]
) -> SweepRow:
    anchors = np.array([m.mean_anchors for m in metrics])
    located = np.array([m.located_fraction for m in metrics])
    energy = np.array([m.mean_energy_mj for m in metrics])
    errors = np.array([m.mean_error_m for m in metrics if m.mean_error_m is not None])
    mean_error = float(np.mean(errors)) if errors.size else None
    ci_error = _ci_halfwidth(errors) if errors.size >= 2 else None
    return SweepRow(
        channel=channel,
        mode=mode,
        density=density,
        reps=len(metrics),
        mean_anchors=float(np.mean(anchors)),
        ci_anchors=_ci_halfwidth(anchors),
        located_frac=float(np.mean(located)),
        ci_located=_ci_halfwidth(located),
        mean_energy_mj=float(np.mean(energy)),
        ci_energy=_ci_halfwidth(energy),
        mean_error_m=mean_error,
        ci_error=ci_error,
        n_lateration=float(np.mean([m.n_lateration for m in metrics])),
        n_bbox=float(np.mean([m.n_bbox for m in metrics])),
    )


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.channel.value,
                    r.mode.value,
                    f"{r.density:g}",
                    str(r.reps),
                    _fmt(r.mean_anchors),
                    _fmt(r.ci_anchors),
                    _fmt(r.located_frac),
                    _fmt(r.ci_located),
                    _fmt(r.mean_energy_mj),
                    _fmt(r.ci_energy),
                    _fmt(r.mean_error_m),
                    _fmt(r.ci_error),
                    _fmt(r.n_lateration),
                    _fmt(r.n_bbox),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def replication_csv(result: ReplicationResult) -> str:
    """Per-node CSV for the `run` command."""
    lines = [RUN_CSV_HEADER]
    for o in result.outcomes:
        est = o.estimate
        lines.append(
            ",".join(
                [
                    str(o.node_id),
                    o.role.value,
                    f"{o.true_position.x:.6f}",
                    f"{o.true_position.y:.6f}",
                    str(o.anchors_connected),
                    "true" if o.located else "false",
                    est.protocol.value if est else "",
                    f"{est.position.x:.6f}" if est else "",
                    f"{est.position.y:.6f}" if est else "",
                    _fmt(o.error_m),
                    f"{o.energy_mj:.6f}",
                ]
            )
        )
    return "\n".join(lines) + "\n"
