"""Simulator and algorithm library for WSN localization by protocol composability."""

from .config import ConfigError, ScenarioConfig
from .deployment import Deployment, deploy, topology_csv
from .energy import EnergyLedger, EnergyParams, charge_node
from .experiment import (
    NodeOutcome,
    ReplicationResult,
    SweepRow,
    composed_average_error,
    node_error,
    replication_csv,
    run_replication,
    run_sweep,
    simulate_network,
    sweep_csv,
)
from .localization import (
    BoundingBoxResult,
    LaterationProblem,
    LaterationSolution,
    LocationArea,
    bounding_box,
    lateration_residuals,
    oracle_lateration,
    solve_lateration,
    sum_squared_residuals,
)
from .mac import AirtimeAccount, BeaconEvent, MacParams, ReceptionLog, beacon_airtime, run_beacon_phase
from .model import (
    ChannelKind,
    Consideration,
    NodeState,
    Position,
    PositionEstimate,
    Protocol,
    ProtocolMode,
    Role,
    rng_stream,
)
from .pme import (
    DEFAULT_REGISTRY,
    ProtocolDescriptor,
    registry_for_mode,
    run_procedure,
    select_protocol,
)
from .propagation import (
    RadioParams,
    ShadowingField,
    is_audible,
    path_loss_free_space,
    received_power,
)
from .ranging import RangingEntry, RangingTable, build_ranging_table, estimate_distance, rssi_sample

__version__ = "0.1.0"
