"""Per-node battery accounting over the beacon phase."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class EnergyParams:
    """Power draw and per-execution costs; mW times seconds gives mJ.

    Lateration is billed a flat 1.961 mJ per execution (the published
    four-anchor RSSI figure); Bounding-Box executions are free. Sleep power
    is carried for configurability but unused: nodes listen whenever not
    transmitting.
    """

    p_tx_mw: float = 24.75
    p_rx_idle_mw: float = 13.5
    p_sleep_mw: float = 0.015
    e_lateration_mj: float = 1.961
    e_bbox_mj: float = 0.0

    def __post_init__(self) -> None:
        for name in ("p_tx_mw", "p_rx_idle_mw", "p_sleep_mw", "e_lateration_mj", "e_bbox_mj"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class EnergyLedger:
    tx_time_s: float
    listen_time_s: float
    lateration_executions: int
    total_mj: float


def charge_node(
    tx_time_s: float,
    phase_duration_s: float,
    lateration_executions: int,
    params: EnergyParams,
) -> EnergyLedger:
    """Bill one node for the phase: transmit + listen + algorithm executions.

    Listening fills whatever part of the phase the node did not spend
    transmitting, so tx_time + listen_time = T.
    """
    if tx_time_s < 0.0 or phase_duration_s < 0.0:
        raise ValueError("times must be non-negative")
    if tx_time_s > phase_duration_s:
        raise ValueError(
            f"tx_time {tx_time_s} s exceeds the phase duration {phase_duration_s} s"
        )
    if lateration_executions < 0:
        raise ValueError("lateration_executions must be non-negative")
    listen = phase_duration_s - tx_time_s
    total = (
        params.p_tx_mw * tx_time_s
        + params.p_rx_idle_mw * listen
        + params.e_lateration_mj * lateration_executions
    )
    return EnergyLedger(
        tx_time_s=tx_time_s,
        listen_time_s=listen,
        lateration_executions=lateration_executions,
        total_mj=total,
    )
