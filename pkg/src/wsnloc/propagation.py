"""Received-power models: free-space path loss and per-pair shadowing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ChannelKind, Position

SPEED_OF_LIGHT_M_S = 299792458.0


def path_loss_free_space(distance_m: float, frequency_hz: float) -> float:
    """Free-space (Friis) path loss in dB: 20*log10(4*pi*d*f/c).

    Strictly increasing in distance; rejects d <= 0 (singularity at the
    antenna).
    """
    if distance_m <= 0.0:
        raise ValueError(f"path loss undefined for distance {distance_m} m")
    if frequency_hz <= 0.0:
        raise ValueError(f"carrier frequency must be positive, got {frequency_hz}")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / SPEED_OF_LIGHT_M_S)


@dataclass(frozen=True)
class RadioParams:
    """Radio hardware parameters.

    The default reception threshold is calibrated so that the free-space
    communication range equals `nominal_range_m` (the shipped `table2-raw`
    preset instead uses the -148 dBm datasheet threshold, which yields full
    connectivity on a 100 m plane). The carrier-sense threshold defaults to
    the reception threshold.
    """

    tx_power_dbm: float = 0.0
    data_rate_bps: float = 19200.0
    carrier_frequency_hz: float = 916e6
    nominal_range_m: float = 30.0
    reception_threshold_dbm: Optional[float] = None
    carrier_sense_threshold_dbm: Optional[float] = None

    def __post_init__(self) -> None:
        if self.nominal_range_m <= 0.0:
            raise ValueError(f"nominal_range_m must be positive, got {self.nominal_range_m}")
        if self.data_rate_bps <= 0.0:
            raise ValueError(f"data_rate_bps must be positive, got {self.data_rate_bps}")
        if self.carrier_frequency_hz <= 0.0:
            raise ValueError(f"carrier_frequency_hz must be positive, got {self.carrier_frequency_hz}")
        if self.reception_threshold_dbm is None:
            derived = self.tx_power_dbm - path_loss_free_space(
                self.nominal_range_m, self.carrier_frequency_hz
            )
            object.__setattr__(self, "reception_threshold_dbm", derived)
        if self.carrier_sense_threshold_dbm is None:
            object.__setattr__(self, "carrier_sense_threshold_dbm", self.reception_threshold_dbm)
        if self.reception_threshold_dbm > self.tx_power_dbm:
            raise ValueError(
                "reception_threshold_dbm must not exceed tx_power_dbm "
                f"({self.reception_threshold_dbm} > {self.tx_power_dbm})"
            )

    @classmethod
    def table2_raw(cls, **overrides: float) -> "RadioParams":
        """Datasheet preset: -148 dBm reception and carrier-sense thresholds."""
        kwargs: dict = {
            "reception_threshold_dbm": -148.0,
            "carrier_sense_threshold_dbm": -148.0,
        }
        kwargs.update(overrides)
        return cls(**kwargs)


class ShadowingField:
    """Per-pair losses of the time-invariant symmetrical shadowing model.

    One zero-mean normal draw per unordered node pair, constant for the
    whole replication; loss(i, j) == loss(j, i) by construction.
    """

    def __init__(self, loss_db: np.ndarray):
        loss_db = np.asarray(loss_db, dtype=float)
        if loss_db.ndim != 2 or loss_db.shape[0] != loss_db.shape[1]:
            raise ValueError("shadowing losses must form a square matrix")
        if not np.array_equal(loss_db, loss_db.T):
            raise ValueError("shadowing losses must be symmetric")
        self._loss_db = loss_db

    @classmethod
    def build(cls, node_count: int, sigma_db: float, rng: np.random.Generator) -> "ShadowingField":
        if sigma_db < 0.0:
            raise ValueError(f"sigma_db must be non-negative, got {sigma_db}")
        n = node_count
        loss = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        draws = rng.normal(0.0, sigma_db, size=len(iu[0]))
        loss[iu] = draws
        loss[(iu[1], iu[0])] = draws
        return cls(loss)

    @property
    def node_count(self) -> int:
        return self._loss_db.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._loss_db

    def loss(self, i: int, j: int) -> float:
        if i == j:
            raise ValueError("shadowing loss undefined for a node with itself")
        return float(self._loss_db[i, j])


def received_power(
    sender: Position,
    receiver: Position,
    channel: ChannelKind,
    radio: RadioParams,
    shadow: Optional[ShadowingField] = None,
    sender_id: Optional[int] = None,
    receiver_id: Optional[int] = None,
) -> float:
    """Received power in dBm over one directed link.

    Under shadowing the per-pair loss is looked up by node ids, so both ids
    and the field must be supplied.
    """
    d = sender.distance_to(receiver)
    if d == 0.0:
        raise ValueError("received power undefined for coincident positions")
    power = radio.tx_power_dbm - path_loss_free_space(d, radio.carrier_frequency_hz)
    if channel is ChannelKind.SHADOWING:
        if shadow is None or sender_id is None or receiver_id is None:
            raise ValueError("shadowing channel requires a ShadowingField and node ids")
        power -= shadow.loss(sender_id, receiver_id)
    return power


def is_audible(power_dbm: float, radio: RadioParams) -> bool:
    """A link is audible when its power reaches the reception threshold."""
    return power_dbm >= radio.reception_threshold_dbm


def link_power_matrix(
    positions: np.ndarray,
    channel: ChannelKind,
    radio: RadioParams,
    shadow: Optional[ShadowingField] = None,
) -> np.ndarray:
    """(n, n) matrix of received power in dBm; the diagonal is NaN.

    Coincident distinct nodes get +inf power (zero distance limit).
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    delta = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(delta[..., 0], delta[..., 1])
    scale = 4.0 * math.pi * radio.carrier_frequency_hz / SPEED_OF_LIGHT_M_S
    with np.errstate(divide="ignore"):
        loss = 20.0 * np.log10(dist * scale)
    power = radio.tx_power_dbm - loss
    if channel is ChannelKind.SHADOWING:
        if shadow is None or shadow.node_count != n:
            raise ValueError("shadowing channel requires a matching ShadowingField")
        power = power - shadow.matrix
    np.fill_diagonal(power, np.nan)
    return power
