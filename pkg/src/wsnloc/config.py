"""Full experiment description and its validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .energy import EnergyParams
from .mac import MacParams
from .model import ChannelKind, Consideration, ProtocolMode
from .propagation import RadioParams


class ConfigError(ValueError):
    """A scenario parameter failed validation or parsing."""


@dataclass(frozen=True)
class ScenarioConfig:
    plane_width: float = 100.0
    plane_height: float = 100.0
    node_count: int = 100
    anchor_density: float = 0.3
    radio: RadioParams = field(default_factory=RadioParams)
    mac: MacParams = field(default_factory=MacParams)
    energy_params: EnergyParams = field(default_factory=EnergyParams)
    channel: ChannelKind = ChannelKind.FREE_SPACE
    protocol_mode: ProtocolMode = ProtocolMode.PROCEDURE
    consideration: Consideration = Consideration.ACCURACY_FIRST
    sigma_shadowing_db: float = 6.0
    sigma_rssi_db: float = 2.0
    rng_seed: int = 0

    def validate(self) -> None:
        if self.plane_width <= 0.0 or self.plane_height <= 0.0:
            raise ConfigError(
                f"plane dimensions must be positive, got {self.plane_width}x{self.plane_height}"
            )
        if self.node_count < 1:
            raise ConfigError(f"node_count must be >= 1, got {self.node_count}")
        if not 0.0 <= self.anchor_density <= 1.0:
            raise ConfigError(f"anchor_density must be in [0, 1], got {self.anchor_density}")
        if self.sigma_shadowing_db < 0.0:
            raise ConfigError(f"sigma_shadowing_db must be >= 0, got {self.sigma_shadowing_db}")
        if self.sigma_rssi_db < 0.0:
            raise ConfigError(f"sigma_rssi_db must be >= 0, got {self.sigma_rssi_db}")

    def plane_diagonal(self) -> float:
        return math.hypot(self.plane_width, self.plane_height)
