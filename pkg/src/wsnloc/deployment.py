"""Random uniform node placement and anchor role assignment."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .model import NodeId, NodeState, Position, Role


@dataclass
class Deployment:
    nodes: list[NodeState]
    anchor_count: int
    plane_width: float
    plane_height: float

    @property
    def anchor_ids(self) -> list[NodeId]:
        return [node.id for node in self.nodes if node.role is Role.ANCHOR]

    def positions(self) -> np.ndarray:
        return np.array([[n.true_position.x, n.true_position.y] for n in self.nodes])


def anchor_count_for(anchor_density: float, node_count: int) -> int:
    """ceil(density * count), with rounding guarded against float dust."""
    if not 0.0 <= anchor_density <= 1.0:
        raise ValueError(f"anchor_density must be in [0, 1], got {anchor_density}")
    return math.ceil(round(anchor_density * node_count, 9))


def deploy(config: ScenarioConfig, rng: np.random.Generator) -> Deployment:
    """i.i.d. uniform positions on the plane; anchors sampled without replacement."""
    if config.node_count < 1:
        raise ValueError(f"node_count must be >= 1, got {config.node_count}")
    n = config.node_count
    k = anchor_count_for(config.anchor_density, n)

    coords = rng.random((n, 2)) * np.array([config.plane_width, config.plane_height])
    anchor_set = set(int(i) for i in rng.choice(n, size=k, replace=False)) if k else set()

    nodes = [
        NodeState(
            id=i,
            role=Role.ANCHOR if i in anchor_set else Role.UNKNOWN,
            true_position=Position(float(coords[i, 0]), float(coords[i, 1])),
        )
        for i in range(n)
    ]
    return Deployment(
        nodes=nodes,
        anchor_count=k,
        plane_width=config.plane_width,
        plane_height=config.plane_height,
    )


def topology_csv(deployment: Deployment) -> str:
    """CSV serialization used by the dump-topology command."""
    lines = ["node_id,role,x,y"]
    for node in deployment.nodes:
        lines.append(
            f"{node.id},{node.role.value},{node.true_position.x:.6f},{node.true_position.y:.6f}"
        )
    return "\n".join(lines) + "\n"
