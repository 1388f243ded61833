"""Symbiotic radio devices and the geometry helpers shared by every layer."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SATELLITE_DELAY_S = 1.7e-3


class NodeKind(enum.Enum):
    BASE_STATION = "bs"
    UAV = "uav"
    GROUND = "ground"
    SATELLITE = "satellite"


class Behavior(enum.Enum):
    HONEST = "honest"
    FAULT = "fault"
    BYZANTINE = "byzantine"


@dataclass
class SrdNode:
    id: int
    kind: NodeKind
    position: tuple[float, float, float]
    behavior: Behavior = Behavior.HONEST
    energy_spent: float = 0.0
    balance: int = 0
    reputation: float = 0.5
    activity: int = 0
    coverage_radius: float = 200.0
    # mobility anchors; ground nodes wander around home, UAVs circle it
    home: tuple[float, float, float] | None = None
    phase: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.reputation <= 1.0:
            raise ValueError("reputation must lie in [0, 1]")
        if self.energy_spent < 0:
            raise ValueError("energy_spent must be non-negative")
        if self.home is None:
            self.home = tuple(self.position)

    @property
    def is_bs(self) -> bool:
        return self.kind is NodeKind.BASE_STATION

    @property
    def honest(self) -> bool:
        return self.behavior is Behavior.HONEST

    def charge(self, joules: float) -> None:
        if joules < 0:
            raise ValueError("energy charges are non-negative")
        self.energy_spent += joules


def distance(a, b) -> float:
    pa = a.position if hasattr(a, "position") else a
    pb = b.position if hasattr(b, "position") else b
    return math.dist(pa, pb)


def distance_matrix(nodes) -> np.ndarray:
    pos = np.array([n.position for n in nodes], dtype=float).reshape(len(nodes), 3)
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def propagation_matrix(nodes, prop_speed: float, satellite_delay: float = SATELLITE_DELAY_S) -> np.ndarray:
    """One-way propagation delay (s); any link touching a satellite takes the fixed orbit delay."""
    delay = distance_matrix(nodes) / prop_speed
    sat = np.array([n.kind is NodeKind.SATELLITE for n in nodes], dtype=bool)
    if sat.any():
        delay[sat, :] = satellite_delay
        delay[:, sat] = satellite_delay
        np.fill_diagonal(delay, 0.0)
    return delay
