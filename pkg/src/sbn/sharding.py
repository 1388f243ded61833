"""Shard-count planning from a convex consensus-energy model, plus shard assignment.

With ``z`` base stations split into ``n`` shards of ``m = z/n``, each shard's
two all-to-all phases cost ``2 m^2`` messages and the leader committee costs
``2 n^2``, so

    E(n) = 2 e_intra z^2 / n + 2 e_global n^2,

whose second derivative is positive for every ``n > 0``.  The integer optimum
sits next to the root of the first derivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .channel import ChannelParams, tx_power
from .ledger import GLOBAL_CHAIN
from .nodes import NodeKind

MIN_SHARD_SIZE = 4


class DomainError(ValueError):
    pass


class InfeasiblePlan(ValueError):
    pass


class NoBaseStation(ValueError):
    pass


@dataclass(frozen=True)
class EnergyModelParams:
    z: int
    e_intra: float
    e_global: float
    min_shard_size: int = MIN_SHARD_SIZE

    def __post_init__(self):
        if self.min_shard_size < 1:
            raise DomainError("min_shard_size must be >= 1")
        if self.z < self.min_shard_size:
            raise DomainError(f"z={self.z} is below min_shard_size={self.min_shard_size}")
        if not (self.e_intra > 0 and self.e_global > 0):
            raise DomainError("energy coefficients must be positive")

    @property
    def n_max(self) -> int:
        return self.z // self.min_shard_size

    @classmethod
    def from_channel(cls, z: int, chan: ChannelParams, d_intra: float = 100.0,
                     d_global: float = 400.0, min_shard_size: int = MIN_SHARD_SIZE):
        """Coefficients as one message's energy at representative distances."""
        return cls(z, tx_power(d_intra, chan) * chan.t_msg, tx_power(d_global, chan) * chan.t_msg,
                   min_shard_size)


@dataclass(frozen=True)
class ShardOptimum:
    n_star: int
    m_sizes: list
    e_star: float
    n_c: float


def energy_curve(n: float, p: EnergyModelParams) -> float:
    """E(n) on the whole positive half-line, for calculus."""
    if n <= 0:
        raise DomainError("n must be > 0")
    return 2 * p.e_intra * p.z * p.z / n + 2 * p.e_global * n * n


def energy_model(n: float, p: EnergyModelParams) -> float:
    """E(n) restricted to the plannable range 1 <= n <= z // min_shard_size."""
    if not 1 <= n <= p.n_max:
        raise DomainError(f"n={n} outside [1, {p.n_max}]")
    return energy_curve(n, p)


def energy_derivatives(n: float, p: EnergyModelParams) -> tuple[float, float]:
    if n <= 0:
        raise DomainError("n must be > 0")
    d1 = -2 * p.e_intra * p.z * p.z / (n * n) + 4 * p.e_global * n
    d2 = 4 * p.e_intra * p.z * p.z / (n * n * n) + 4 * p.e_global
    return d1, d2


def continuous_root(p: EnergyModelParams) -> float:
    return (p.e_intra * p.z * p.z / (2 * p.e_global)) ** (1.0 / 3.0)


def balanced_sizes(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + 1] * extra + [base] * (parts - extra)


def optimal_shards(p: EnergyModelParams) -> ShardOptimum:
    n_c = continuous_root(p)
    hi = p.n_max
    seeds = {min(max(math.floor(n_c), 1), hi), min(max(math.ceil(n_c), 1), hi)}
    best = min(seeds, key=lambda k: (energy_curve(k, p), k))
    # convexity makes the walk redundant, but it keeps the answer exact under rounding
    while True:
        step = None
        for cand in (best - 1, best + 1):
            if 1 <= cand <= hi:
                e = energy_curve(cand, p)
                eb = energy_curve(best, p)
                if e < eb or (e == eb and cand < best):
                    step = cand
                    break
        if step is None:
            break
        best = step
    return ShardOptimum(best, balanced_sizes(p.z, best), energy_curve(best, p), n_c)


@dataclass
class ShardPlan:
    n: int
    assignments: dict
    leaders: dict
    committee: list
    global_chain_id: int = GLOBAL_CHAIN
    bs_groups: list = field(default_factory=list)

    def members(self, shard: int) -> list[int]:
        return sorted(i for i, s in self.assignments.items() if s == shard)

    def shard_of(self, node_id: int) -> int:
        return self.assignments[node_id]


def _planar(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def split_base_stations(nodes, n: int, min_shard_size: int = MIN_SHARD_SIZE) -> list[list[int]]:
    """Sort BSs by (x, y, id) and cut them into ``n`` contiguous balanced groups."""
    bss = sorted((nd for nd in nodes if nd.is_bs), key=lambda nd: (nd.position[0], nd.position[1], nd.id))
    if n < 1:
        raise InfeasiblePlan("need at least one shard")
    if len(bss) < n * min_shard_size:
        raise InfeasiblePlan(f"{len(bss)} base stations cannot fill {n} shards of {min_shard_size}")
    groups, start = [], 0
    for size in balanced_sizes(len(bss), n):
        groups.append([nd.id for nd in bss[start : start + size]])
        start += size
    return groups


def assign_shards(nodes, n: int, min_shard_size: int = MIN_SHARD_SIZE,
                  w_rep: float = 0.7, w_act: float = 0.3) -> ShardPlan:
    """Geographic partition around base stations.

    Non-BS devices join the shard of the BS closest to their ground
    footprint (x, y), ties to the lower BS id.
    """
    groups = split_base_stations(nodes, n, min_shard_size)
    assignments = {}
    for s, g in enumerate(groups):
        for i in g:
            assignments[i] = s
    bss = sorted((nd for nd in nodes if nd.is_bs), key=lambda nd: nd.id)
    for nd in nodes:
        if nd.is_bs:
            continue
        near = min(bss, key=lambda b: (_planar(nd.position, b.position), b.id))
        assignments[nd.id] = assignments[near.id]
    by_id = {nd.id: nd for nd in nodes}
    leaders = {}
    for s in range(n):
        members = [by_id[i] for i in sorted(by_id) if assignments[i] == s]
        leaders[s] = select_leader(members, w_rep, w_act)
    return ShardPlan(n, assignments, leaders, [leaders[s] for s in range(n)], GLOBAL_CHAIN, groups)


def select_leader(members, w_rep: float = 0.7, w_act: float = 0.3) -> int:
    bss = [nd for nd in members if nd.kind is NodeKind.BASE_STATION]
    if not bss:
        raise NoBaseStation("shard has no base station")
    top = max(nd.activity for nd in bss)

    def score(nd):
        act = nd.activity / top if top > 0 else 0.0
        return w_rep * nd.reputation + w_act * act

    return min(bss, key=lambda nd: (-score(nd), nd.id)).id


def mean_pairwise_distance(nodes) -> float:
    pts = [nd.position for nd in nodes]
    if len(pts) < 2:
        return 0.0
    return float(np.mean([math.dist(a, b) for a, b in combinations(pts, 2)]))


def planner_params(nodes, chan: ChannelParams, d_intra: float | None = None,
                   d_global: float | None = None, min_shard_size: int = MIN_SHARD_SIZE) -> EnergyModelParams:
    """Planner inputs for a concrete topology.

    A ``None`` distance is replaced by the mean pairwise BS distance, so both
    coefficients share one scale and the optimum depends on ``z`` alone.
    """
    bss = [nd for nd in nodes if nd.is_bs]
    auto = max(mean_pairwise_distance(bss), 1.0)
    return EnergyModelParams.from_channel(
        len(bss), chan,
        auto if d_intra is None else d_intra,
        auto if d_global is None else d_global,
        min_shard_size,
    )
