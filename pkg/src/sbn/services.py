"""Symbiotic service demand, symbiosis classification, provider matching and settlement.

Relay and Transfer requests come from user equipment (UE) that its home
device cannot serve; Compute and Charge requests are drawn per device and
per epoch.  Every matched request is paid for by the demander.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ledger import ServiceKind, ServiceTransaction, Symbiosis, sign
from .nodes import Behavior, NodeKind

DEFAULT_PRICES = {
    ServiceKind.RELAY: 2,
    ServiceKind.TRANSFER: 1,
    ServiceKind.COMPUTE: 3,
    ServiceKind.CHARGE: 2,
}


@dataclass(frozen=True)
class ServiceParams:
    capacity_mbps: float = 100.0
    compute_capacity: int = 10  # task units per epoch
    charge_size_j: float = 1.0  # largest charge request
    p_compute: float = 0.05
    p_charge: float = 0.02
    price_relay: int = 2
    price_transfer: int = 1
    price_compute: int = 3
    price_charge: int = 2
    trust_threshold: float = 0.3
    max_retries: int = 2

    def __post_init__(self):
        if self.capacity_mbps <= 0 or self.compute_capacity < 1 or self.charge_size_j <= 0:
            raise ValueError("service capacities must be positive")
        if not (0 <= self.p_compute <= 1 and 0 <= self.p_charge <= 1):
            raise ValueError("demand probabilities must lie in [0, 1]")
        if min(self.price_relay, self.price_transfer, self.price_compute, self.price_charge) <= 0:
            raise ValueError("prices must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def prices(self) -> dict:
        return {
            ServiceKind.RELAY: self.price_relay,
            ServiceKind.TRANSFER: self.price_transfer,
            ServiceKind.COMPUTE: self.price_compute,
            ServiceKind.CHARGE: self.price_charge,
        }


@dataclass
class UserEquipment:
    id: int
    position: tuple[float, float]
    demand_rate: float = 20.0  # Mbps
    latency_req: float = 0.050  # s

    def __post_init__(self):
        if self.demand_rate <= 0:
            raise ValueError("demand_rate must be > 0")


@dataclass
class ServiceRequest:
    req_id: int
    kind: ServiceKind
    demander: int
    size: float
    created_at: float
    ue: int | None = None
    residual: float = 0.0
    attempts: int = 0

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("request size must be > 0")


def planar(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def covers(srd, point) -> bool:
    return planar(srd.position, point) <= srd.coverage_radius


def can_reach(a, b) -> bool:
    """Symmetric communication range: the longer of the two radii."""
    return planar(a.position, b.position) <= max(a.coverage_radius, b.coverage_radius)


def ue_slots(params: ServiceParams, ue_rate: float = 20.0) -> int:
    return int(params.capacity_mbps // ue_rate)


@dataclass
class Access:
    """Who each UE is homed on and who actually carries it this epoch."""

    home: dict = field(default_factory=dict)  # ue id -> srd id or None
    serving: dict = field(default_factory=dict)  # ue id -> srd id for served UEs
    load: dict = field(default_factory=dict)  # srd id -> UEs carried

    def stranded(self) -> list[int]:
        return sorted(u for u in self.home if u not in self.serving)


def assign_access(ues, srds, params: ServiceParams) -> Access:
    """Home each UE on its nearest covering terrestrial device (satellites as fallback).

    A home carries at most ``ue_slots`` UEs, nearest first.  Fault and
    Byzantine homes carry nobody.
    """
    acc = Access(load={s.id: 0 for s in srds})
    homed: dict[int, list] = {}
    for ue in sorted(ues, key=lambda u: u.id):
        cover = [s for s in srds if covers(s, ue.position)]
        ground = [s for s in cover if s.kind is not NodeKind.SATELLITE]
        pool = ground or cover
        if not pool:
            acc.home[ue.id] = None
            continue
        h = min(pool, key=lambda s: (planar(s.position, ue.position), s.id))
        acc.home[ue.id] = h.id
        homed.setdefault(h.id, []).append(ue)
    by_id = {s.id: s for s in srds}
    for sid in sorted(homed):
        srd = by_id[sid]
        if srd.behavior is not Behavior.HONEST:
            continue
        cap = ue_slots(params)
        for ue in sorted(homed[sid], key=lambda u: (planar(srd.position, u.position), u.id)):
            if acc.load[sid] >= cap:
                break
            acc.serving[ue.id] = sid
            acc.load[sid] += 1
    return acc


def classify_symbiosis(req: ServiceRequest, residual: float | None = None) -> Symbiosis:
    if req.kind is ServiceKind.RELAY:
        return Symbiosis.OBLIGATE
    if req.kind is ServiceKind.TRANSFER:
        return Symbiosis.FACULTATIVE
    r = req.residual if residual is None else residual
    return Symbiosis.FACULTATIVE if r > 0 else Symbiosis.OBLIGATE


def _custodian(ue, home, srds):
    """The device that speaks for a stranded UE: its home if honest, else the nearest honest coverer."""
    if home is not None and home.behavior is Behavior.HONEST:
        return home
    cands = [s for s in srds if s.behavior is Behavior.HONEST and covers(s, ue.position)
             and (home is None or s.id != home.id)]
    if not cands:
        return None
    return min(cands, key=lambda s: (planar(s.position, ue.position), s.id))


def generate_demands(ues, srds, epoch: float, sc_enabled: bool, rng: np.random.Generator,
                     params: ServiceParams | None = None, access: Access | None = None,
                     next_id: int = 0) -> list[ServiceRequest]:
    """Requests raised in one epoch.

    ``sc_enabled`` does not change what is generated; without symbiotic
    communication the requests simply never match.  The rng is consumed in
    a fixed shape (four uniforms per device) so streams stay aligned.
    """
    params = params or ServiceParams()
    srds = sorted(srds, key=lambda s: s.id)
    by_id = {s.id: s for s in srds}
    access = access or assign_access(ues, srds, params)
    cap = ue_slots(params)
    reqs: list[ServiceRequest] = []
    rid = next_id

    # spare capacity is claimed as requests are raised, nearest to the demander first,
    # the same order the matcher uses
    spare = dict(access.load)
    ue_by_id = {u.id: u for u in ues}
    for uid in access.stranded():
        ue = ue_by_id[uid]
        home = by_id.get(access.home[uid]) if access.home[uid] is not None else None
        dem = _custodian(ue, home, srds)
        if dem is None:
            continue
        # silent devices advertise nothing and distrusted ones are ignored
        open_ = [t for t in srds if spare[t.id] < cap and t.id != dem.id and can_reach(dem, t)
                 and t.behavior is not Behavior.FAULT and t.reputation >= params.trust_threshold]
        near = sorted(open_, key=lambda t: (planar(dem.position, t.position), t.id))
        takers = [t for t in near if covers(t, ue.position) and (home is None or t.id != home.id)]
        if takers:
            kind, claim = ServiceKind.TRANSFER, takers[0]
        elif near:
            kind, claim = ServiceKind.RELAY, near[0]
        else:
            continue
        spare[claim.id] += 1
        reqs.append(ServiceRequest(rid, kind, dem.id, ue.demand_rate, epoch, ue=uid))
        rid += 1

    draws = rng.random((len(srds), 4))
    for s, (uc, uh, usize, ures) in zip(srds, draws):
        if uc < params.p_compute:
            size = 1 + int(usize * params.compute_capacity) % params.compute_capacity
            residual = float(math.floor(max(0.0, 2 * ures - 1) * size))
            reqs.append(ServiceRequest(rid, ServiceKind.COMPUTE, s.id, float(size), epoch, residual=residual))
            rid += 1
        if uh < params.p_charge:
            size = params.charge_size_j * max(usize, 1e-3)
            residual = max(0.0, 2 * ures - 1) * size
            reqs.append(ServiceRequest(rid, ServiceKind.CHARGE, s.id, size, epoch, residual=residual))
            rid += 1
    return reqs


@dataclass
class Resources:
    """Slack each device can still offer in the current epoch."""

    ue_load: dict
    compute_free: dict
    charge_busy: set = field(default_factory=set)

    @classmethod
    def fresh(cls, srds, access: Access, params: ServiceParams):
        return cls(dict(access.load), {s.id: params.compute_capacity for s in srds}, set())


def has_slack(srd, req: ServiceRequest, res: Resources, params: ServiceParams, ue_pos=None) -> bool:
    if req.kind is ServiceKind.TRANSFER:
        return res.ue_load[srd.id] < ue_slots(params) and ue_pos is not None and covers(srd, ue_pos)
    if req.kind is ServiceKind.RELAY:
        return res.ue_load[srd.id] < ue_slots(params)
    if req.kind is ServiceKind.COMPUTE:
        return res.compute_free[srd.id] >= req.size
    return srd.kind is not NodeKind.SATELLITE and srd.id not in res.charge_busy


def match_provider(req: ServiceRequest, srds, res: Resources, params: ServiceParams | None = None,
                   ue_pos=None) -> int | None:
    """Nearest in-range device with slack that is willing and trusted; ties to the lower id."""
    params = params or ServiceParams()
    by_id = {s.id: s for s in srds}
    dem = by_id[req.demander]
    best = None
    for s in srds:
        if s.id == dem.id or s.behavior is Behavior.FAULT or s.reputation < params.trust_threshold:
            continue
        if not can_reach(dem, s) or not has_slack(s, req, res, params, ue_pos):
            continue
        key = (planar(dem.position, s.position), s.id)
        if best is None or key < best[0]:
            best = (key, s.id)
    return None if best is None else best[1]


def reserve(provider_id: int, req: ServiceRequest, res: Resources) -> None:
    if req.kind in (ServiceKind.TRANSFER, ServiceKind.RELAY):
        res.ue_load[provider_id] += 1
    elif req.kind is ServiceKind.COMPUTE:
        res.compute_free[provider_id] -= int(req.size)
    else:
        res.charge_busy.add(provider_id)


def settle(req: ServiceRequest, provider: int, prices: dict, now: float, secret: int,
           tx_id: int, shard_hint: int = 0) -> ServiceTransaction:
    tx = ServiceTransaction(
        tx_id=tx_id,
        kind=req.kind,
        demander=req.demander,
        provider=provider,
        amount=int(prices[req.kind]),
        timestamp=now,
        symbiosis=classify_symbiosis(req),
        shard_hint=shard_hint,
    )
    return sign(tx, secret)
