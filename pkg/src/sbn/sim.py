"""Epoch-driven simulator: topology, mobility, attackers, services, sharded consensus.

Each run owns its state and draws from independent child streams of
``SeedSequence(seed + run)``, one per subsystem, so changing what one
subsystem does never shifts another's random numbers.
"""
from __future__ import annotations

import enum
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelParams, message_energy, message_latency
from .consensus import ConsensusConfig, Mode, fault_tolerance, forge_transaction, run_round
from .ledger import (
    GLOBAL_CHAIN,
    LedgerState,
    Symbiosis,
    append_block,
    build_anchor_block,
    node_secret,
    select_valid,
    verify_chain,
)
from .nodes import SATELLITE_DELAY_S, Behavior, NodeKind, SrdNode, distance
from .services import (
    Resources,
    ServiceParams,
    UserEquipment,
    assign_access,
    classify_symbiosis,
    generate_demands,
    match_provider,
    planar,
    reserve,
    settle,
)
from .sharding import MIN_SHARD_SIZE, assign_shards, optimal_shards, planner_params, select_leader

STREAMS = ("topology", "attackers", "mobility", "services", "consensus", "forgery")


class ConfigError(ValueError):
    pass


class Variant(enum.Enum):
    SBN = "sbn"
    NO_SBC = "no-sbc"
    NO_SHARDING = "no-shard"
    NO_SC = "no-sc"


class Scenario(enum.Enum):
    NA = "na"
    FA = "fa"
    BA = "ba"


@dataclass(frozen=True)
class ScenarioConfig:
    n_bs: int = 50
    n_uav: int = 20
    n_ground: int = 20
    n_satellite: int = 10
    n_ue: int = 150
    plane: float = 1000.0
    coverage_bs: float = 200.0
    coverage_ground: float = 200.0
    coverage_uav: float = 300.0
    ground_mobility_radius: float = 150.0
    ground_step: float = 10.0
    uav_radius: float = 100.0
    uav_speed: float = 10.0
    uav_altitude: float = 100.0
    satellite_delay: float = SATELLITE_DELAY_S
    scenario: Scenario = Scenario.NA
    attacker_fraction: float = 0.10
    variant: Variant = Variant.SBN
    epochs: int = 100
    epoch_s: float = 0.1
    runs: int = 200
    seed: int = 0
    shards: int = 0  # 0 = planner optimum
    initial_balance: int = 100
    forge_prob: float = 1.0  # per Byzantine device per epoch

    def __post_init__(self):
        counts = (self.n_bs, self.n_uav, self.n_ground, self.n_satellite, self.n_ue)
        if min(counts) < 0:
            raise ConfigError("node counts must be >= 0")
        if self.plane <= 0 or self.epoch_s <= 0:
            raise ConfigError("plane and epoch_s must be positive")
        if not 0 <= self.attacker_fraction < 1 / 3:
            raise ConfigError("attacker_fraction must lie in [0, 1/3)")
        if self.epochs < 1 or self.runs < 1:
            raise ConfigError("epochs and runs must be >= 1")
        if self.shards < 0 or self.initial_balance < 0:
            raise ConfigError("shards and initial_balance must be >= 0")
        if not 0 <= self.forge_prob <= 1:
            raise ConfigError("forge_prob must lie in [0, 1]")

    @property
    def n_srd(self) -> int:
        return self.n_bs + self.n_uav + self.n_ground + self.n_satellite

    @property
    def diagonal(self) -> float:
        return self.plane * math.sqrt(2.0)


@dataclass(frozen=True)
class ShardingConfig:
    d_intra: float | None = None  # None: mean pairwise BS distance
    d_global: float | None = None
    min_shard_size: int = MIN_SHARD_SIZE
    w_rep: float = 0.7
    w_act: float = 0.3


@dataclass(frozen=True)
class ReputationConfig:
    participate: float = 0.01
    silent: float = -0.05
    equivocate: float = -0.05
    failed_leader: float = -0.2
    no_delivery: float = -0.3


@dataclass(frozen=True)
class LedgerConfig:
    max_amount: int = 50
    clock_skew_window: float = 0.2


@dataclass(frozen=True)
class SimConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)
    sharding: ShardingConfig = field(default_factory=ShardingConfig)
    services: ServiceParams = field(default_factory=ServiceParams)
    ledger: LedgerConfig = field(default_factory=LedgerConfig)
    reputation: ReputationConfig = field(default_factory=ReputationConfig)
    penalty_distance: float | None = None  # None: scenario diagonal

    def with_scenario(self, **kw) -> "SimConfig":
        return replace(self, scenario=replace(self.scenario, **kw))


CSV_FIELDS = (
    "variant",
    "scenario",
    "seed",
    "run",
    "total_energy_J",
    "mean_service_latency_ms",
    "deadline_violation_rate",
    "consensus_success_rate",
    "committed_blocks",
    "forged_tx_committed",
    "active_msgs",
    "backscatter_msgs",
)
METRIC_FIELDS = CSV_FIELDS[4:]


@dataclass
class RunMetrics:
    variant: str
    scenario: str
    seed: int
    run: int
    total_energy_J: float
    mean_service_latency_ms: float
    deadline_violation_rate: float
    consensus_success_rate: float
    committed_blocks: int
    forged_tx_committed: int
    active_msgs: int
    backscatter_msgs: int
    # audit fields, not part of the CSV
    consensus_energy_J: float = 0.0
    penalty_energy_J: float = 0.0
    trace_hash: str = ""
    ledger_violations: int = 0
    conflicting_blocks: int = 0
    forged_in_pools: int = 0
    chain_faults: int = 0
    quorum_impossible_rounds: int = 0
    mean_epoch_latency_ms: float = 0.0
    n_shards: int = 0
    transactions_committed: int = 0

    def row(self) -> tuple:
        return tuple(getattr(self, k) for k in CSV_FIELDS)


# --- topology -------------------------------------------------------------


def build_topology(sc: ScenarioConfig, rng: np.random.Generator):
    """Uniform placement. Ids run BS, UAV, ground, satellite; UEs are numbered separately."""
    nodes: list[SrdNode] = []
    nid = 0
    for _ in range(sc.n_bs):
        x, y = rng.uniform(0, sc.plane, 2)
        nodes.append(SrdNode(nid, NodeKind.BASE_STATION, (float(x), float(y), 0.0), coverage_radius=sc.coverage_bs))
        nid += 1
    for _ in range(sc.n_uav):
        hx, hy = rng.uniform(0, sc.plane, 2)
        phase = float(rng.uniform(0, 2 * math.pi))
        pos = (float(hx + sc.uav_radius * math.cos(phase)), float(hy + sc.uav_radius * math.sin(phase)),
               sc.uav_altitude)
        nodes.append(SrdNode(nid, NodeKind.UAV, pos, coverage_radius=sc.coverage_uav,
                             home=(float(hx), float(hy), sc.uav_altitude), phase=phase))
        nid += 1
    for _ in range(sc.n_ground):
        x, y = rng.uniform(0, sc.plane, 2)
        nodes.append(SrdNode(nid, NodeKind.GROUND, (float(x), float(y), 0.0), coverage_radius=sc.coverage_ground))
        nid += 1
    for _ in range(sc.n_satellite):
        # in-plane footprint; altitude only shows up as the fixed orbit delay
        x, y = rng.uniform(0, sc.plane, 2)
        nodes.append(SrdNode(nid, NodeKind.SATELLITE, (float(x), float(y), 0.0), coverage_radius=math.inf))
        nid += 1
    ues = []
    for uid in range(sc.n_ue):
        x, y = rng.uniform(0, sc.plane, 2)
        ues.append(UserEquipment(uid, (float(x), float(y))))
    return nodes, ues


def step_mobility(nodes, sc: ScenarioConfig, rng: np.random.Generator) -> None:
    ground = [nd for nd in nodes if nd.kind is NodeKind.GROUND]
    draws = rng.random((len(ground), 2))
    for nd, (ua, ur) in zip(ground, draws):
        theta = 2 * math.pi * ua
        r = sc.ground_step * math.sqrt(ur)
        x = nd.position[0] + r * math.cos(theta)
        y = nd.position[1] + r * math.sin(theta)
        if math.hypot(x - nd.home[0], y - nd.home[1]) <= sc.ground_mobility_radius:
            nd.position = (x, y, nd.position[2])
    omega = sc.uav_speed / sc.uav_radius if sc.uav_radius > 0 else 0.0
    for nd in nodes:
        if nd.kind is NodeKind.UAV:
            nd.phase += omega * sc.epoch_s
            nd.position = (nd.home[0] + sc.uav_radius * math.cos(nd.phase),
                           nd.home[1] + sc.uav_radius * math.sin(nd.phase), nd.home[2])


def inject_attackers(nodes, scenario: Scenario, rng: np.random.Generator, fraction: float = 0.10,
                     plan=None, max_tries: int = 10_000) -> list[int]:
    """Turn ``floor(fraction * |SRDs|)`` devices into attackers.

    With a shard plan the draw is repeated until every shard keeps its
    attackers within the PBFT tolerance ``f``; this is rejection sampling,
    so the result is uniform over admissible sets.
    """
    for nd in nodes:
        nd.behavior = Behavior.HONEST
    if scenario is Scenario.NA:
        return []
    k = int(math.floor(fraction * len(nodes) + 1e-9))
    ids = np.array(sorted(nd.id for nd in nodes))
    chosen = None
    for _ in range(max_tries):
        pick = sorted(int(i) for i in rng.choice(ids, size=k, replace=False))
        if plan is None or _admissible(pick, plan):
            chosen = pick
            break
    if chosen is None:
        raise ConfigError("no attacker placement keeps every shard below its fault tolerance")
    kind = Behavior.FAULT if scenario is Scenario.FA else Behavior.BYZANTINE
    by_id = {nd.id: nd for nd in nodes}
    for i in chosen:
        by_id[i].behavior = kind
    return chosen


def _admissible(pick, plan) -> bool:
    per = {}
    for i in pick:
        s = plan.assignments[i]
        per[s] = per.get(s, 0) + 1
    return all(c <= fault_tolerance(len(plan.members(s))) for s, c in per.items())


# --- one run --------------------------------------------------------------


def variant_settings(variant: Variant):
    """(consensus mode, single shard?, services on?)"""
    return {
        Variant.SBN: (Mode.SPBFT, False, True),
        Variant.NO_SBC: (Mode.PBFT, False, True),
        Variant.NO_SHARDING: (Mode.SPBFT, True, True),
        Variant.NO_SC: (Mode.SPBFT, False, False),
    }[variant]


class _Trace:
    def __init__(self):
        self.energy: list[float] = []
        self.consensus: list[float] = []
        self.penalty: list[float] = []
        self.h = hashlib.sha256()

    def charge(self, epoch, source, node, phase, attempt, joules):
        self.energy.append(joules)
        (self.consensus if source != "penalty" else self.penalty).append(joules)
        self.h.update(f"{epoch},{source},{node},{phase},{attempt},{float(joules).hex()}\n".encode())

    def note(self, text):
        self.h.update(text.encode() + b"\n")


def _clamp(x):
    return min(1.0, max(0.0, x))


def run_once(cfg: SimConfig, run: int = 0, trace_out: list | None = None) -> RunMetrics:
    sc = cfg.scenario
    seed = sc.seed + run
    streams = dict(zip(STREAMS, (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(STREAMS)))))
    chan = cfg.channel
    mode, single, sc_on = variant_settings(sc.variant)
    cconf = replace(cfg.consensus, mode=mode)
    if cconf.phase_timeout is None:
        worst = max(sc.diagonal / chan.prop_speed, sc.satellite_delay if sc.n_satellite else 0.0)
        cconf = replace(cconf, phase_timeout=2 * (chan.t_msg + worst))
    shp = cfg.sharding
    rep = cfg.reputation
    sp = cfg.services

    nodes, ues = build_topology(sc, streams["topology"])
    by_id = {nd.id: nd for nd in nodes}
    ue_by_id = {u.id: u for u in ues}
    srds = sorted(nodes, key=lambda nd: nd.id)

    n_bs = sum(1 for nd in nodes if nd.is_bs)
    if n_bs < shp.min_shard_size:
        raise ConfigError(f"{n_bs} base stations cannot form a shard of {shp.min_shard_size}")
    pp = planner_params(nodes, chan, shp.d_intra, shp.d_global, shp.min_shard_size)
    n_opt = optimal_shards(pp).n_star
    ref_plan = assign_shards(nodes, n_opt, shp.min_shard_size, shp.w_rep, shp.w_act)
    n = 1 if single else (sc.shards or n_opt)
    plan = ref_plan if n == n_opt else assign_shards(nodes, n, shp.min_shard_size, shp.w_rep, shp.w_act)
    inject_attackers(nodes, sc.scenario, streams["attackers"], sc.attacker_fraction, ref_plan)
    shard_members = {s: [by_id[i] for i in plan.members(s)] for s in range(n)}

    ledger = LedgerState(
        balances={nd.id: sc.initial_balance for nd in nodes},
        clock_skew_window=cfg.ledger.clock_skew_window,
        max_amount=cfg.ledger.max_amount,
        secrets={nd.id: node_secret(nd.id, seed) for nd in nodes},
    )
    credits = ledger.total_credits()
    trace = _Trace()
    penalty_d = cfg.penalty_distance if cfg.penalty_distance is not None else sc.diagonal
    penalty_j = message_energy(chan, penalty_d)

    rounds = committed_rounds = committed_blocks = 0
    active = bs_msgs = forged_committed = 0
    violations = conflicts = forged_pool = quorum_fail = tx_committed = 0
    latencies: list[float] = []
    epoch_lat: list[float] = []
    carried = []
    next_req = next_tx = 0

    def access_latency(d, via_satellite):
        base = message_latency(d, 1, chan)
        return base + (sc.satellite_delay if via_satellite else 0.0)

    heights: dict = {}

    def settle_block(block):
        nonlocal violations, committed_blocks, tx_committed, conflicts
        key = (block.chain_id, block.height)
        if heights.setdefault(key, block.block_hash) != block.block_hash:
            conflicts += 1
        append_block(block, ledger)
        committed_blocks += 1
        tx_committed += len(block.txs)
        if ledger.total_credits() != credits or min(ledger.balances.values()) < 0:
            violations += 1
        trace.note(f"block,{block.chain_id},{block.height},{block.block_hash:016x}")

    for epoch in range(sc.epochs):
        now = epoch * sc.epoch_s
        step_mobility(nodes, sc, streams["mobility"])
        leaders = {s: select_leader(shard_members[s], shp.w_rep, shp.w_act) for s in range(n)}

        # --- services
        acc = assign_access(ues, srds, sp)
        reqs = generate_demands(ues, srds, now, sc_on, streams["services"], sp, acc, next_req)
        next_req += len(reqs) + 1
        ue_reqs = [r for r in reqs if r.ue is not None]
        queue = carried + [r for r in reqs if r.ue is None]
        queue = [r for r in queue if by_id[r.demander].honest]
        res = Resources.fresh(srds, acc, sp)
        ue_outcome = {}  # ue id -> (provider, demander) when served through a match
        pools = {s: [] for s in range(n)}
        cross = []
        carried = []
        for req in sorted(ue_reqs, key=lambda r: r.req_id) + sorted(queue, key=lambda r: r.req_id):
            ue_pos = ue_by_id[req.ue].position if req.ue is not None else None
            prov = match_provider(req, srds, res, sp, ue_pos) if sc_on else None
            if prov is not None and by_id[prov].behavior is Behavior.BYZANTINE:
                # accepted but never delivered
                by_id[prov].reputation = _clamp(by_id[prov].reputation + rep.no_delivery)
                prov = None
            if prov is None:
                # the retry carries the penalty: UE requests are re-raised every epoch,
                # obligate tasks are re-queued, facultative ones fall back on the
                # demander's own resources
                req.attempts += 1
                obligate = classify_symbiosis(req) is Symbiosis.OBLIGATE
                requeue = req.ue is None and obligate and req.attempts <= sp.max_retries
                if req.ue is not None or requeue:
                    trace.charge(epoch, "penalty", req.demander, -1, req.attempts, penalty_j)
                    by_id[req.demander].charge(penalty_j)
                if requeue:
                    carried.append(req)
                continue
            reserve(prov, req, res)
            tx = settle(req, prov, sp.prices, now, ledger.secrets[req.demander], next_tx,
                        plan.shard_of(req.demander))
            next_tx += 1
            if req.ue is not None:
                ue_outcome[req.ue] = (prov, req.demander)
            s_dem, s_prov = plan.shard_of(req.demander), plan.shard_of(prov)
            (pools[s_dem] if s_dem == s_prov else cross).append(tx)

        if sc.scenario is Scenario.BA:
            fr = streams["forgery"]
            for nd in srds:
                if nd.behavior is not Behavior.BYZANTINE:
                    continue
                u_forge, u_victim = fr.random(2)
                if u_forge >= sc.forge_prob:
                    continue
                s = plan.shard_of(nd.id)
                victims = [m.id for m in shard_members[s] if m.id != nd.id]
                victim = victims[int(u_victim * len(victims)) % len(victims)]
                pools[s].append(forge_transaction(nd.id, victim, now, salt=epoch))
                forged_pool += 1

        # --- per-shard consensus, parallel in simulated time
        shard_lat = {}
        for s in range(n):
            members = shard_members[s]
            txs = select_valid(pools[s], ledger, now)
            muted = [m.id for m in members if m.reputation < sp.trust_threshold]
            out = run_round(members, leaders[s], txs, cconf, chan, streams["consensus"], ledger=ledger,
                            chain_id=s, now=now, satellite_delay=sc.satellite_delay, muted=muted)
            rounds += 1
            _account(out, epoch, f"shard{s}", trace, by_id)
            active += out.active_msgs
            bs_msgs += out.backscatter_msgs
            quorum_fail += out.quorum_impossible
            _update_reputation(out, members, leaders[s], rep, by_id)
            if out.committed:
                committed_rounds += 1
                forged_committed += out.forged_committed
                settle_block(out.block)
                shard_lat[s] = out.round_latency
            else:
                shard_lat[s] = None
        finished = [v if v is not None else sc.epoch_s for v in shard_lat.values()]
        epoch_lat.append(max(finished))

        # --- committee round on the Global Chain
        committee = [by_id[leaders[s]] for s in range(n)]
        committee_leader = select_leader(committee, shp.w_rep, shp.w_act)
        tips = {s: ledger.chains[s][-1].block_hash for s in range(n) if ledger.chains.get(s)}
        gtxs = select_valid(cross, ledger, now)
        proposal = build_anchor_block(tips, gtxs, ledger, plan.assignments)
        gout = run_round(committee, committee_leader, gtxs, cconf, chan, streams["consensus"], ledger=ledger,
                         chain_id=GLOBAL_CHAIN, now=now, min_members=1, satellite_delay=sc.satellite_delay,
                         proposal=proposal)
        _account(gout, epoch, "global", trace, by_id)
        active += gout.active_msgs
        bs_msgs += gout.backscatter_msgs
        if gout.committed:
            forged_committed += gout.forged_committed
            settle_block(gout.block)
        anchor_lat = gout.round_latency if gout.committed else None

        # --- per-UE service latency
        for ue in ues:
            if ue.id in acc.serving:
                srv = by_id[acc.serving[ue.id]]
                lat = access_latency(planar(srv.position, ue.position), srv.kind is NodeKind.SATELLITE)
                sl = shard_lat[plan.shard_of(srv.id)]
                lat = lat + sl if sl is not None else sc.epoch_s
            elif ue.id in ue_outcome:
                prov, dem = ue_outcome[ue.id]
                p_nd, d_nd = by_id[prov], by_id[dem]
                if planar(p_nd.position, ue.position) <= p_nd.coverage_radius:
                    lat = access_latency(planar(p_nd.position, ue.position), p_nd.kind is NodeKind.SATELLITE)
                else:
                    lat = access_latency(planar(d_nd.position, ue.position), d_nd.kind is NodeKind.SATELLITE)
                    lat += access_latency(distance(d_nd, p_nd), NodeKind.SATELLITE in (d_nd.kind, p_nd.kind))
                sd, sp_ = plan.shard_of(dem), plan.shard_of(prov)
                confirm = shard_lat[sd] if sd == sp_ else (None if anchor_lat is None or shard_lat[sd] is None
                                                           else shard_lat[sd] + anchor_lat)
                lat = lat + confirm if confirm is not None else sc.epoch_s
            else:
                lat = sc.epoch_s
            latencies.append(min(lat, sc.epoch_s))

    for cid, chain in ledger.chains.items():
        if verify_chain(chain) is not None:
            conflicts += 1
    total = math.fsum(trace.energy)
    lat_arr = np.array(latencies) if latencies else np.zeros(1)
    deadline = ues[0].latency_req if ues else 0.05
    if trace_out is not None:
        trace_out.extend(trace.energy)
    return RunMetrics(
        variant=sc.variant.value,
        scenario=sc.scenario.value,
        seed=seed,
        run=run,
        total_energy_J=total,
        mean_service_latency_ms=float(lat_arr.mean() * 1e3),
        deadline_violation_rate=float((lat_arr > deadline + 1e-12).mean()),
        consensus_success_rate=committed_rounds / rounds if rounds else 0.0,
        committed_blocks=committed_blocks,
        forged_tx_committed=forged_committed,
        active_msgs=active,
        backscatter_msgs=bs_msgs,
        consensus_energy_J=math.fsum(trace.consensus),
        penalty_energy_J=math.fsum(trace.penalty),
        trace_hash=trace.h.hexdigest(),
        ledger_violations=violations,
        conflicting_blocks=conflicts,
        forged_in_pools=forged_pool,
        quorum_impossible_rounds=quorum_fail,
        mean_epoch_latency_ms=float(np.mean(epoch_lat) * 1e3),
        n_shards=n,
        transactions_committed=tx_committed,
    )


def _account(out, epoch, source, trace, by_id):
    for nid, phase, attempt, joules in out.charges:
        trace.charge(epoch, source, nid, phase, attempt, joules)
        by_id[nid].charge(joules)


def _update_reputation(out, members, leader, rep: ReputationConfig, by_id):
    for nd in members:
        if nd.behavior is Behavior.FAULT:
            nd.reputation = _clamp(nd.reputation + rep.silent)
        elif nd.behavior is Behavior.BYZANTINE:
            nd.reputation = _clamp(nd.reputation + rep.equivocate)
            nd.activity += 1
        else:
            nd.reputation = _clamp(nd.reputation + rep.participate)
            nd.activity += 1
    if not out.committed and by_id[leader].behavior is not Behavior.HONEST:
        by_id[leader].reputation = _clamp(by_id[leader].reputation + rep.failed_leader)


# --- many runs ------------------------------------------------------------


@dataclass
class ScenarioResult:
    rows: list
    mean: dict
    std: dict


def _worker(args):
    cfg, run = args
    return run_once(cfg, run)


def thread_count() -> int:
    raw = os.environ.get("SBN_THREADS", "0").strip() or "0"
    try:
        k = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SBN_THREADS must be an integer, got {raw!r}") from exc
    return (os.cpu_count() or 1) if k <= 0 else k


def summarize(rows) -> tuple[dict, dict]:
    mean, std = {}, {}
    for k in METRIC_FIELDS:
        vals = np.array([getattr(r, k) for r in rows], dtype=float)
        mean[k] = float(math.fsum(vals) / len(vals))
        std[k] = float(np.sqrt(math.fsum((vals - mean[k]) ** 2) / len(vals)))
    return mean, std


def run_scenario(cfg: SimConfig, workers: int | None = None) -> ScenarioResult:
    """``runs`` independent runs with seeds ``seed + i``, aggregated in run order."""
    runs = cfg.scenario.runs
    workers = thread_count() if workers is None else workers
    jobs = [(cfg, i) for i in range(runs)]
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=min(workers, runs)) as ex:
            rows = list(ex.map(_worker, jobs))
    else:
        rows = [_worker(j) for j in jobs]
    mean, std = summarize(rows)
    return ScenarioResult(rows, mean, std)


def measure_consensus_energy(cfg: SimConfig, shards: int, runs: int | None = None) -> float:
    """Mean consensus-only energy per run with the shard count forced to ``shards``."""
    sc = replace(cfg.scenario, shards=shards, variant=Variant.SBN, scenario=Scenario.NA)
    if runs is not None:
        sc = replace(sc, runs=runs)
    c = replace(cfg, scenario=sc)
    vals = [run_once(c, i).consensus_energy_J for i in range(sc.runs)]
    return math.fsum(vals) / len(vals)


def desk_scenario(**kw) -> ScenarioConfig:
    """The small scale used for quick checks: 10 BSs, 4 UAVs, 4 ground, 2 satellites, 30 UEs."""
    base = dict(n_bs=10, n_uav=4, n_ground=4, n_satellite=2, n_ue=30, runs=50)
    base.update(kw)
    return ScenarioConfig(**base)


@dataclass
class ProtocolComparison:
    """Per-round outcomes of PBFT and S-PBFT on the same uniforms."""

    success_pbft: np.ndarray
    success_spbft: np.ndarray
    energy_pbft: np.ndarray
    energy_spbft: np.ndarray


def compare_protocols(cfg: SimConfig, seed: int, rounds: int) -> ProtocolComparison:
    """Monte-Carlo rounds over every SRD of one topology, both protocols per round.

    Nodes move between rounds and the leader rotates over base stations.
    Each round gets its own child seed, and both protocols consume that
    seed identically, so the comparison is paired.
    """
    sc = cfg.scenario
    ss = np.random.SeedSequence(seed)
    topo, attack, mob, rounds_ss = ss.spawn(4)
    nodes, _ = build_topology(sc, np.random.default_rng(topo))
    inject_attackers(nodes, sc.scenario, np.random.default_rng(attack), sc.attacker_fraction)
    mob_rng = np.random.default_rng(mob)
    chan = cfg.channel
    worst = max(sc.diagonal / chan.prop_speed, sc.satellite_delay if sc.n_satellite else 0.0)
    base = cfg.consensus
    if base.phase_timeout is None:
        base = replace(base, phase_timeout=2 * (chan.t_msg + worst))
    confs = {m: replace(base, mode=m) for m in (Mode.PBFT, Mode.SPBFT)}
    bss = sorted(nd.id for nd in nodes if nd.is_bs) or sorted(nd.id for nd in nodes)
    out = {m: ([], []) for m in confs}
    for k, child in enumerate(rounds_ss.spawn(rounds)):
        step_mobility(nodes, sc, mob_rng)
        leader = bss[k % len(bss)]
        for m, cc in confs.items():
            o = run_round(nodes, leader, [], cc, chan, np.random.default_rng(child),
                          satellite_delay=sc.satellite_delay)
            out[m][0].append(o.committed)
            out[m][1].append(o.total_energy)
    return ProtocolComparison(
        np.array(out[Mode.PBFT][0]), np.array(out[Mode.SPBFT][0]),
        np.array(out[Mode.PBFT][1]), np.array(out[Mode.SPBFT][1]),
    )
