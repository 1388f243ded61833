"""PBFT and backscatter-augmented S-PBFT rounds over a lossy broadcast channel.

A round draws one block of uniforms ``U[phase, sender, receiver, attempt]``
up front and delivers a message iff ``U < p``.  Both modes see the same
uniforms, and the pre-prepare phase is identical in both, so the set of
nodes that speak in later phases is the same.  S-PBFT only raises ``p`` on
boosted links and zeroes the energy of backscatter senders, which makes its
energy never exceed PBFT's for the same seed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, D_MIN, backscatter_success_prob, link_success_prob
from .ledger import (
    Block,
    LedgerState,
    ServiceKind,
    ServiceTransaction,
    Symbiosis,
    block_is_valid,
    build_block,
    fnv1a64,
    make_block,
    signature_ok,
)
from .nodes import Behavior, SATELLITE_DELAY_S, distance_matrix, propagation_matrix

PRE_PREPARE, PREPARE, COMMIT = 0, 1, 2
PHASES = ("pre-prepare", "prepare", "commit")


class Mode(enum.Enum):
    PBFT = "pbft"
    SPBFT = "spbft"


class QuorumImpossible(Exception):
    """Fewer than 2f+1 honest members; the round cannot commit."""


@dataclass(frozen=True)
class ConsensusConfig:
    mode: Mode = Mode.SPBFT
    max_retries: int = 3
    pairing_range: float = 400.0
    phase_timeout: float | None = None  # None: 2 * (t_msg + worst one-way delay among members)

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.pairing_range <= 0:
            raise ValueError("pairing_range must be > 0")
        if self.phase_timeout is not None and self.phase_timeout <= 0:
            raise ValueError("phase_timeout must be > 0")


@dataclass(frozen=True)
class RoundOutcome:
    committed: bool
    block: Block | None
    energy_per_node: dict
    round_latency: float
    active_msgs: int
    backscatter_msgs: int
    forged_committed: int = 0
    quorum_impossible: bool = False
    leader_failed: bool = False
    phase_attempts: tuple = (0, 0, 0)
    committers: tuple = ()
    silent: tuple = ()
    # (sender id, phase, attempt, joules) for every active attempt
    charges: tuple = field(default=(), repr=False)

    @property
    def total_energy(self) -> float:
        return math.fsum(c[3] for c in self.charges)


def fault_tolerance(n: int) -> int:
    return (n - 1) // 3


def default_phase_timeout(chan: ChannelParams, max_delay: float) -> float:
    return 2.0 * (chan.t_msg + max_delay)


def assign_symbiotic_roles(members, config: ConsensusConfig, leader: int | None = None):
    """Greedy PTx/STx pairing.

    Walk ids in ascending order; an unpaired node takes its nearest unpaired
    neighbour within ``pairing_range`` (ties to the lower id).  The lower id
    is the PTx unless the higher one is the round leader, which never
    backscatters.  Returns ``(pairs, unpaired)`` with ``pairs`` mapping
    PTx id to STx id.
    """
    nodes = sorted(members, key=lambda n: n.id)
    ids = [n.id for n in nodes]
    d = distance_matrix(nodes) if nodes else np.zeros((0, 0))
    paired = [False] * len(nodes)
    pairs: dict[int, int] = {}
    for i in range(len(nodes)):
        if paired[i]:
            continue
        best = None
        for j in range(len(nodes)):
            if j == i or paired[j] or d[i, j] > config.pairing_range:
                continue
            if best is None or d[i, j] < d[i, best]:
                best = j
        if best is None:
            continue
        paired[i] = paired[best] = True
        lo, hi = sorted((ids[i], ids[best]))
        if hi == leader:
            lo, hi = hi, lo
        pairs[lo] = hi
    unpaired = {ids[i] for i in range(len(nodes)) if not paired[i]}
    return pairs, unpaired


def forge_transaction(forger: int, victim: int, timestamp: float, salt: int = 0) -> ServiceTransaction:
    """A payment from ``victim`` to ``forger`` carrying a signature the forger had to guess."""
    tx_id = (1 << 62) | ((forger & 0xFFFF) << 32) | (salt & 0xFFFFFFFF)
    guess = fnv1a64(b"forged" + tx_id.to_bytes(8, "big"))
    return ServiceTransaction(tx_id, ServiceKind.RELAY, victim, forger, 1, timestamp,
                              Symbiosis.OBLIGATE, 0, guess)


@dataclass
class _Tx:
    sender: int  # member index
    recv: np.ndarray  # bool (N,)
    p: float
    backscatter: bool
    vote: bool  # True when the payload is a matching vote for the honest block


class _Phase:
    """Vectorised retry/delivery/energy bookkeeping for one phase."""

    def __init__(self, idx, txs, u, dist, prop, power, chan, retries, timeout):
        self.delivered = np.zeros((0, dist.shape[0]), dtype=bool)
        self.attempts = np.zeros(0, dtype=int)
        self.charges = []
        self.latency = 0.0
        self.max_attempts = 0
        if not txs:
            return
        senders = np.array([t.sender for t in txs])
        recv = np.stack([t.recv for t in txs])
        p = np.array([t.p for t in txs])
        bs = np.array([t.backscatter for t in txs])
        succ = u[idx][senders] < p[:, None, None]
        first = np.where(succ.any(axis=2), succ.argmax(axis=2), retries + 1)
        first = np.where(recv, first, -1)
        self.delivered = recv & (first <= retries)
        used = np.where(recv, np.minimum(first + 1, retries + 1), 0).max(axis=1)
        self.attempts = used
        self.max_attempts = int(used.max()) if used.size else 0
        elapsed = 0.0
        for k in range(retries + 1):
            remaining = first >= k
            live = remaining.any(axis=1)
            if not live.any():
                break
            active = live & ~bs
            n_active = int(active.sum())
            # serial airtime of this attempt round; the last message then needs
            # its (timeout-bounded) flight time
            slots = n_active if n_active else 1
            last = min(chan.t_msg + float(prop[senders[live]].max()), timeout)
            elapsed += (slots - 1) * chan.t_msg + last
            if n_active:
                far = np.where(remaining, dist[senders], 0.0).max(axis=1)
                for t in np.flatnonzero(active):
                    self.charges.append((int(senders[t]), idx, k, float(power(far[t]) * chan.t_msg)))
        self.latency = elapsed


def _power_fn(chan: ChannelParams):
    def power(d):
        return chan.p_ref * (max(float(d), D_MIN) / chan.d_ref) ** chan.alpha

    return power


def run_round(
    members,
    leader: int,
    txs,
    cconf: ConsensusConfig,
    chan: ChannelParams,
    rng: np.random.Generator,
    *,
    ledger: LedgerState | None = None,
    chain_id: int = 0,
    now: float = 0.0,
    strict: bool = False,
    min_members: int = 4,
    satellite_delay: float = SATELLITE_DELAY_S,
    proposal: Block | None = None,
    muted=(),
) -> RoundOutcome:
    """One three-phase round; see the module docstring for the loss model.

    With a ``ledger`` the proposal extends ``chain_id`` and replicas check it
    with ledger validation; the block is not appended here.  A prebuilt
    ``proposal`` replaces the block the leader would build from ``txs``.
    Ids in ``muted`` (distrusted members) get no transmit slot in the
    prepare and commit phases but still count towards ``n``.
    """
    nodes = sorted(members, key=lambda n: n.id)
    ids = [n.id for n in nodes]
    if leader not in ids:
        raise ValueError("leader must be a member")
    if len(nodes) < min_members:
        raise ValueError(f"need at least {min_members} members, got {len(nodes)}")
    n = len(nodes)
    f = fault_tolerance(n)
    quorum = 2 * f + 1
    retries = cconf.max_retries
    pos = {nid: i for i, nid in enumerate(ids)}
    li = pos[leader]
    behavior = [nd.behavior for nd in nodes]
    honest = np.array([b is Behavior.HONEST for b in behavior])
    byz = np.array([b is Behavior.BYZANTINE for b in behavior])
    fault = np.array([b is Behavior.FAULT for b in behavior])
    odd = np.array([i % 2 == 1 for i in ids])

    # common random numbers for both modes
    u = rng.random((3, n, n, retries + 1))

    q_impossible = int(honest.sum()) < quorum
    if q_impossible and strict:
        raise QuorumImpossible(f"{int(honest.sum())} honest < quorum {quorum}")

    dist = distance_matrix(nodes)
    prop = propagation_matrix(nodes, chan.prop_speed, satellite_delay)
    max_delay = float(prop.max()) if n > 1 else 0.0
    timeout = cconf.phase_timeout or default_phase_timeout(chan, max_delay)
    power = _power_fn(chan)
    zero = {nid: 0.0 for nid in ids}

    if proposal is not None:
        block = proposal
    elif ledger is not None:
        block = build_block(chain_id, txs, ledger)
    else:
        block = make_block(chain_id, 0, 0, txs)
    if fault[li]:
        return RoundOutcome(False, None, zero, timeout, 0, 0, 0, q_impossible, True,
                            (0, 0, 0), (), tuple(i for i, fl in zip(ids, fault) if fl))
    if ledger is not None:
        def valid(b):
            return block_is_valid(b, ledger, now)
    else:
        def valid(b):
            return b is block

    p_plain = link_success_prob(False, chan)
    p_boost = link_success_prob(True, chan)
    p_bs = backscatter_success_prob(chan)
    others = ~np.eye(n, dtype=bool)

    # pre-prepare: never boosted, identical in both modes
    pp = []
    if byz[li]:
        # even ids get a block padded with a forged payment, which honest
        # replicas reject on signature; odd ids get the genuine proposal
        victim = next((i for i in ids if i != leader), leader + 1)
        forged = make_block(block.chain_id, block.height, block.prev_hash,
                            list(block.txs) + [forge_transaction(leader, victim, now)], block.anchors)
        if ledger is not None and block_is_valid(forged, ledger, now):
            raise AssertionError("forged proposal passed validation")
        pp.append(_Tx(li, others[li] & ~odd, p_plain, False, False))
        pp.append(_Tx(li, others[li] & odd, p_plain, False, True))
    else:
        pp.append(_Tx(li, others[li].copy(), p_plain, False, True))
    ph0 = _Phase(PRE_PREPARE, pp, u, dist, prop, power, chan, retries, timeout)
    got_block = np.zeros(n, dtype=bool)
    for t, tx in enumerate(pp):
        if tx.vote:
            got_block |= ph0.delivered[t]
    block_ok = valid(block)
    accepted = honest & got_block & block_ok
    if honest[li]:
        accepted[li] = block_ok

    # role pairing is blind to behaviour
    if cconf.mode is Mode.SPBFT:
        pairs, _ = assign_symbiotic_roles(nodes, cconf, leader)
    else:
        pairs = {}
    stx_of = {pos[a]: pos[b] for a, b in pairs.items()}
    ptx_of = {b: a for a, b in stx_of.items()}

    def phase_txs(speakers, votes):
        out = []
        for s in np.flatnonzero(speakers):
            if s in ptx_of and speakers[ptx_of[s]]:
                p, bs = p_bs, True
            elif s in stx_of and not fault[stx_of[s]]:
                p, bs = p_boost, False
            else:
                p, bs = p_plain, False
            if byz[s]:
                # equivocation: forged-hash votes to even ids, genuine to odd ids
                out.append(_Tx(s, others[s] & ~odd, p, bs, False))
                out.append(_Tx(s, others[s] & odd, p, bs, True))
            else:
                out.append(_Tx(s, others[s].copy(), p, bs, bool(votes[s])))
        return out

    def tally(ph, txs_):
        count = np.zeros(n, dtype=int)
        for t, tx in enumerate(txs_):
            if tx.vote:
                count += ph.delivered[t]
        return count

    # prepare: the leader's pre-prepare stands in for its prepare
    silenced = np.array([i in set(muted) for i in ids])
    prep_speakers = (accepted | byz) & ~silenced
    prep_speakers[li] = False
    tx1 = phase_txs(prep_speakers, accepted)
    ph1 = _Phase(PREPARE, tx1, u, dist, prop, power, chan, retries, timeout)
    prep_count = accepted.astype(int) + tally(ph1, tx1)
    prep_count += np.where(np.arange(n) != li, got_block, False)
    prepared = accepted & (prep_count >= quorum)

    # commit: acceptors all speak; only prepared ones carry a vote
    commit_speakers = (accepted | byz) & ~silenced
    tx2 = phase_txs(commit_speakers, prepared)
    ph2 = _Phase(COMMIT, tx2, u, dist, prop, power, chan, retries, timeout)
    commit_count = prepared.astype(int) + tally(ph2, tx2)
    committed_nodes = prepared & (commit_count >= quorum)
    committed = bool(int((committed_nodes & honest).sum()) >= quorum) and not q_impossible

    phases = (ph0, ph1, ph2)
    charges = []
    for ph in phases:
        charges.extend((ids[s], k, a, e) for s, k, a, e in ph.charges)
    energy = dict(zero)
    by_node: dict[int, list] = {}
    for nid, _, _, e in charges:
        by_node.setdefault(nid, []).append(e)
    for nid, es in by_node.items():
        energy[nid] = math.fsum(es)

    active = bs_msgs = 0
    for ph, group in zip(phases, (pp, tx1, tx2)):
        for t, tx in enumerate(group):
            if tx.backscatter:
                bs_msgs += int(ph.attempts[t])
            else:
                active += int(ph.attempts[t])

    forged = 0
    if committed and ledger is not None:
        forged = sum(1 for tx in block.txs if not signature_ok(tx, ledger))

    silent = tuple(i for i, fl in zip(ids, fault) if fl)
    return RoundOutcome(
        committed=committed,
        block=block if committed else None,
        energy_per_node=energy,
        round_latency=ph0.latency + ph1.latency + ph2.latency,
        active_msgs=active,
        backscatter_msgs=bs_msgs,
        forged_committed=forged,
        quorum_impossible=q_impossible,
        leader_failed=False,
        phase_attempts=tuple(ph.max_attempts for ph in phases),
        committers=tuple(ids[i] for i in np.flatnonzero(committed_nodes & honest)),
        silent=silent,
        charges=tuple(charges),
    )
