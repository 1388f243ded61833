import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbn.channel import ChannelParams, tx_power
from sbn.consensus import (
    ConsensusConfig,
    Mode,
    QuorumImpossible,
    assign_symbiotic_roles,
    fault_tolerance,
    run_round,
)
from sbn.ledger import LedgerState, ServiceKind, ServiceTransaction, Symbiosis, node_secret, sign
from sbn.nodes import Behavior, NodeKind, SrdNode
from sbn.sim import SimConfig, compare_protocols, desk_scenario

CH = ChannelParams()
LOSSLESS = ChannelParams(gamma_th=1e-12, kappa=1.0)
PBFT = ConsensusConfig(mode=Mode.PBFT)
SPBFT = ConsensusConfig(mode=Mode.SPBFT)


def square(side=100.0, behaviors=None):
    pts = [(0.0, 0.0), (side, 0.0), (0.0, side), (side, side)]
    behaviors = behaviors or [Behavior.HONEST] * 4
    return [SrdNode(i, NodeKind.BASE_STATION, (x, y, 0.0), behavior=b) for i, ((x, y), b) in enumerate(zip(pts, behaviors))]


def random_members(seed, n):
    rng = np.random.default_rng(seed)
    return [SrdNode(i, NodeKind.BASE_STATION, (float(x), float(y), 0.0))
            for i, (x, y) in enumerate(rng.uniform(0, 600, (n, 2)))]


@pytest.mark.parametrize("n,f", [(1, 0), (3, 0), (4, 1), (6, 1), (7, 2), (20, 6)])
def test_fault_tolerance(n, f):
    assert fault_tolerance(n) == f


def test_pairing_nearest_and_leader_never_backscatters():
    nodes = square()
    pairs, unpaired = assign_symbiotic_roles(nodes, SPBFT)
    assert pairs == {0: 1, 2: 3} and not unpaired
    pairs, _ = assign_symbiotic_roles(nodes, SPBFT, leader=3)
    assert pairs == {0: 1, 3: 2}
    pairs, unpaired = assign_symbiotic_roles(nodes, ConsensusConfig(pairing_range=50.0))
    assert pairs == {} and unpaired == {0, 1, 2, 3}


def test_lossless_pbft_energy_oracle():
    nodes = square()
    out = run_round(nodes, 0, [], PBFT, LOSSLESS, np.random.default_rng(0))
    assert out.committed and out.active_msgs == 1 + 3 + 4 and out.backscatter_msgs == 0
    far = 100.0 * math.sqrt(2)
    # every broadcast must reach the diagonal corner
    assert out.total_energy == pytest.approx(8 * tx_power(far, LOSSLESS) * LOSSLESS.t_msg)
    assert out.total_energy == pytest.approx(math.fsum(out.energy_per_node.values()))


def test_lossless_spbft_uses_backscatter():
    nodes = square()
    out = run_round(nodes, 0, [], SPBFT, LOSSLESS, np.random.default_rng(0))
    # pairs 0->1 and 2->3: STx 1 backscatters only in commit (leader 0 skips prepare)
    assert out.committed
    assert out.backscatter_msgs == 1 + 2
    assert out.active_msgs == 1 + 2 + 2
    pbft = run_round(nodes, 0, [], PBFT, LOSSLESS, np.random.default_rng(0))
    assert out.total_energy < pbft.total_energy


def test_two_byzantine_of_four_cannot_reach_quorum():
    nodes = square(behaviors=[Behavior.HONEST, Behavior.BYZANTINE, Behavior.BYZANTINE, Behavior.HONEST])
    out = run_round(nodes, 0, [], SPBFT, CH, np.random.default_rng(1))
    assert out.quorum_impossible and not out.committed and out.forged_committed == 0
    with pytest.raises(QuorumImpossible):
        run_round(nodes, 0, [], SPBFT, CH, np.random.default_rng(1), strict=True)


def test_fault_leader_times_out():
    nodes = square(behaviors=[Behavior.FAULT] + [Behavior.HONEST] * 3)
    out = run_round(nodes, 0, [], SPBFT, CH, np.random.default_rng(2))
    assert out.leader_failed and not out.committed and out.total_energy == 0.0


def test_member_checks():
    with pytest.raises(ValueError):
        run_round(square(), 9, [], SPBFT, CH, np.random.default_rng(0))
    with pytest.raises(ValueError):
        run_round(square()[:3], 0, [], SPBFT, CH, np.random.default_rng(0))


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.integers(4, 16), st.integers(0, 3))
def test_spbft_never_costs_more_than_pbft(seed, n, retries):
    nodes = random_members(seed, n)
    a = run_round(nodes, 0, [], replace(PBFT, max_retries=retries), CH, np.random.default_rng(seed))
    b = run_round(nodes, 0, [], replace(SPBFT, max_retries=retries), CH, np.random.default_rng(seed))
    assert b.total_energy <= a.total_energy


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_byzantine_leader_never_commits_a_forgery(seed):
    nodes = random_members(seed, 7)
    nodes[0].behavior = Behavior.BYZANTINE
    nodes[3].behavior = Behavior.BYZANTINE
    ledger = LedgerState(balances={i: 50 for i in range(7)}, secrets={i: node_secret(i, seed) for i in range(7)})
    raw = ServiceTransaction(1, ServiceKind.COMPUTE, 2, 5, 3, 0.0, Symbiosis.OBLIGATE, 0)
    out = run_round(nodes, 0, [sign(raw, ledger.secret_of(2))], SPBFT, CH, np.random.default_rng(seed),
                    ledger=ledger)
    assert out.forged_committed == 0
    if out.committed:
        assert [t.tx_id for t in out.block.txs] == [1]


def test_backscatter_raises_success_when_retries_are_scarce():
    cfg = SimConfig(scenario=desk_scenario(), consensus=ConsensusConfig(max_retries=0))
    r = compare_protocols(cfg, 0, 300)
    assert r.success_spbft.mean() > r.success_pbft.mean()
    assert np.all(r.energy_spbft <= r.energy_pbft)


def line(xs):
    return [SrdNode(i + 1, NodeKind.GROUND, (x, 0.0, 0.0)) for i, x in enumerate(xs)]


def test_pairing_reference_examples():
    cfg = ConsensusConfig(pairing_range=50.0)
    assert assign_symbiotic_roles(line([0.0, 10.0]), cfg) == ({1: 2}, set())
    assert assign_symbiotic_roles(line([0.0]), cfg) == ({}, {1})
    assert assign_symbiotic_roles(line([0.0, 20.0, 60.0]), cfg) == ({1: 2}, {3})
