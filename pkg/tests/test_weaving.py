import math
from fractions import Fraction

import pytest

from orbitweave.measures import (MixtureMeasure, TestFunctionFamily, bernoulli,
                                 integrate)
from orbitweave.shadowing import make_rng
from orbitweave.systems import full_shift, golden_mean_shift
from orbitweave.weaving import (BlockSearchError, build_schedule, concatenate,
                                connector, run_weave, select_blocks,
                                separation_audit, weave_point,
                                word_empirical_distance)

FAMILY = TestFunctionFamily("cylinder", 16, 2)
FULL = full_shift(2)


def test_connector_full_shift():
    s, path = connector(FULL, 0, 1)
    assert s == 1 and path == (0,)
    s, path = connector(FULL, 1, 1)
    assert s == 1 and path == (1,)  # same-cell connectors still take a step


def test_connector_golden_mean():
    gm = golden_mean_shift()
    s, path = connector(gm, 1, 1)
    assert s == 2
    assert path == (1, 0)
    s, path = connector(gm, 0, 1)
    assert s == 1 and path == (0,)


def test_connector_requires_irreducible():
    from orbitweave.systems import ShiftSpace
    reducible = ShiftSpace(2, ((1, 1), (0, 1)))
    with pytest.raises(ValueError):
        connector(reducible, 0, 1)


def test_select_blocks_invariants():
    fam = select_blocks(FULL, bernoulli(0.5), 16, 0.5, 2, 0.25,
                        budget=300, seed=7, family=FAMILY)
    assert fam.blocks
    window = range(fam.n, fam.n + 1)
    for w in fam.blocks:
        assert w[0] == fam.cell
        assert w[fam.n] == w[0]  # return to the cell at exactly n steps
        assert word_empirical_distance(w, fam.n, fam.measure, FAMILY) < 0.5
    prefixes = {w[:fam.n] for w in fam.blocks}
    assert len(prefixes) == len(fam.blocks)
    assert 16 <= fam.n <= 20
    assert 0.0 < fam.acceptance_rate <= 1.0


def test_select_blocks_deterministic_measure():
    fam = select_blocks(FULL, bernoulli(0.0), 12, 0.5, 2, 0.25,
                        budget=50, seed=1, family=FAMILY)
    assert len(fam.blocks) == 1
    assert set(fam.blocks[0]) == {0}


def test_select_blocks_budget_exhaustion():
    gm = golden_mean_shift()
    from orbitweave.measures import MarkovMeasure
    m = MarkovMeasure([[0.5, 0.5], [1.0, 0.0]], shift=gm)
    # impossible closeness demand at tiny budget
    with pytest.raises(BlockSearchError):
        select_blocks(gm, m, 8, 0.5, 10 ** 6, 0.25, budget=5, seed=0,
                      family=FAMILY)


def _single_level_schedule(n=16, min_total=0):
    m = bernoulli(0.5)
    decomposition = [[(Fraction(1), m)]]
    return build_schedule(decomposition, [[n]], [[0]],
                          lambda a, b: connector(FULL, a, b),
                          gamma=0.25, k_max=1, epsilon=0.25,
                          min_total_length=min_total)


def test_build_schedule_single_level():
    sched = _single_level_schedule()
    assert sched.certified
    assert sched.C[0][0] == Fraction(1, 16)
    assert sched.N[0] % 16 == 0
    assert sched.Y[0] == sched.N[0] + sched.X[0]
    assert sched.total_length == sched.offsets_M[-1]


def test_build_schedule_two_measures():
    decomposition = [[(Fraction(1, 2), bernoulli(0.3)),
                      (Fraction(1, 2), bernoulli(0.7))]]
    sched = build_schedule(decomposition, [[16, 16]], [[0, 1]],
                           lambda a, b: connector(FULL, a, b),
                           gamma=0.25, k_max=1, epsilon=0.25)
    assert sched.certified
    assert all((sched.N[0] * c).denominator == 1 for c in sched.C[0])
    assert sched.X[0] == 2  # two within-level connectors of length 1


def test_build_schedule_min_total_length():
    sched = _single_level_schedule(min_total=4000)
    assert sched.total_length >= 4000


def test_build_schedule_length_cap_truncates():
    m = bernoulli(0.5)
    decomposition = [[(Fraction(1), m)] for _ in range(4)]
    sched = build_schedule(decomposition, [[16]] * 4, [[0]] * 4,
                           lambda a, b: connector(FULL, a, b),
                           gamma=0.25, k_max=4, epsilon=0.25, length_cap=600)
    assert sched.truncated
    assert sched.truncation_level == sched.k_max < 4
    assert sched.total_length <= 600


def test_offsets_recurrences():
    decomposition = [[(Fraction(1), bernoulli(0.5))],
                     [(Fraction(1), bernoulli(0.5))]]
    sched = build_schedule(decomposition, [[12], [12]], [[0], [0]],
                           lambda a, b: connector(FULL, a, b),
                           gamma=0.25, k_max=2, epsilon=0.25)
    assert sched.M(1) == 0
    assert sched.M(2) == sched.T[0] * sched.Y[0] + sched.s(1, 1, 2, 1)
    assert sched.M_i(1, 3) == 2 * sched.Y[0]
    assert sched.M_ijt(1, 2, 1, 4) == sched.M_ij(1, 2, 1) + 3 * 12


def test_concatenate_length_and_block_windows():
    m = bernoulli(0.5)
    fam = select_blocks(FULL, m, 12, 0.5, 1, 0.25, budget=200, seed=3,
                        family=FAMILY)
    decomposition = [[(Fraction(1), m)]]
    sched = build_schedule(decomposition, [[fam.n]], [[fam.cell]],
                           lambda a, b: connector(FULL, a, b),
                           gamma=0.25, k_max=1, epsilon=0.25)
    po, picks = concatenate(FULL, sched, {(1, 1): fam}, seed=5)
    assert len(po.states) == sched.total_length
    # every block window holds the picked block's prefix verbatim
    for (k, j, i, t), idx in picks.items():
        off = sched.M_ijt(k, i, j, t)
        n = sched.block_lengths[k - 1][j - 1]
        got = tuple(po.states[off + p].symbol(0) for p in range(n))
        assert got == fam.blocks[idx][:n]


def test_weave_point_bernoulli_half():
    schedule, families, outcome = run_weave(
        FULL, bernoulli(0.5), FAMILY, k_max=2, gamma=0.25, block_length=12,
        epsilon=0.25, budget=300, seed=21, min_total_length=5000)
    assert outcome.total_length >= 5000
    assert outcome.final_distance <= 0.05
    assert outcome.per_block_deviation <= schedule.splice_guarantee
    ns = [n for n, _ in outcome.convergence]
    assert ns == sorted(ns)
    assert ns[-1] == outcome.total_length


def test_weave_point_mixture_target():
    mix = MixtureMeasure(((Fraction(1, 2), bernoulli(0.3)),
                          (Fraction(1, 2), bernoulli(0.7))))
    schedule, families, outcome = run_weave(
        FULL, mix, FAMILY, k_max=2, gamma=0.25, block_length=12,
        epsilon=0.25, budget=300, seed=13, min_total_length=8000)
    assert len(schedule.coefficients[0]) == 2
    assert outcome.final_distance <= 0.08
    # the empirical one-cylinder frequency approaches the mixture marginal
    freq = sum(1 for i in range(outcome.total_length)
               if outcome.point.symbol(i) == 1) / outcome.total_length
    assert abs(freq - integrate(mix, FAMILY.functions[1])) <= 0.05


def test_separation_audit_pair():
    schedule, families, outcome = run_weave(
        FULL, bernoulli(0.5), FAMILY, k_max=2, gamma=0.25, block_length=12,
        epsilon=0.25, budget=300, seed=21, min_total_length=5000)
    slot = next(iter(outcome.picks))
    fam = families[(slot[0], slot[1])]
    picks2 = dict(outcome.picks)
    picks2[slot] = (picks2[slot] + 1) % len(fam.blocks)
    out2 = weave_point(FULL, schedule, families, bernoulli(0.5), FAMILY,
                       seed=21, picks=picks2)
    assert separation_audit(FULL, schedule, outcome, out2)
    with pytest.raises(ValueError):
        separation_audit(FULL, schedule, outcome, outcome)


def test_weave_on_golden_mean():
    from orbitweave.measures import MarkovMeasure
    gm = golden_mean_shift()
    target = MarkovMeasure([[0.6, 0.4], [1.0, 0.0]], shift=gm)
    schedule, families, outcome = run_weave(
        gm, target, FAMILY, k_max=2, gamma=0.3, block_length=10,
        epsilon=0.25, budget=300, seed=2, min_total_length=4000)
    assert gm.admissible(outcome.point, depth=200)
    assert outcome.final_distance <= 0.08
