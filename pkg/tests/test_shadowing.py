import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitweave.shadowing import (PseudoOrbit, PseudoOrbitViolation,
                                  ResourceCapError, canonical_cycle, make_rng,
                                  perturbed_orbit, shadow_interval,
                                  shadow_shift, shadowing_modulus,
                                  validate_pseudo, word_state)
from orbitweave.systems import (TentMap, Word, apply_map, dist, full_shift,
                                golden_mean_shift, orbit)


def test_validate_reports_first_violation():
    sh = full_shift(2)
    good = Word.periodic((0,))
    bad = Word.periodic((1,))
    with pytest.raises(PseudoOrbitViolation) as exc:
        validate_pseudo(sh, [good, good, bad, good], 0.25)
    assert exc.value.index == 1
    assert exc.value.gap == 1.0


def test_validate_accepts_true_orbit():
    sh = full_shift(2)
    states = orbit(sh, Word((1, 0, 1, 1), (0, 1)), 6)
    po = validate_pseudo(sh, states, 0.0)
    assert po.delta == 0.0


def test_canonical_cycle():
    gm = golden_mean_shift()
    assert canonical_cycle(gm, 0) == (0,)
    assert canonical_cycle(gm, 1) == (1, 0)
    full = full_shift(2)
    assert canonical_cycle(full, 1) == (1,)


def test_word_state_admissible_after_forbidden_tail():
    gm = golden_mean_shift()
    w = word_state(gm, (0, 0, 1))
    assert gm.admissible(w, depth=10)
    assert w.prefix(6) == (0, 0, 1, 0, 1, 0)


@given(st.integers(0, 500), st.integers(2, 9))
@settings(max_examples=60, deadline=None)
def test_perturbed_orbit_respects_delta(seed, m):
    sh = full_shift(2)
    delta = 2.0 ** -m
    x0 = word_state(sh, (0, 1, 1, 0, 1))
    po = perturbed_orbit(sh, x0, 40, delta, seed=seed)
    for a, b in zip(po.states, po.states[1:]):
        assert dist(sh, apply_map(sh, a), b, depth=64) <= delta


@given(st.integers(0, 500))
@settings(max_examples=60, deadline=None)
def test_splice_deviation_half_delta(seed):
    sh = full_shift(2)
    delta = 2.0 ** -6
    x0 = word_state(sh, (1, 0, 0, 1))
    po = perturbed_orbit(sh, x0, 80, delta, seed=seed)
    res = shadow_shift(sh, po)
    assert res.max_deviation <= delta / 2
    assert res.max_deviation == max(res.per_step)


def test_splice_on_sft_is_admissible():
    gm = golden_mean_shift()
    po = perturbed_orbit(gm, word_state(gm, (0, 1)), 120, 2.0 ** -5, seed=9)
    res = shadow_shift(gm, po)
    assert gm.admissible(res.point, depth=150)


def test_perturbed_orbit_delta_zero_is_orbit():
    f = TentMap(2.0)
    po = perturbed_orbit(f, 0.3, 10, 0.0, seed=1)
    assert list(po.states) == orbit(f, 0.3, 10)


def test_non_dyadic_delta_still_validates():
    sh = full_shift(2)
    po = perturbed_orbit(sh, word_state(sh, (0, 1, 1)), 30, 0.3, seed=4)
    validate_pseudo(sh, po.states, 0.3)


def test_shadow_interval_true_orbit():
    f = TentMap(2.0)
    po = perturbed_orbit(f, 0.37, 40, 0.0, seed=0)
    res = shadow_interval(f, po, 1e-6)
    assert res is not None
    assert res.max_deviation < 1e-6


def test_shadow_interval_reports_failure():
    f = TentMap(2.0)
    # jump by 0.8 cannot be traced within 0.01
    po = PseudoOrbit((0.1, 0.2 * 2, 1.2), delta=1.0)
    assert shadow_interval(f, po, 0.01) is None


def test_shadow_interval_resource_cap():
    f = TentMap(2.0)
    po = PseudoOrbit(tuple(orbit(f, 0.37, 10)), delta=0.0)
    with pytest.raises(ResourceCapError):
        shadow_interval(f, po, 0.9, piece_cap=1)


def test_shadow_interval_long_expanding_orbit():
    # precision check: expansion 2^100 must not empty the tracked set
    f = TentMap(2.0)
    po = perturbed_orbit(f, 0.41, 100, 1e-6, seed=12)
    res = shadow_interval(f, po, 1e-3)
    assert res is not None
    assert res.max_deviation < 1e-3


def test_pseudo_orbit_composition():
    sh = full_shift(2)
    a = perturbed_orbit(sh, word_state(sh, (0, 1)), 20, 2.0 ** -4, seed=3)
    b = perturbed_orbit(sh, a.states[-1], 20, 2.0 ** -4, seed=5)
    joined = a.states + b.states[1:]
    validate_pseudo(sh, joined, 2.0 ** -4)


def test_shadowing_modulus_shift():
    sh = full_shift(2)
    eps = 2.0 ** -5
    delta_hat, table = shadowing_modulus(sh, eps, trials=20, length=60, seed=2)
    assert delta_hat >= eps  # the splice succeeds already at delta = epsilon
    assert all(t == 20 for _, _, t in table)


def test_shadowing_modulus_tent():
    f = TentMap(2.0)
    delta_hat, table = shadowing_modulus(f, 1e-3, trials=15, length=50, seed=8)
    assert delta_hat > 0.0


def test_make_rng_deterministic():
    a = make_rng(42).integers(0, 100, size=5)
    b = make_rng(42).integers(0, 100, size=5)
    assert list(a) == list(b)
