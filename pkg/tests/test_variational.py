import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitweave.measures import (LocallyConstantObservable, TestFunctionFamily,
                                 bernoulli, frequency_observable,
                                 markov_entropy)
from orbitweave.systems import ShiftSpace, full_shift, golden_mean_shift
from orbitweave.variational import (EmptyConstraintError, ReducibleLiftError,
                                    constrained_sup, count_at, gibbs_data,
                                    pressure, pressure_curve,
                                    shrink_experiment, spectrum)

FULL = full_shift(2)
PHI = frequency_observable(1)
FAMILY = TestFunctionFamily("cylinder", 16, 2)


def binary_entropy(p):
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def test_pressure_unweighted_is_topological_entropy():
    assert pressure(FULL, PHI, 0.0) == pytest.approx(math.log(2), abs=1e-11)
    gm = golden_mean_shift()
    golden = (1 + math.sqrt(5)) / 2
    assert pressure(gm, PHI, 0.0) == pytest.approx(math.log(golden), abs=1e-10)


@given(st.floats(-8, 8))
@settings(max_examples=60, deadline=None)
def test_pressure_closed_form_full_shift(q):
    assert pressure(FULL, PHI, q) == pytest.approx(math.log(1 + math.exp(q)),
                                                   abs=1e-10)


def test_pressure_large_negative_q():
    assert pressure(FULL, PHI, -40.0) == pytest.approx(0.0, abs=1e-12)


def test_pressure_curve_convex_with_derivatives():
    curve = pressure_curve(FULL, PHI, [-2, -1, 0, 1, 2])
    assert len(curve.samples) == 5
    assert len(curve.derivatives) == 3
    ds = [d for _, d in curve.derivatives]
    assert ds == sorted(ds)  # derivative of a convex function increases


def test_pressure_curve_rejects_nonconvex_samples():
    from orbitweave.variational import PressureCurve
    with pytest.raises(ValueError):
        PressureCurve(PHI, [(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)])


def test_reducible_lift_rejected():
    reducible = ShiftSpace(2, ((1, 1), (0, 1)))
    with pytest.raises(ReducibleLiftError):
        pressure(reducible, PHI, 0.0)


def test_gibbs_measure_is_bernoulli_on_full_shift():
    chain, words, integral, P = gibbs_data(FULL, PHI, 1.0)
    sigma = math.exp(1) / (1 + math.exp(1))
    assert integral == pytest.approx(sigma, abs=1e-9)
    assert chain.P[0][1] == pytest.approx(sigma, abs=1e-9)
    assert chain.P[0][1] == pytest.approx(chain.P[1][1], abs=1e-9)


def test_constrained_sup_binary_entropy():
    for alpha in (0.1, 0.25, 0.5, 0.62, 0.9):
        pt = constrained_sup(FULL, PHI, alpha)
        assert pt.h_var == pytest.approx(binary_entropy(alpha), abs=1e-9)
        assert pt.maximizer_integral == pytest.approx(alpha, abs=1e-8)
        assert abs(pt.duality_gap) <= 1e-8
        assert 0.0 <= pt.h_var <= math.log(2)


def test_constrained_sup_symmetric_maximum():
    pt = constrained_sup(FULL, PHI, 0.5)
    assert pt.h_var == pytest.approx(math.log(2), abs=1e-10)
    assert pt.maximizer.P[0][1] == pytest.approx(0.5, abs=1e-8)


def test_constrained_sup_endpoint_limits():
    pt = constrained_sup(FULL, PHI, 0.0)
    assert pt.endpoint_limit
    assert pt.h_var == pytest.approx(0.0, abs=1e-9)
    pt1 = constrained_sup(FULL, PHI, 1.0)
    assert pt1.h_var == pytest.approx(0.0, abs=1e-9)


def test_constrained_sup_empty_constraint():
    pt = constrained_sup(FULL, PHI, 1.5)
    assert pt.empty
    assert pt.h_var is None


def test_constrained_sup_golden_mean_range():
    gm = golden_mean_shift()
    # the golden-mean shift cannot average more 1s than every other symbol
    assert constrained_sup(gm, PHI, 0.7).empty
    pt = constrained_sup(gm, PHI, 0.3)
    assert 0.0 < pt.h_var <= math.log((1 + math.sqrt(5)) / 2) + 1e-12


def test_concavity_of_spectrum():
    alphas = [0.2, 0.3, 0.4, 0.5]
    hs = [constrained_sup(FULL, PHI, a).h_var for a in alphas]
    for i in range(1, len(hs) - 1):
        assert hs[i] >= 0.5 * (hs[i - 1] + hs[i + 1]) - 1e-9


def test_spectrum_open_interval_sup():
    res = spectrum(FULL, PHI, 0.25, 0.35, False, [0.27, 0.3, 0.33])
    oracle = binary_entropy(0.35)  # one-sided limit at the nearer endpoint
    assert res.sup_value == pytest.approx(oracle, abs=1e-9)
    assert all(0.25 < p.alpha < 0.35 for p in res.points)
    assert any(p.endpoint_limit for p in res.endpoint_points)


def test_spectrum_closed_vs_interior():
    closed = spectrum(FULL, PHI, 0.3, 0.4, True, [0.3, 0.35, 0.4])
    interior = spectrum(FULL, PHI, 0.3, 0.4, False, [0.31, 0.35, 0.39])
    assert abs(closed.sup_value - interior.sup_value) <= 1e-6


def test_spectrum_full_range():
    res = spectrum(FULL, PHI, 0.0, 1.0, True,
                   [i / 10 for i in range(1, 10)])
    assert res.sup_value == pytest.approx(math.log(2), abs=1e-10)
    assert res.sup_alpha == 0.5


def test_spectrum_empty_constraint():
    gm = golden_mean_shift()
    with pytest.raises(EmptyConstraintError):
        spectrum(gm, PHI, 0.8, 0.95, True, [0.85, 0.9])


def test_spectrum_attaches_counts():
    res = spectrum(FULL, PHI, 0.0, 1.0, True, [0.5], count_n=12)
    [pt] = res.points
    assert pt.n_count == 12
    assert pt.h_count == pytest.approx(math.log(math.comb(12, 6)) / 12)


def test_count_at_binomial():
    est = count_at(FULL, PHI, 0.26, 12)  # nearest achievable is 3/12
    assert est.diagnostics[0][1] == math.comb(12, 3)


def test_shrink_center_is_global_max():
    rows = shrink_experiment(FULL, bernoulli(0.5), FAMILY,
                             [0.2, 0.1, 0.05], 20, seed=3)
    for _, sup_hat in rows:
        assert sup_hat == pytest.approx(math.log(2), abs=1e-9)


def test_shrink_whole_space_ball():
    rows = shrink_experiment(FULL, bernoulli(0.8), FAMILY, [1.0], 30, seed=4)
    assert rows[0][1] == pytest.approx(math.log(2), abs=1e-3)


def test_shrink_profile_monotone_and_bounded():
    nu = bernoulli(0.8)
    rows = shrink_experiment(FULL, nu, FAMILY, [0.2, 0.1, 0.05, 0.02],
                             40, seed=5)
    sups = [s for _, s in rows]
    assert all(a >= b - 1e-12 for a, b in zip(sups, sups[1:]))
    assert all(s >= markov_entropy(nu) - 1e-9 for s in sups)


def test_shrink_requires_decreasing_grid():
    with pytest.raises(ValueError):
        shrink_experiment(FULL, bernoulli(0.5), FAMILY, [0.1, 0.2], 5, seed=0)
