"""Constrained entropy maximization over Markov measures.

The supremum sup{h_mu : integral of phi equals alpha} is evaluated through
transfer-matrix pressure and Legendre duality: P(q) is the log spectral
radius of the exp(q phi)-weighted transition matrix, H(alpha) is the
infimum of P(q) - q alpha, and the maximizing measure is the Gibbs-Markov
chain read off the leading eigen-data.  For locally constant observables on
a subshift of finite type this realizes the supremum exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import EntropyEstimate, LevelSetQuery, levelset_count
from .measures import (LocallyConstantObservable, MarkovMeasure,
                       TestFunctionFamily, markov_entropy, weak_star_distance)
from .shadowing import make_rng
from .systems import ShiftSpace

__all__ = [
    "PressureCurve",
    "SpectrumPoint",
    "SpectrumResult",
    "pressure",
    "pressure_curve",
    "gibbs_data",
    "constrained_sup",
    "spectrum",
    "count_at",
    "shrink_experiment",
    "ReducibleLiftError",
    "EmptyConstraintError",
]

Q_CAP = 50.0           # |q| beyond this changes P(q) - q alpha below 1e-12
POWER_TOL = 1e-12
CONVEXITY_SLACK = 1e-9


class ReducibleLiftError(ValueError):
    """Weighted transition matrix is not irreducible."""


class EmptyConstraintError(ValueError):
    """Constraint set misses the attainable range of the observable."""


def _lift_words(shift: ShiftSpace, depth: int) -> list[tuple[int, ...]]:
    """Admissible words of the given length, the index set of the lift."""
    k = shift.alphabet_size
    return [w for w in itertools.product(range(k), repeat=depth)
            if shift.word_admissible(w)]


def _weighted_matrix(shift: ShiftSpace, phi: LocallyConstantObservable,
                     q: float):
    """Transfer matrix on (d-1)-words (1-words when d = 1) with entries
    exp(q phi) on admissible transitions; also returns the index words and,
    per edge, the d-word the observable is evaluated on."""
    d = phi.depth
    side = max(d - 1, 1)
    words = _lift_words(shift, side)
    m = len(words)
    M = np.zeros((m, m))
    eval_word = {}
    for i, u in enumerate(words):
        for j, v in enumerate(words):
            if d == 1:
                ok = shift.allowed(u[-1], v[-1])
                w = v
            else:
                ok = u[1:] == v[:-1] and shift.allowed(u[-1], v[-1])
                w = u + v[-1:]
            if ok:
                M[i, j] = math.exp(q * phi.value(w))
                eval_word[(i, j)] = w
    _require_irreducible(M)
    return M, words, eval_word


def _require_irreducible(M: np.ndarray):
    m = M.shape[0]
    B = M > 0
    for s in range(m):
        seen = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            for v in np.nonzero(B[u])[0]:
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        if len(seen) != m:
            raise ReducibleLiftError("weighted transition matrix is reducible")


def _power_eigen(M: np.ndarray, max_iter: int = 500_000):
    """Perron eigenvalue and positive right eigenvector by power iteration.

    Iterates on M + c I with an adaptive Rayleigh shift c: the shift keeps the
    iteration convergent on periodic supports (where a second eigenvalue of
    equal modulus would otherwise cycle forever) and tracking c near the
    Perron value keeps the spectral gap wide at any matrix scale.  Stops when
    the Collatz-Wielandt bounds pinch to POWER_TOL relative spread.
    """
    m = M.shape[0]
    v = np.ones(m) / m
    c = float(M.sum(axis=1).max())
    if c <= 0:
        raise ArithmeticError("matrix has no positive row")
    for _ in range(max_iter):
        Mv = M @ v
        ratios = Mv / v
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi - lo <= POWER_TOL * max(hi, 1e-300):
            return 0.5 * (lo + hi), v
        c = max(float(v @ Mv / (v @ v)), 1e-300)
        w = Mv + c * v
        v = w / np.linalg.norm(w)
    raise ArithmeticError("power iteration failed to converge")


def pressure(shift: ShiftSpace, phi: LocallyConstantObservable,
             q: float) -> float:
    """P(q) = log spectral radius of the exp(q phi)-weighted matrix."""
    M, _, _ = _weighted_matrix(shift, phi, q)
    lam, _ = _power_eigen(M)
    return math.log(lam)


@dataclass
class PressureCurve:
    observable: LocallyConstantObservable
    samples: list[tuple[float, float]]
    derivatives: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        qs = [q for q, _ in self.samples]
        ps = [p for _, p in self.samples]
        for i in range(1, len(qs) - 1):
            left = (ps[i] - ps[i - 1]) / (qs[i] - qs[i - 1])
            right = (ps[i + 1] - ps[i]) / (qs[i + 1] - qs[i])
            if right - left < -CONVEXITY_SLACK:
                raise ValueError(f"pressure samples not convex near q={qs[i]}")
        if not self.derivatives:
            self.derivatives = [
                (qs[i], (ps[i + 1] - ps[i - 1]) / (qs[i + 1] - qs[i - 1]))
                for i in range(1, len(qs) - 1)]


def pressure_curve(shift, phi, q_grid) -> PressureCurve:
    qs = sorted(q_grid)
    return PressureCurve(phi, [(q, pressure(shift, phi, q)) for q in qs])


def gibbs_data(shift: ShiftSpace, phi: LocallyConstantObservable, q: float):
    """Gibbs-Markov chain at parameter q: (measure on lifted words, words,
    integral of phi, P(q)).  The chain Q_ij = M_ij r_j / (lam r_i) with
    stationary vector l r / <l, r> is the entropy maximizer of h + q int(phi).
    """
    M, words, eval_word = _weighted_matrix(shift, phi, q)
    lam, r = _power_eigen(M)
    _, l = _power_eigen(M.T)
    Q = M * r[None, :] / (lam * r[:, None])
    Q = Q / Q.sum(axis=1, keepdims=True)  # absorb 1e-12 iteration residue
    pi = l * r
    pi = pi / pi.sum()
    chain = MarkovMeasure(Q, pi)
    integral = 0.0
    for (i, j), w in eval_word.items():
        integral += pi[i] * Q[i, j] * phi.value(w)
    return chain, words, float(integral), math.log(lam)


@dataclass
class SpectrumPoint:
    alpha: float
    h_var: float | None
    maximizer: MarkovMeasure | None
    h_count: float | None = None
    n_count: int = 0
    q_star: float | None = None
    duality_gap: float | None = None
    maximizer_integral: float | None = None
    empty: bool = False            # constraint set misses the attainable range
    endpoint_limit: bool = False   # alpha at the edge: value is a one-sided limit


def constrained_sup(shift: ShiftSpace, phi: LocallyConstantObservable,
                    alpha: float, q_cap: float = Q_CAP) -> SpectrumPoint:
    """H(alpha) = inf_q (P(q) - q alpha) with the maximizing Gibbs-Markov
    measure.  The pressure derivative (the Gibbs integral of phi) is monotone
    in q, so the infimum is located by bisection on it; alpha at or beyond the
    attainable edge comes back as a one-sided limit or tagged empty.
    """
    _, _, lo_val, _ = gibbs_data(shift, phi, -q_cap)
    _, _, hi_val, _ = gibbs_data(shift, phi, q_cap)
    if hi_val - lo_val < 1e-13:  # observable with constant invariant integral
        if abs(alpha - lo_val) <= 1e-9:
            chain, _, integral, P0 = gibbs_data(shift, phi, 0.0)
            return SpectrumPoint(alpha, P0, chain, q_star=0.0,
                                 duality_gap=0.0, maximizer_integral=integral)
        return SpectrumPoint(alpha, None, None, empty=True)
    if alpha < lo_val - 1e-9 or alpha > hi_val + 1e-9:
        return SpectrumPoint(alpha, None, None, empty=True)
    if alpha <= lo_val:
        q_star, endpoint = -q_cap, True
    elif alpha >= hi_val:
        q_star, endpoint = q_cap, True
    else:
        lo_q, hi_q = -q_cap, q_cap
        for _ in range(200):
            mid = 0.5 * (lo_q + hi_q)
            _, _, val, _ = gibbs_data(shift, phi, mid)
            if val < alpha:
                lo_q = mid
            else:
                hi_q = mid
            if hi_q - lo_q < 1e-13:
                break
        q_star, endpoint = 0.5 * (lo_q + hi_q), False
    chain, _, integral, P = gibbs_data(shift, phi, q_star)
    h = P - q_star * alpha
    h = max(h, 0.0)
    gap = markov_entropy(chain) + q_star * integral - P
    return SpectrumPoint(alpha, h, chain, q_star=q_star, duality_gap=gap,
                         maximizer_integral=integral, endpoint_limit=endpoint)


@dataclass
class SpectrumResult:
    points: list[SpectrumPoint]
    sup_value: float
    sup_alpha: float
    endpoint_points: list[SpectrumPoint] = field(default_factory=list)


def spectrum(shift: ShiftSpace, phi: LocallyConstantObservable,
             lo: float, hi: float, closed: bool,
             alpha_grid, count_n: int | None = None) -> SpectrumResult:
    """Per-alpha values over the grid restricted to the constraint interval,
    plus the supremum over the interval.  Open endpoints contribute their
    one-sided limits (H is continuous) rather than direct evaluations; the
    sup over the interior equals the sup over the closure for convex sets.
    """
    if not (lo < hi):
        raise ValueError("malformed constraint interval")
    inside = (lambda a: lo <= a <= hi) if closed else (lambda a: lo < a < hi)
    points = []
    for a in alpha_grid:
        if not inside(a):
            continue
        pt = constrained_sup(shift, phi, a)
        if pt.empty:
            continue
        if count_n is not None:
            est = count_at(shift, phi, a, count_n)
            pt.h_count = est.value
            pt.n_count = count_n
        points.append(pt)
    candidates = list(points)
    endpoint_pts = []
    for a in (lo, hi):
        pt = constrained_sup(shift, phi, a)
        if not pt.empty:
            if not closed:
                pt.endpoint_limit = True
            endpoint_pts.append(pt)
            candidates.append(pt)
    if not candidates:
        raise EmptyConstraintError(
            "constraint interval misses the attainable range")
    best = max(candidates, key=lambda p: p.h_var)
    return SpectrumResult(points, best.h_var, best.alpha,
                          endpoint_points=endpoint_pts)


def count_at(shift: ShiftSpace, phi: LocallyConstantObservable,
             alpha: float, n: int) -> EntropyEstimate:
    """Level-set counting rate at the achievable average nearest alpha.

    Birkhoff averages over n-windows live on a 1/n-grid of the observable's
    values; the window (nearest - 1/(2n), nearest + 1/(2n)) isolates exactly
    that grid value, so the count is the clean combinatorial object whose
    rate is compared against the variational value at the same point.
    """
    j = round(alpha * n)
    center = j / n
    query = LevelSetQuery(phi, center - 0.5 / n, center + 0.5 / n, n)
    est = levelset_count(shift, query)
    est.diagnostics.append(("nearest_average", center))
    return est


def shrink_experiment(shift: ShiftSpace, nu: MarkovMeasure,
                      family: TestFunctionFamily, delta_grid,
                      search_budget: int, seed: int):
    """sup{h_mu : D(mu, nu) <= delta} over Markov measures, estimated from a
    shared candidate pool so the profile is nonincreasing by construction.

    Candidates are line searches from nu toward random stochastic matrices
    (and toward the uniform one), bisected to each ball boundary, plus local
    perturbations of the per-delta best.  nu itself is always feasible, so
    the estimate never drops below its entropy.
    """
    grid = list(delta_grid)
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta_grid must be strictly decreasing")
    rng = make_rng(seed)
    k = nu.alphabet_size
    base = nu.P
    h_nu = markov_entropy(nu)
    targets = [np.full((k, k), 1.0 / k)]
    for _ in range(search_budget):
        T = rng.random((k, k)) + 1e-9
        targets.append(T / T.sum(axis=1, keepdims=True))

    def chain_at(t, T):
        return MarkovMeasure((1.0 - t) * base + t * T)

    pool: list[tuple[float, float, np.ndarray]] = []  # (distance, entropy, P)

    def add(m):
        pool.append((weak_star_distance(m, nu, family), markov_entropy(m), m.P))

    for T in targets:
        full = chain_at(1.0, T)
        add(full)
        for delta in grid:
            if weak_star_distance(full, nu, family) <= delta:
                continue
            lo_t, hi_t = 0.0, 1.0
            for _ in range(50):
                mid = 0.5 * (lo_t + hi_t)
                if weak_star_distance(chain_at(mid, T), nu, family) <= delta:
                    lo_t = mid
                else:
                    hi_t = mid
            add(chain_at(lo_t, T))
    # local refinement of the best point inside each ball
    for delta in grid:
        feas = [(h, P) for d, h, P in pool if d <= delta]
        if not feas:
            continue
        _, P = max(feas, key=lambda x: x[0])
        for _ in range(40):
            noise = rng.normal(0.0, 0.01, size=(k, k))
            cand = np.clip(P + noise, 1e-9, None)
            cand = cand / cand.sum(axis=1, keepdims=True)
            m = MarkovMeasure(cand)
            d = weak_star_distance(m, nu, family)
            h = markov_entropy(m)
            pool.append((d, h, cand))
            if d <= delta and h > markov_entropy(MarkovMeasure(P)):
                P = cand
    rows = []
    for delta in grid:
        sup_hat = max([h_nu] + [h for d, h, _ in pool if d <= delta])
        rows.append((delta, sup_hat))
    return rows
