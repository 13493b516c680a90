"""Probability measures on state space and the weak* metric.

Empirical measures are finitely supported; Markov measures carry an exact
entropy formula; mixtures of Markov measures stay explicit weighted lists so
entropy is affine by construction.  The weak* distance is evaluated against a
deterministic truncated test-function family (cylinder indicators on shifts,
dyadic hats on intervals); every reported distance is exact for the truncated
family and the truncation tail bound is 2^-N.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .systems import ShiftSpace, State, System, Word, apply_map, orbit

__all__ = [
    "AtomicMeasure",
    "MarkovMeasure",
    "MixtureMeasure",
    "TestFunctionFamily",
    "MeasureBall",
    "CylinderIndicator",
    "HatFunction",
    "LocallyConstantObservable",
    "bernoulli",
    "empirical",
    "weak_star_distance",
    "markov_entropy",
    "integrate",
    "convex_decompose",
    "limit_measures",
    "DecompositionError",
    "measure_from_json",
    "measure_to_json",
]


class DecompositionError(ValueError):
    """Rational convex decomposition missed its 1/k target under the cap."""

    def __init__(self, msg, achieved):
        super().__init__(msg)
        self.achieved = achieved


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely supported probability measure: tuple of (state, weight)."""

    atoms: tuple[tuple[State, float], ...]

    def __post_init__(self):
        total = sum(w for _, w in self.atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")
        if any(w <= 0 for _, w in self.atoms):
            raise ValueError("weights must be positive")

    @staticmethod
    def dirac(x: State) -> "AtomicMeasure":
        return AtomicMeasure(((x, 1.0),))


class MarkovMeasure:
    """Row-stochastic matrix plus its stationary vector; shift-invariant measure."""

    def __init__(self, stochastic, stationary=None, shift: ShiftSpace | None = None):
        P = np.asarray(stochastic, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("stochastic matrix must be square")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("rows must be nonnegative and sum to 1 within 1e-12")
        self.P = P
        if stationary is None:
            stationary = _stationary_vector(P)
        pi = np.asarray(stationary, dtype=float)
        if np.any(np.abs(pi @ P - pi) > 1e-10):
            raise ValueError("stationary vector is not fixed by the matrix")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("stationary vector must sum to 1")
        self.pi = pi
        if shift is not None:
            for i in range(P.shape[0]):
                for j in range(P.shape[0]):
                    if P[i, j] > 0 and not shift.allowed(i, j):
                        raise ValueError("support transition forbidden by the SFT")
        self.shift = shift

    @property
    def alphabet_size(self) -> int:
        return self.P.shape[0]

    def cylinder_mass(self, w: Sequence[int]) -> float:
        if len(w) == 0:
            return 1.0
        m = self.pi[w[0]]
        for a, b in zip(w, w[1:]):
            m *= self.P[a, b]
        return float(m)

    def sample_word(self, n: int, rng) -> tuple[int, ...]:
        k = self.alphabet_size
        out = [int(rng.choice(k, p=self.pi))]
        for _ in range(n - 1):
            out.append(int(rng.choice(k, p=self.P[out[-1]])))
        return tuple(out)

    def __eq__(self, other):
        return (isinstance(other, MarkovMeasure)
                and np.array_equal(self.P, other.P)
                and np.array_equal(self.pi, other.pi))

    def __repr__(self):
        return f"MarkovMeasure(P={self.P.tolist()})"


@dataclass(frozen=True)
class MixtureMeasure:
    """Explicit convex combination of Markov measures (never collapsed)."""

    components: tuple[tuple[Union[float, Fraction], MarkovMeasure], ...]

    def __post_init__(self):
        total = sum(float(a) for a, _ in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if any(float(a) <= 0 for a, _ in self.components):
            raise ValueError("mixture weights must be positive")

    def cylinder_mass(self, w) -> float:
        return sum(float(a) * m.cylinder_mass(w) for a, m in self.components)


def bernoulli(p, shift: ShiftSpace | None = None) -> MarkovMeasure:
    """Bernoulli measure: i.i.d. symbols with the given probability vector
    (a scalar p means the 2-letter (1-p, p) measure)."""
    if np.isscalar(p):
        probs = np.array([1.0 - float(p), float(p)])
    else:
        probs = np.asarray(p, dtype=float)
    P = np.tile(probs, (len(probs), 1))
    return MarkovMeasure(P, probs, shift=shift)


@dataclass(frozen=True)
class CylinderIndicator:
    word: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.word)

    def matches(self, x: Word) -> bool:
        return all(x.symbol(i) == s for i, s in enumerate(self.word))


@dataclass(frozen=True)
class HatFunction:
    """Tent basis function on a dyadic grid over [lo, hi], sup norm 1."""

    level: int
    position: int
    lo: float
    hi: float

    def __call__(self, x: float) -> float:
        nodes = 2 ** self.level
        h = (self.hi - self.lo) / nodes
        c = self.lo + self.position * h
        return max(0.0, 1.0 - abs(x - c) / h)


@dataclass(frozen=True)
class LocallyConstantObservable:
    """Function of the first `depth` symbols of a shift point."""

    depth: int
    table: tuple[tuple[tuple[int, ...], float], ...]

    def value(self, w: Sequence[int]) -> float:
        key = tuple(w[: self.depth])
        for pat, v in self.table:
            if pat == key:
                return v
        raise KeyError(f"no value for word {key}")

    def lookup(self) -> dict:
        return dict(self.table)

    @property
    def value_range(self) -> tuple[float, float]:
        vals = [v for _, v in self.table]
        return min(vals), max(vals)


def frequency_observable(symbol: int, alphabet_size: int = 2) -> LocallyConstantObservable:
    table = tuple(((a,), 1.0 if a == symbol else 0.0) for a in range(alphabet_size))
    return LocallyConstantObservable(depth=1, table=table)


class TestFunctionFamily:
    """Deterministic truncated family behind the weak* metric.

    Cylinder kind: indicators of cylinders ordered by (length, lexicographic).
    Hat kind: dyadic hat functions ordered by (level, position).
    All sup norms equal 1; the tail bound of the truncation is 2^-N.
    """

    __test__ = False  # not a test case despite the class name prefix

    def __init__(self, kind: str, N: int, alphabet_size: int = 2,
                 interval: tuple[float, float] = (0.0, 1.0)):
        if N < 1:
            raise ValueError("truncation N must be >= 1")
        self.kind = kind
        self.N = N
        self.alphabet_size = alphabet_size
        self.interval = interval
        if kind == "cylinder":
            self.functions = list(itertools.islice(
                _enumerate_cylinders(alphabet_size), N))
        elif kind == "hat":
            self.functions = list(itertools.islice(
                _enumerate_hats(*interval), N))
        else:
            raise ValueError(f"unknown family kind {kind!r}")
        self.norms = [1.0] * N

    @property
    def tail(self) -> float:
        return 2.0 ** (-self.N)

    @property
    def max_depth(self) -> int:
        if self.kind != "cylinder":
            raise ValueError("depth only meaningful for cylinder families")
        return max(f.depth for f in self.functions)

    def to_json(self) -> dict:
        return {"kind": self.kind, "N": self.N}


def _enumerate_cylinders(k: int):
    length = 1
    while True:
        for w in itertools.product(range(k), repeat=length):
            yield CylinderIndicator(w)
        length += 1


def _enumerate_hats(lo: float, hi: float):
    level = 0
    while True:
        for pos in range(2 ** level + 1):
            yield HatFunction(level, pos, lo, hi)
        level += 1


def empirical(system: System, x: State, n: int) -> AtomicMeasure:
    """Uniform mass along the first n orbit points; equal atoms merged."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = orbit(system, x, n)
    merged: dict = {}
    for p in pts:
        key = _atom_key(p)
        if key in merged:
            merged[key] = (merged[key][0], merged[key][1] + 1)
        else:
            merged[key] = (p, 1)
    return AtomicMeasure(tuple((p, c / n) for p, c in merged.values()))


def _atom_key(p):
    if isinstance(p, Word):
        # canonical finite key; exact for the stored representation
        return ("w", p.head, p.cycle)
    return ("r", p)


def integrate(measure, phi) -> float:
    """Exact integral of a test function or locally constant observable."""
    if isinstance(phi, CylinderIndicator):
        if isinstance(measure, AtomicMeasure):
            return sum(w for x, w in measure.atoms if phi.matches(x))
        if isinstance(measure, (MarkovMeasure, MixtureMeasure)):
            return measure.cylinder_mass(phi.word)
        raise TypeError(f"cannot integrate {type(measure).__name__}")
    if isinstance(phi, HatFunction):
        if isinstance(measure, AtomicMeasure):
            return sum(w * phi(float(x)) for x, w in measure.atoms)
        raise TypeError("hat functions integrate against atomic measures only")
    if isinstance(phi, LocallyConstantObservable):
        if isinstance(measure, AtomicMeasure):
            out = 0.0
            for x, w in measure.atoms:
                if not isinstance(x, Word):
                    raise TypeError("locally constant observables need shift states")
                out += w * phi.value(x.prefix(phi.depth))
            return out
        if isinstance(measure, MixtureMeasure):
            return sum(float(a) * integrate(m, phi) for a, m in measure.components)
        if isinstance(measure, MarkovMeasure):
            k = measure.alphabet_size
            out = 0.0
            for w in itertools.product(range(k), repeat=phi.depth):
                m = measure.cylinder_mass(w)
                if m > 0:
                    out += m * phi.value(w)
            return out
    raise TypeError(f"unsupported observable {type(phi).__name__}")


def weak_star_distance(mu, nu, family: TestFunctionFamily) -> float:
    """Truncated weak* distance sum_{i<=N} |int phi_i dmu - int phi_i dnu| / 2^(i+1).

    The omitted tail is bounded by family.tail = 2^-N.
    """
    total = 0.0
    for i, phi in enumerate(family.functions, start=1):
        diff = abs(integrate(mu, phi) - integrate(nu, phi))
        total += diff / (2.0 ** (i + 1) * family.norms[i - 1])
    return total


@dataclass(frozen=True)
class MeasureBall:
    center: object
    radius: float

    def __post_init__(self):
        if not (0 < self.radius <= 1.0):
            raise ValueError("radius must be in (0, 1] since the metric is <= 1")


def markov_entropy(m) -> float:
    """Entropy in nats: -sum pi_i P_ij log P_ij, affine on mixtures."""
    if isinstance(m, MixtureMeasure):
        return sum(float(a) * markov_entropy(c) for a, c in m.components)
    P, pi = m.P, m.pi
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
    return float(-(pi[:, None] * P * logs).sum())


def _stationary_vector(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def convex_decompose(nu, k: int, family: TestFunctionFamily,
                     denominator_cap: int = 10_000):
    """Rational convex combination of the ergodic components within 1/k.

    Ergodic Markov input returns itself with coefficient 1.  Mixtures get the
    smallest-denominator rational reweighting whose weak* distance to the
    input is <= 1/k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(nu, MarkovMeasure):
        return [(Fraction(1), nu)]
    if not isinstance(nu, MixtureMeasure):
        raise TypeError("expected MarkovMeasure or MixtureMeasure")
    weights = [a for a, _ in nu.components]
    comps = [m for _, m in nu.components]
    if all(isinstance(a, Fraction) for a in weights):
        return [(a, m) for a, m in nu.components]
    target = 1.0 / k
    best = None
    for q in range(1, denominator_cap + 1):
        fracs = _rational_weights(weights, q)
        if fracs is None:
            continue
        cand = MixtureMeasure(tuple(zip(fracs, comps)))
        d = weak_star_distance(nu, cand, family)
        if best is None or d < best[0]:
            best = (d, list(zip(fracs, comps)))
        if d <= target:
            return list(zip(fracs, comps))
    raise DecompositionError(
        f"no denominator <= {denominator_cap} reaches 1/{k}; "
        f"achieved {best[0] if best else math.inf}",
        achieved=best[0] if best else math.inf)


def _rational_weights(weights, q):
    """Round weights to multiples of 1/q, keeping positivity and total 1."""
    counts = [max(1, round(float(w) * q)) for w in weights]
    excess = sum(counts) - q
    order = sorted(range(len(counts)),
                   key=lambda i: counts[i] - float(weights[i]) * q,
                   reverse=excess > 0)
    idx = 0
    while excess != 0 and idx < 10 * len(counts):
        i = order[idx % len(counts)]
        step = -1 if excess > 0 else 1
        if counts[i] + step >= 1:
            counts[i] += step
            excess += step
        idx += 1
    if excess != 0:
        return None
    return [Fraction(c, q) for c in counts]


def limit_measures(system: System, x: State, horizon: int,
                   family: TestFunctionFamily, cluster_tol: float,
                   grid_ratio: float = 1.2) -> list[AtomicMeasure]:
    """Cluster representatives of the empirical measures along a geometric
    n-grid: a finite stand-in for the limit-measure set of the orbit."""
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    grid = []
    n = 10
    while n < horizon:
        grid.append(n)
        n = max(n + 1, int(round(n * grid_ratio)))
    grid.append(horizon)
    mus = [empirical(system, x, n) for n in grid]
    # single-linkage clustering under the weak* distance
    parent = list(range(len(mus)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(mus)):
        for j in range(i + 1, len(mus)):
            if weak_star_distance(mus[i], mus[j], family) < cluster_tol:
                parent[find(i)] = find(j)
    reps: dict[int, int] = {}
    for i in range(len(mus)):
        reps[find(i)] = i  # keep the largest-n member per cluster
    return [mus[i] for i in sorted(reps.values())]


def measure_from_json(doc, shift: ShiftSpace | None = None):
    """Measures from JSON: {"P": ..., "pi": ...}, {"bernoulli": p}, or
    {"mixture": [[weight, component], ...]}."""
    if "mixture" in doc:
        comps = tuple((float(w), measure_from_json(c, shift))
                      for w, c in doc["mixture"])
        return MixtureMeasure(comps)
    if "bernoulli" in doc:
        return bernoulli(doc["bernoulli"], shift=shift)
    P = doc["P"]
    pi = doc.get("pi")
    return MarkovMeasure(P, pi, shift=shift)


def measure_to_json(m) -> dict:
    if isinstance(m, MarkovMeasure):
        return {"P": m.P.tolist(), "pi": m.pi.tolist()}
    if isinstance(m, MixtureMeasure):
        return {"mixture": [[float(a), measure_to_json(c)] for a, c in m.components]}
    if isinstance(m, AtomicMeasure):
        return {"atomic": [[_state_json(x), w] for x, w in m.atoms]}
    raise TypeError(type(m).__name__)


def _state_json(x):
    if isinstance(x, Word):
        return {"head": list(x.head), "cycle": list(x.cycle)}
    return float(x)
