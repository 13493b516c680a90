"""Orbit weaving: schedule integers, typical-block selection with return
times, transitive connectors, pseudo-orbit concatenation, and the shadowed
point whose empirical measures track a prescribed target.

The infinite nested construction is truncated at a finite level; the
truncation level, the orbit-length cap, and the achieved empirical distance
are all reported rather than hidden.  Partition cells are depth-1 cylinders,
so the pseudo-orbit jumps stay below 1/2 and the symbolic splice shadows them
within 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .entropy import katok_entropy
from .measures import (CylinderIndicator, MarkovMeasure, MixtureMeasure,
                       TestFunctionFamily, convex_decompose, integrate)
from .shadowing import (PseudoOrbit, ShadowResult, canonical_cycle, make_rng,
                        shadow_shift, validate_pseudo, word_state)
from .systems import ShiftSpace, Word

__all__ = [
    "BlockFamily",
    "WeaveSchedule",
    "WeaveOutcome",
    "select_blocks",
    "connector",
    "build_schedule",
    "concatenate",
    "weave_point",
    "separation_audit",
    "run_weave",
    "BlockSearchError",
]

DELTA_PRIME = 0.5       # depth-1 partition cells have diameter 1/2
DEFAULT_LENGTH_CAP = 10 ** 6
DEFAULT_DENOM_CAP = 10 ** 4


class BlockSearchError(RuntimeError):
    def __init__(self, msg, attempts, accepted):
        super().__init__(msg)
        self.attempts = attempts
        self.accepted = accepted


@dataclass
class BlockFamily:
    """Separated family of typical words with a common return time and cell.

    `blocks` are sampled words (longer than n so empirical windows and the
    separation prefix are supported); each satisfies: return to its depth-1
    cell at step exactly n, and empirical distance to the measure < 1/k on
    every tested window length.
    """

    measure: MarkovMeasure
    n: int
    cell: int
    epsilon: float
    k: int
    gamma: float
    blocks: tuple[tuple[int, ...], ...]
    acceptance_rate: float
    size_bound: float
    size_bound_vacuous: bool

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("empty block family")


def word_empirical_distance(word: Sequence[int], m: int,
                            measure, family: TestFunctionFamily) -> float:
    """Weak* distance between the m-window empirical measure of a finite word
    and a Markov/mixture measure, via exact cylinder frequencies."""
    total = 0.0
    for i, phi in enumerate(family.functions, start=1):
        if not isinstance(phi, CylinderIndicator):
            raise TypeError("cylinder family required")
        d = phi.depth
        if m + d - 1 > len(word):
            raise ValueError("word too short for this window")
        hits = sum(1 for t in range(m)
                   if tuple(word[t:t + d]) == phi.word)
        total += abs(hits / m - measure.cylinder_mass(phi.word)) / 2.0 ** (i + 1)
    return total


def select_blocks(shift: ShiftSpace, measure: MarkovMeasure, n: int,
                  epsilon: float, k: int, gamma: float, budget: int, seed: int,
                  family: TestFunctionFamily | None = None,
                  katok_delta: float = 0.1) -> BlockFamily:
    """Monte-Carlo block selection from the measure, rejecting words that miss
    the return-window or empirical-closeness conditions, then pruning to a
    separated family within the most popular cell and return time."""
    if not (0 < gamma < 1):
        raise ValueError("gamma must be in (0, 1)")
    window = [q for q in range(n, int(math.floor((1 + gamma) * n)) + 1)]
    if not window:
        raise ValueError("return window [n, (1+gamma)n] contains no integer")
    q_extra = max(1, round(-math.log2(epsilon)))
    if family is None:
        family = TestFunctionFamily("cylinder", 16, shift.alphabet_size)
    depth = family.max_depth
    block_len = window[-1] + q_extra + depth
    rng = make_rng(seed)
    accepted = []  # (word, return step)
    attempts = 0
    for attempts in range(1, budget + 1):
        w = measure.sample_word(block_len, rng)
        returns = [q for q in window if w[q] == w[0]]
        if not returns:
            continue
        ok = True
        for m in range(n, block_len - depth + 2):
            if word_empirical_distance(w, m, measure, family) >= 1.0 / k:
                ok = False
                break
        if ok:
            accepted.append((w, returns))
        if len(accepted) >= budget:
            break
    if not accepted:
        raise BlockSearchError(
            f"no block accepted in {attempts} attempts", attempts, 0)
    # return time maximizing the family size, smallest on ties
    counts = {q: sum(1 for _w, rs in accepted if q in rs) for q in window}
    n_sel = min(window, key=lambda q: (-counts[q], q))
    pool = [w for w, rs in accepted if n_sel in rs]
    # common partition cell: depth-1 cylinder with the most members
    cells = {}
    for w in pool:
        cells[w[0]] = cells.get(w[0], 0) + 1
    cell = min(cells, key=lambda c: (-cells[c], c))
    pool = [w for w in pool if w[0] == cell]
    # separated pruning: distinct prefixes of length n_sel keep the woven
    # points separated at the splice accuracy (see separation_audit)
    seen = {}
    for w in pool:
        seen.setdefault(w[:n_sel], w)
    blocks = tuple(seen.values())
    est = katok_entropy(shift, measure, epsilon, katok_delta,
                        _katok_grid(q_extra))
    bound = math.exp(n_sel * (1 - gamma) * (est.value - 4 * gamma))
    return BlockFamily(
        measure=measure, n=n_sel, cell=cell, epsilon=epsilon, k=k, gamma=gamma,
        blocks=blocks, acceptance_rate=len(accepted) / attempts,
        size_bound=bound, size_bound_vacuous=bound < 1.0)


def _katok_grid(q_extra: int) -> list[int]:
    top = max(8, 22 - q_extra)
    return sorted({max(4, top // 2), top})


def connector(shift: ShiftSpace, from_cell: int, to_cell: int):
    """Shortest admissible steering word from one depth-1 cell into another:
    returns (s, path) where path has s symbols starting in from_cell and the
    step after the path lands in to_cell.  Lexicographically least among the
    shortest; same-cell connectors still take at least one step."""
    if not shift.is_irreducible():
        raise ValueError("connector needs an irreducible transition matrix")
    k = shift.alphabet_size
    # BFS on path length s >= 1: path v_0 .. v_{s-1}, v_0 = from_cell,
    # admissible internally and v_{s-1} -> to_cell allowed
    frontier = {from_cell: (from_cell,)}
    for s in range(1, k * k + 2):
        for v, path in sorted(frontier.items(), key=lambda kv: kv[1]):
            if shift.allowed(v, to_cell):
                return s, path
        nxt = {}
        for v, path in sorted(frontier.items(), key=lambda kv: kv[1]):
            for b in range(k):
                if shift.allowed(v, b) and b not in nxt:
                    nxt[b] = path + (b,)
        frontier = nxt
    raise ValueError("no admissible connector found")  # unreachable if irreducible


@dataclass
class WeaveSchedule:
    """Integer scaffolding of the weave, with all invariants certified."""

    k_max: int
    coefficients: list[list[Fraction]]         # a_{k,j}
    measures: list[list]                       # m_{k,j}
    block_lengths: list[list[int]]             # n(k,j)
    cells: list[list[int]]                     # partition cell per (k,j)
    C: list[list[Fraction]]                    # a_{k,j} / n(k,j)
    N: list[int]
    X: list[int]
    Y: list[int]
    T: list[int]
    s_table: dict
    epsilon: float
    delta_prime: float = DELTA_PRIME
    diam_xi: float = DELTA_PRIME
    splice_guarantee: float = DELTA_PRIME / 2
    truncated: bool = False
    truncation_level: int | None = None
    certified: bool = False
    offsets_M: list[int] = field(default_factory=list)

    def s(self, k1, j1, k2, j2) -> int:
        return self.s_table[(k1, j1, k2, j2)]

    def level_sizes(self) -> list[int]:
        return [len(c) for c in self.coefficients]

    # ---- offsets; indices are 1-based like the construction ----
    def M(self, q: int) -> int:
        return self.offsets_M[q - 1]

    def M_i(self, q: int, i: int) -> int:
        return self.M(q) + (i - 1) * self.Y[q - 1]

    def M_ij(self, q: int, i: int, j: int) -> int:
        base = self.M_i(q, i)
        for p in range(1, j):
            base += (self.N[q - 1] * self.block_lengths[q - 1][p - 1]
                     * self.C[q - 1][p - 1]
                     + self.s(q, p, q, p + 1))
        return int(base)

    def M_ijt(self, q: int, i: int, j: int, t: int) -> int:
        return self.M_ij(q, i, j) + (t - 1) * self.block_lengths[q - 1][j - 1]

    @property
    def total_length(self) -> int:
        return self.offsets_M[self.k_max]  # M_{k_max + 1}

    def repetitions(self, k: int, j: int) -> int:
        r = self.N[k - 1] * self.C[k - 1][j - 1]
        assert r.denominator == 1
        return int(r)

    def certify(self):
        """Exact integer checks of every schedule invariant."""
        for k in range(1, self.k_max + 1):
            sk = len(self.coefficients[k - 1])
            assert sum(self.coefficients[k - 1]) == 1
            for j in range(1, sk + 1):
                c = self.N[k - 1] * self.C[k - 1][j - 1]
                assert c.denominator == 1 and c > 0, "N_k C_{k,j} not integral"
            bound = k * self._connector_sum(k)
            assert self.N[k - 1] >= bound, "connector-budget bound fails"
            x = sum(self.s(k, j, k, j + 1) for j in range(1, sk)) + \
                self.s(k, sk, k, 1)
            assert x == self.X[k - 1]
            assert self.Y[k - 1] == self.N[k - 1] + self.X[k - 1]
            assert self.N[k - 1] * k >= (k - 1) * self.Y[k - 1], \
                "N_k / Y_k >= 1 - 1/k fails"
        for k in range(1, self.k_max):
            assert self.T[k] > self.T[k - 1], "T_k not strictly increasing"
            lhs = (k + 1) * self.Y[k]
            rhs = sum(self.Y[r] * self.T[r] for r in range(k))
            assert lhs <= rhs, "first cycle-count inequality fails"
            lhs2 = (k + 1) * sum(self.Y[r] * self.T[r]
                                 + self._next_level_connector(r + 1)
                                 for r in range(k))
            rhs2 = self.Y[k] * self.T[k]
            assert lhs2 <= rhs2, "second cycle-count inequality fails"
        # offsets: recurrences tie out with the totals
        m = 0
        for q in range(1, self.k_max + 1):
            assert self.offsets_M[q - 1] == m
            m += self.T[q - 1] * self.Y[q - 1] + self._next_level_connector(q)
        assert self.offsets_M[self.k_max] == m
        self.certified = True
        return self

    def _connector_sum(self, k: int) -> int:
        top = min(k + 1, self.k_max)
        total = 0
        for r1 in range(1, top + 1):
            for j1 in range(1, len(self.coefficients[r1 - 1]) + 1):
                for r2 in range(1, top + 1):
                    for j2 in range(1, len(self.coefficients[r2 - 1]) + 1):
                        total += self.s(r1, j1, r2, j2)
        return total

    def _next_level_connector(self, r: int) -> int:
        if r < self.k_max:
            return self.s(r, 1, r + 1, 1)
        return self.s_table[(self.k_max, 1, self.k_max + 1, 1)]


def build_schedule(decomposition, block_lengths, cells, connector_fn,
                   gamma: float, k_max: int, epsilon: float,
                   length_cap: int = DEFAULT_LENGTH_CAP,
                   min_total_length: int = 0) -> WeaveSchedule:
    """Construct the schedule integers for the truncated weave.

    decomposition: per level k, list of (rational coefficient, measure).
    block_lengths / cells: per level, the n(k,j) and partition cell per entry.
    connector_fn(cell_from, cell_to) -> (s, path).

    N_k is the least integer making every N_k C_{k,j} integral subject to the
    connector-budget bound; T_k is the least strictly increasing sequence
    satisfying both cycle-count inequalities (the final level may be inflated
    to reach min_total_length).  Exceeding length_cap truncates k_max and
    reports the forced level.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    coeffs = [[Fraction(a) for a, _m in level] for level in decomposition]
    meas = [[m for _a, m in level] for level in decomposition]
    for level in coeffs:
        if sum(level) != 1 or any(a <= 0 for a in level):
            raise ValueError("coefficients must be positive rationals summing to 1")
    # connector table over all (level, j) cells plus the truncation wrap-around
    s_table = {}
    for k1 in range(1, k_max + 1):
        for j1 in range(1, len(coeffs[k1 - 1]) + 1):
            for k2 in range(1, k_max + 1):
                for j2 in range(1, len(coeffs[k2 - 1]) + 1):
                    s, _ = connector_fn(cells[k1 - 1][j1 - 1],
                                        cells[k2 - 1][j2 - 1])
                    s_table[(k1, j1, k2, j2)] = s
    # the trailing connector after the last level wraps to the first cell
    s_wrap, _ = connector_fn(cells[k_max - 1][0], cells[0][0])
    s_table[(k_max, 1, k_max + 1, 1)] = s_wrap

    def make(km):
        C = [[a / n for a, n in zip(coeffs[k], block_lengths[k])]
             for k in range(km)]
        sched = WeaveSchedule(
            k_max=km, coefficients=coeffs[:km], measures=meas[:km],
            block_lengths=[list(b) for b in block_lengths[:km]],
            cells=[list(c) for c in cells[:km]], C=C,
            N=[], X=[], Y=[], T=[], s_table=dict(s_table), epsilon=epsilon)
        if km < k_max:
            sw, _ = connector_fn(cells[km - 1][0], cells[0][0])
            sched.s_table[(km, 1, km + 1, 1)] = sw
        for k in range(1, km + 1):
            sk = len(coeffs[k - 1])
            lcm = 1
            for c in C[k - 1]:
                lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
            bound = k * sched._connector_sum(k)
            N_k = lcm * max(1, math.ceil(bound / lcm))
            sched.N.append(N_k)
            X_k = sum(sched.s(k, j, k, j + 1) for j in range(1, sk)) + \
                sched.s(k, sk, k, 1)
            sched.X.append(X_k)
            sched.Y.append(N_k + X_k)
        # least admissible strictly increasing cycle counts
        T = []
        for k in range(1, km + 1):
            t = 1 if not T else T[-1] + 1
            prior = sum(sched.Y[r] * T[r] + sched._next_level_connector(r + 1)
                        for r in range(k - 1))
            t = max(t, math.ceil(k * prior / sched.Y[k - 1]))
            T.append(t)
            if k < km:  # feasibility of the first inequality at this level
                need = (k + 1) * sched.Y[k]
                have = sum(sched.Y[r] * T[r] for r in range(k))
                if have < need:
                    bump = math.ceil((need - sum(sched.Y[r] * T[r]
                                                 for r in range(k - 1)))
                                     / sched.Y[k - 1])
                    T[-1] = max(T[-1], bump)
        if min_total_length:
            # inflating the final level keeps every inequality valid
            body = sum(sched.Y[r] * T[r] + sched._next_level_connector(r + 1)
                       for r in range(km - 1))
            tail_conn = sched._next_level_connector(km)
            need = min_total_length - body - tail_conn
            if need > 0:
                T[-1] = max(T[-1], math.ceil(need / sched.Y[km - 1]))
        sched.T = T
        m = 0
        sched.offsets_M = []
        for q in range(1, km + 1):
            sched.offsets_M.append(m)
            m += sched.T[q - 1] * sched.Y[q - 1] + sched._next_level_connector(q)
        sched.offsets_M.append(m)
        return sched

    sched = make(k_max)
    km = k_max
    while sched.total_length > length_cap and km > 1:
        km -= 1
        sched = make(km)
        sched.truncated = True
        sched.truncation_level = km
    if sched.total_length > length_cap:
        raise OverflowError(
            f"even a single level needs {sched.total_length} > cap {length_cap}")
    return sched.certify()


def concatenate(shift: ShiftSpace, schedule: WeaveSchedule,
                families: dict, seed: int = 0, picks: dict | None = None):
    """Emit the pseudo-orbit in the construction's exact order and validate it.

    families maps (k, j) to a BlockFamily; picks (slot -> block index) fixes
    block choices per (k, j, i, t) slot, with seeded random defaults.
    Returns (PseudoOrbit, picks used).
    """
    rng = make_rng(seed)
    chosen: dict = {}
    states: list[Word] = []
    # per-segment bookkeeping for the audit: (offset, kind, payload)
    for k in range(1, schedule.k_max + 1):
        sk = len(schedule.coefficients[k - 1])
        for i in range(1, schedule.T[k - 1] + 1):
            for j in range(1, sk + 1):
                fam: BlockFamily = families[(k, j)]
                n_kj = schedule.block_lengths[k - 1][j - 1]
                if fam.n != n_kj:
                    raise ValueError("schedule/family block length mismatch")
                reps = schedule.repetitions(k, j)
                for t in range(1, reps + 1):
                    slot = (k, j, i, t)
                    if picks is not None and slot in picks:
                        idx = picks[slot]
                    else:
                        idx = int(rng.integers(len(fam.blocks)))
                    chosen[slot] = idx
                    w = fam.blocks[idx]
                    for p in range(n_kj):
                        states.append(word_state(shift, w[p:]))
                # in-cycle connector to the next family's cell
                j2 = j + 1 if j < sk else 1
                _s, path = connector(shift, schedule.cells[k - 1][j - 1],
                                     schedule.cells[k - 1][j2 - 1])
                target = schedule.cells[k - 1][j2 - 1]
                for p in range(len(path)):
                    states.append(word_state(shift, path[p:] + (target,)))
        # trailing connector into the next level's first cell (wraps at the top)
        if k < schedule.k_max:
            target = schedule.cells[k][0]
        else:
            target = schedule.cells[0][0]
        _s, path = connector(shift, schedule.cells[k - 1][0], target)
        for p in range(len(path)):
            states.append(word_state(shift, path[p:] + (target,)))
    if len(states) != schedule.total_length:
        raise AssertionError(
            f"length {len(states)} != scheduled {schedule.total_length}")
    po = validate_pseudo(shift, states, DELTA_PRIME)
    return po, chosen


@dataclass
class WeaveOutcome:
    point: Word
    total_length: int
    convergence: list[tuple[int, float]]
    truncation_level: int
    per_block_deviation: float
    final_distance: float
    picks: dict
    shadow: ShadowResult


def _cylinder_frequency_tables(z: Word, length: int,
                               family: TestFunctionFamily) -> list[np.ndarray]:
    sym = np.array(z.prefix(length + family.max_depth), dtype=np.int8)
    tables = []
    for phi in family.functions:
        w = np.array(phi.word, dtype=np.int8)
        hit = np.ones(length, dtype=bool)
        for off, s in enumerate(w):
            hit &= sym[off:off + length] == s
        tables.append(np.cumsum(hit))
    return tables


def weave_point(shift: ShiftSpace, schedule: WeaveSchedule, families: dict,
                target, family: TestFunctionFamily, seed: int = 0,
                picks: dict | None = None) -> WeaveOutcome:
    """Shadow the concatenated pseudo-orbit and audit the empirical distances
    to the target along the offset grid and at the full length."""
    po, used = concatenate(shift, schedule, families, seed=seed, picks=picks)
    res = shadow_shift(shift, po)
    z = res.point
    L = schedule.total_length
    freq = _cylinder_frequency_tables(z, L, family)
    targets = [integrate(target, phi) for phi in family.functions]

    def D_at(n: int) -> float:
        return float(sum(abs(freq[i][n - 1] / n - targets[i]) / 2.0 ** (i + 2)
                         for i in range(len(targets))))

    grid = sorted({schedule.M_i(k, i)
                   for k in range(1, schedule.k_max + 1)
                   for i in range(1, schedule.T[k - 1] + 1)} | {L})
    convergence = [(n, D_at(n)) for n in grid if n >= 1]
    return WeaveOutcome(
        point=z, total_length=L, convergence=convergence,
        truncation_level=schedule.k_max,
        per_block_deviation=res.max_deviation,
        final_distance=convergence[-1][1], picks=used, shadow=res)


def run_weave(shift: ShiftSpace, target, family: TestFunctionFamily,
              k_max: int = 3, gamma: float = 0.25, block_length: int = 16,
              epsilon: float = 0.25, budget: int = 400, seed: int = 0,
              min_total_length: int = 0,
              length_cap: int = DEFAULT_LENGTH_CAP):
    """Full pipeline: decompose the target per level, select block families,
    build the certified schedule, concatenate, shadow, and audit convergence.
    Returns (schedule, families, outcome)."""
    decomposition = []
    families: dict = {}
    block_lengths = []
    cells = []
    for k in range(1, k_max + 1):
        comps = convex_decompose(target, k, family)
        decomposition.append(comps)
        row_n, row_c = [], []
        for j, (_a, m) in enumerate(comps, start=1):
            fam = select_blocks(shift, m, block_length, epsilon, k, gamma,
                                budget, seed + 1000 * k + j, family=family)
            families[(k, j)] = fam
            row_n.append(fam.n)
            row_c.append(fam.cell)
        block_lengths.append(row_n)
        cells.append(row_c)
    schedule = build_schedule(
        decomposition, block_lengths, cells,
        lambda a, b: connector(shift, a, b), gamma, k_max, epsilon,
        length_cap=length_cap, min_total_length=min_total_length)
    outcome = weave_point(shift, schedule, families, target, family, seed=seed)
    return schedule, families, outcome


def separation_audit(shift: ShiftSpace, schedule: WeaveSchedule,
                     outcome_a: WeaveOutcome, outcome_b: WeaveOutcome) -> bool:
    """Check the woven points of two outcomes differing in exactly one block
    slot are (n(m,j), epsilon/2)-separated at that slot's offset."""
    diff = [slot for slot in outcome_a.picks
            if outcome_a.picks[slot] != outcome_b.picks.get(slot)]
    if len(diff) != 1:
        raise ValueError(f"outcomes differ in {len(diff)} slots, need exactly 1")
    (m, j, i, t) = diff[0]
    off = schedule.M_ijt(m, i, j, t)
    n_mj = schedule.block_lengths[m - 1][j - 1]
    if off + n_mj > outcome_a.total_length:
        raise ValueError("slot offset out of range")
    threshold = schedule.epsilon / 2
    za, zb = outcome_a.point, outcome_b.point
    q_scan = n_mj + max(0, int(round(-math.log2(threshold)))) + 1
    for c in range(q_scan):
        if za.symbol(off + c) != zb.symbol(off + c):
            idx = min(c, n_mj - 1)
            return 2.0 ** (-(c - idx)) >= threshold
    return False
