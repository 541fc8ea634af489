"""Search for the ARQ distribution that minimises the packet-drop probability.

The search space holds every composition of ``q_sum`` into ``N`` positive
parts. Besides exhaustive enumeration this module provides local-minimum
tests, the closed-form pairwise conditions for a local minimum of the
approximate objective, the continuous relaxation ``q_i ∝ sqrt(K_i)`` and a
list search that only ranks lattice points near the relaxed solution.

Ties are always broken towards the lexicographically smallest distribution.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .link import NetworkModel, outage_prob_cc, outage_prob_type1
from .pdp import as_distribution, log_survival
from .special import DEFAULT_REL_TOL

log = logging.getLogger(__name__)

OBJECTIVES = ("exact", "approx", "type1_slow", "type1_iid")
#: absolute slack for the polynomial local-minimum inequalities
CONDITION_SLACK = 1e-12
_CHUNK = 1 << 14
_SNAP = 1e-9


@dataclass(frozen=True)
class SearchSpace:
    """Compositions of ``q_sum`` into ``n_links`` parts, each at least one."""

    n_links: int
    q_sum: int

    def __post_init__(self):
        if self.n_links < 1:
            raise ValueError(f"need at least one link, got {self.n_links}")
        if self.q_sum < self.n_links:
            raise ValueError(f"q_sum={self.q_sum} cannot give {self.n_links} links one attempt each")

    @property
    def size(self) -> int:
        return math.comb(self.q_sum - 1, self.n_links - 1)

    def __contains__(self, q) -> bool:
        return len(q) == self.n_links and sum(q) == self.q_sum and all(v >= 1 for v in q)


@dataclass(frozen=True)
class SearchOutcome:
    argmin: tuple[int, ...]
    pdp_value: float
    objective: str
    candidates_evaluated: int
    list_size: int | None = None
    list_size_unfiltered: int | None = None
    excess: int | None = None
    relaxed: tuple[float, ...] | None = field(default=None, repr=False)


def enumerate_space(space: SearchSpace) -> Iterator[tuple[int, ...]]:
    """Yield every distribution in ``space`` once, in lexicographic order."""
    n, total = space.n_links, space.q_sum
    for cuts in itertools.combinations(range(1, total), n - 1):
        prev = 0
        parts = []
        for cut in cuts:
            parts.append(cut - prev)
            prev = cut
        parts.append(total - prev)
        yield tuple(parts)


# -- objectives -------------------------------------------------------------

def link_outage(model: NetworkModel, k: int, q: int, objective: str,
                rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Per-link outage entering ``objective``; approx terms are clamped to [0, 1]."""
    if objective == "exact":
        return outage_prob_cc(model, k, q, rel_tol)
    if objective == "approx":
        return min(max(model.params[k].K / q, 0.0), 1.0)
    if objective == "type1_slow":
        return outage_prob_type1(model, k, q, "slow", rel_tol)
    if objective == "type1_iid":
        return outage_prob_type1(model, k, q, "iid", rel_tol)
    raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


def survival_table(model: NetworkModel, q_max: int, objective: str) -> np.ndarray:
    """``table[k, q-1] = log(1 - P_kq)`` for ``q = 1..q_max``."""
    table = np.empty((model.n_links, q_max))
    for k in range(model.n_links):
        for q in range(1, q_max + 1):
            table[k, q - 1] = log_survival(link_outage(model, k, q, objective))
    return table


def _log_success(table: np.ndarray, q: Sequence[int]) -> float:
    total = 0.0
    for k, qk in enumerate(q):
        total += float(table[k, qk - 1])
    return total


def evaluate(model: NetworkModel, q: Sequence[int], objective: str = "exact") -> float:
    """Packet-drop probability of ``q`` under ``objective``."""
    q = as_distribution(q, model.n_links)
    total = 0.0
    for k, qk in enumerate(q):
        total += log_survival(link_outage(model, k, qk, objective))
    return -math.expm1(total)


# -- exhaustive search ------------------------------------------------------

def _chunks(space: SearchSpace) -> Iterator[np.ndarray]:
    it = enumerate_space(space)
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64)


def _best_in_chunk(table: np.ndarray, block: np.ndarray) -> tuple[float, tuple[int, ...]]:
    score = np.zeros(len(block))
    for k in range(block.shape[1]):
        score += table[k, block[:, k] - 1]
    i = int(np.argmax(score))  # first maximiser = lexicographically smallest
    return float(score[i]), tuple(int(v) for v in block[i])


def exhaustive_search(model: NetworkModel, space: SearchSpace, objective: str = "exact",
                      workers: int = 1) -> SearchOutcome:
    """Global minimiser of ``objective`` over every distribution in ``space``.

    Candidates are scored by ``sum_k log(1 - P_kq_k)`` which is monotone in the
    drop probability. Work is split into fixed-size chunks so the result does
    not depend on ``workers``.
    """
    if space.n_links != model.n_links:
        raise ValueError(f"space has {space.n_links} links but the network has {model.n_links}")
    table = survival_table(model, space.q_sum - space.n_links + 1, objective)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_best_in_chunk, itertools.repeat(table), _chunks(space)))
    else:
        results = [_best_in_chunk(table, block) for block in _chunks(space)]
    best_score, best_q = results[0]
    for score, q in results[1:]:
        if score > best_score:
            best_score, best_q = score, q
    return SearchOutcome(best_q, evaluate(model, best_q, objective), objective, space.size)


# -- local minima -----------------------------------------------------------

def neighbors(q: Sequence[int]) -> list[tuple[int, ...]]:
    """Distributions reachable by moving one attempt between two links.

    Every part stays at least one, so the sum is preserved. Returned in
    lexicographic order.
    """
    q = tuple(q)
    out = []
    for j, qj in enumerate(q):
        if qj < 2:
            continue
        for i in range(len(q)):
            if i == j:
                continue
            moved = list(q)
            moved[i] += 1
            moved[j] -= 1
            out.append(tuple(moved))
    return sorted(out)


def is_local_min(model: NetworkModel, q: Sequence[int], objective: str = "approx") -> bool:
    """True when no single-attempt transfer lowers the objective.

    Differences below ``CONDITION_SLACK`` relative to the current value are
    rounding noise and count as ties.
    """
    here = evaluate(model, q, objective)
    floor = here * (1.0 - CONDITION_SLACK)
    return all(floor <= evaluate(model, other, objective) for other in neighbors(q))


def _pair_condition_parts(Ki: float, Kj: float, qi: int, qj: int):
    KK = Ki * Kj
    c1 = -KK + qi * qi * Kj + qi * (Kj - KK)
    c2 = KK + qi * qi * Kj - qi * (Kj + KK)
    up = (qj * qj * Ki, -qj * (Ki + KK), -c1)
    lo = (qj * qj * Ki, qj * (Ki - KK), -c2)
    return up, lo


def pair_condition_terms(Ki: float, Kj: float, qi: int, qj: int) -> tuple[float, float]:
    """Left-hand sides of the two pairwise local-minimum inequalities.

    The first must be ``<= 0`` (moving an attempt from link j to link i does
    not help); the second must be ``>= 0`` (moving one from i to j does not
    help).
    """
    up, lo = _pair_condition_parts(Ki, Kj, qi, qj)
    return math.fsum(up), math.fsum(lo)


def _pair_ok(Ki: float, Kj: float, qi: int, qj: int, need_upper: bool, need_lower: bool) -> bool:
    # slack is relative to the size of the terms, so near-ties count as ties at any SNR
    up, lo = _pair_condition_parts(Ki, Kj, qi, qj)
    if need_upper and math.fsum(up) > CONDITION_SLACK * sum(abs(t) for t in up):
        return False
    if need_lower and math.fsum(lo) < -CONDITION_SLACK * sum(abs(t) for t in lo):
        return False
    return True


def check_theorem3(Ki: float, Kj: float, qi: int, qj: int) -> bool:
    """Both pairwise inequalities hold up to a relative :data:`CONDITION_SLACK`."""
    return _pair_ok(Ki, Kj, qi, qj, True, True)


def satisfies_pair_conditions(K: Sequence[float], q: Sequence[int]) -> bool:
    """Pairwise inequalities for every ordered pair ``i != j``.

    An inequality is skipped when the transfer it describes would leave a
    link with zero attempts.
    """
    n = len(q)
    return all(
        _pair_ok(K[i], K[j], q[i], q[j], q[j] >= 2, q[i] >= 2)
        for i in range(n) for j in range(n) if i != j
    )


def respects_los_order(c: Sequence[float], q: Sequence[int]) -> bool:
    """No link gets more attempts than a link with a smaller LOS component."""
    n = len(c)
    return not any(c[i] < c[j] and q[j] > q[i] for i in range(n) for j in range(n))


# -- relaxation and list search ---------------------------------------------

def solve_relaxation(K: Sequence[float], q_sum: float) -> np.ndarray:
    """Real-valued distribution with ``q_j / q_i = sqrt(K_j / K_i)`` summing to ``q_sum``."""
    root = np.sqrt(np.asarray(K, dtype=float))
    if np.any(root <= 0):
        raise ValueError("all K must be positive")
    return q_sum * root / root.sum()


def relaxation_system(K: Sequence[float], q_sum: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear system ``R q = s`` whose solution is :func:`solve_relaxation`.

    Rows ``0..N-2`` encode ``q_j - sqrt(K_j / K_{j+1}) q_{j+1} = 0`` and the
    last row the budget ``sum(q) = q_sum``.
    """
    K = np.asarray(K, dtype=float)
    n = len(K)
    R = np.eye(n)
    for j in range(n - 1):
        R[j, j + 1] = -math.sqrt(K[j] / K[j + 1])
    R[n - 1, :] = 1.0
    s = np.zeros(n)
    s[n - 1] = q_sum
    return R, s


def solve_relaxation_linear(K: Sequence[float], q_sum: float) -> np.ndarray:
    R, s = relaxation_system(K, q_sum)
    return np.linalg.solve(R, s)


def _ceil(x: float) -> int:
    r = round(x)
    if abs(x - r) <= _SNAP * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def nearest_lattice_point(q_real: Sequence[float], q_sum: int) -> tuple[int, ...]:
    """Largest-remainder rounding of ``q_real`` onto the budget, parts at least one."""
    q_real = np.asarray(q_real, dtype=float)
    base = np.maximum(np.floor(q_real).astype(int), 1)
    short = q_sum - int(base.sum())
    frac = q_real - np.floor(q_real)
    order = sorted(range(len(q_real)), key=lambda k: (-frac[k], k))
    q = base.copy()
    for k in order[:max(short, 0)]:
        q[k] += 1
    for k in reversed(order):
        if short >= 0:
            break
        if q[k] > 1:
            q[k] -= 1
            short += 1
    return tuple(int(v) for v in q)


@dataclass(frozen=True)
class CandidateList:
    relaxed: tuple[float, ...]
    ceiled: tuple[int, ...]
    excess: int
    candidates: tuple[tuple[int, ...], ...]
    unfiltered: tuple[tuple[int, ...], ...]


def build_list(c: Sequence[float], K: Sequence[float], q_sum: int) -> CandidateList:
    """Candidate distributions around the relaxed optimum.

    The relaxed solution is rounded up, zero entries are raised to one and the
    resulting excess ``E`` is removed by unit decrements at ``E`` distinct
    positions holding more than one attempt (positions repeat once ``E``
    exceeds how many such entries there are).
    Candidates that give a link more attempts than a link with a smaller LOS
    component are dropped.
    """
    n = len(K)
    relaxed = solve_relaxation(K, q_sum)
    ceiled = [_ceil(v) for v in relaxed]
    for i in range(n):
        if ceiled[i] == 0:
            ceiled[i] += 1
    excess = sum(ceiled) - q_sum
    assert excess >= 0, "ceiling cannot undershoot the budget"
    # entries already at one cannot give up an attempt
    movable = [i for i in range(n) if ceiled[i] > 1]
    if excess <= len(movable):
        picks = itertools.combinations(movable, excess)
    else:
        picks = itertools.combinations_with_replacement(movable, excess)
    unfiltered = set()
    for pick in picks:
        q = list(ceiled)
        for k in pick:
            q[k] -= 1
        if min(q) >= 1:
            unfiltered.add(tuple(q))
    unfiltered = sorted(unfiltered)
    kept = [q for q in unfiltered if respects_los_order(c, q)]
    return CandidateList(tuple(float(v) for v in relaxed), tuple(ceiled), excess, tuple(kept), tuple(unfiltered))


def list_search(model: NetworkModel, space: SearchSpace, objective: str = "approx") -> SearchOutcome:
    """Rank the candidate list of :func:`build_list` by ``objective``."""
    if space.n_links != model.n_links:
        raise ValueError(f"space has {space.n_links} links but the network has {model.n_links}")
    cl = build_list(model.c, model.K, space.q_sum)
    pool = cl.candidates
    if not pool:
        log.warning("LOS-order filter removed every candidate; ranking the unfiltered list")
        pool = cl.unfiltered
    if not pool:
        raise RuntimeError(f"no feasible candidate around {cl.ceiled} for q_sum={space.q_sum}")
    scored = [(evaluate(model, q, objective), q) for q in pool]
    best_value, best_q = min(scored)
    return SearchOutcome(
        argmin=best_q,
        pdp_value=best_value,
        objective=objective,
        candidates_evaluated=len(pool),
        list_size=len(cl.candidates),
        list_size_unfiltered=len(cl.unfiltered),
        excess=cl.excess,
        relaxed=cl.relaxed,
    )


def uniform_distribution(c: Sequence[float], q_sum: int) -> tuple[int, ...]:
    """Equal split of the budget; leftovers go to the lowest-LOS links, then by index."""
    n = len(c)
    if q_sum < n:
        raise ValueError(f"q_sum={q_sum} cannot give {n} links one attempt each")
    base, extra = divmod(q_sum, n)
    q = [base] * n
    for k in sorted(range(n), key=lambda k: (c[k], k))[:extra]:
        q[k] += 1
    return tuple(q)
