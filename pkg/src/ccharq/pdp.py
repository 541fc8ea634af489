"""End-to-end packet-drop probability of a multi-hop chain.

A packet is dropped when some link exhausts its attempts, so with per-link
outages ``P_k`` the drop probability is

    P_1 + sum_{k>=2} P_k * prod_{j<k} (1 - P_j)  ==  1 - prod_k (1 - P_k).

The product form is evaluated as ``-expm1(sum(log1p(-P_k)))``, which stays
accurate when every outage is tiny.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from .link import (
    NetworkModel,
    outage_prob_cc,
    outage_prob_cc_approx,
    outage_prob_type1,
)
from .special import DEFAULT_REL_TOL


def as_distribution(q: Sequence[int], n_links: int | None = None) -> tuple[int, ...]:
    """Validate an ARQ distribution and return it as a tuple of ints."""
    out = []
    for k, v in enumerate(q):
        if int(v) != v or v < 1:
            raise ValueError(f"q[{k}]={v!r} must be a positive integer")
        out.append(int(v))
    if n_links is not None and len(out) != n_links:
        raise ValueError(f"distribution has {len(out)} entries but the network has {n_links} links")
    return tuple(out)


def log_survival(p: float) -> float:
    """``log(1 - p)``; ``-inf`` for a certain outage."""
    if p >= 1.0:
        return -math.inf
    return math.log1p(-p)


def compose_drop(outages: Iterable[float]) -> float:
    """Drop probability ``1 - prod(1 - P_k)`` of a chain of per-link outages."""
    total = 0.0
    for p in outages:
        total += log_survival(p)
    return -math.expm1(total)


def cascade_drop(outages: Sequence[float]) -> float:
    """Drop probability by the literal hop-by-hop cascade (reference form)."""
    drop = 0.0
    survive = 1.0
    for p in outages:
        drop += p * survive
        survive *= 1.0 - p
    return drop


def _clamp(p: float) -> float:
    return min(max(p, 0.0), 1.0)


def exact_outages(model: NetworkModel, q: Sequence[int], rel_tol: float = DEFAULT_REL_TOL) -> list[float]:
    q = as_distribution(q, model.n_links)
    return [outage_prob_cc(model, k, qk, rel_tol) for k, qk in enumerate(q)]


def approx_outages(model: NetworkModel, q: Sequence[int]) -> list[float]:
    """Per-link ``K_k / q_k`` clamped to ``[0, 1]``."""
    q = as_distribution(q, model.n_links)
    return [_clamp(outage_prob_cc_approx(model, k, qk)) for k, qk in enumerate(q)]


def pdp_exact(model: NetworkModel, q: Sequence[int], rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Packet-drop probability of a CC-HARQ chain under frozen Rician fading."""
    return compose_drop(exact_outages(model, q, rel_tol))


def pdp_approx(model: NetworkModel, q: Sequence[int]) -> float:
    """High-SNR approximation of :func:`pdp_exact` built from ``K_k / q_k``.

    Each per-link term is clamped to ``[0, 1]`` first so the result stays a
    probability at low SNR.
    """
    return compose_drop(approx_outages(model, q))


def pdp_type1(model: NetworkModel, q: Sequence[int], fading: str = "slow",
              rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Packet-drop probability when relays discard failed copies (Type-1 ARQ)."""
    q = as_distribution(q, model.n_links)
    return compose_drop(outage_prob_type1(model, k, qk, fading, rel_tol) for k, qk in enumerate(q))


def log10_pdp(value: float) -> float:
    """Base-10 logarithm for log-scale plots; ``-inf`` for a zero probability."""
    return math.log10(value) if value > 0 else -math.inf
