"""Rician link parameterisation and per-link outage probabilities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from .special import DEFAULT_REL_TOL, marcum_q1_approx, marcum_q1_complement, marcum_q1_exact

#: LOS components at or above this value make K underflow towards zero.
NEAR_AWGN_WARNING = 0.999

FADING_MODES = ("slow", "iid")


def db_to_linear(snr_db: float) -> float:
    """Convert a power ratio in dB to linear scale, ``10 ** (dB / 10)``."""
    return 10.0 ** (snr_db / 10.0)


def linear_to_db(snr: float) -> float:
    return 10.0 * math.log10(snr)


@dataclass(frozen=True)
class LinkOutageParams:
    """Scalars feeding the Marcum-Q outage of one link at a single attempt.

    ``a = sqrt(2c/(1-c))``, ``b = sqrt(2*phi/(1-c))`` and
    ``K = phi/(1-c) * exp(-c/(1-c))``.
    """

    a: float
    b: float
    K: float

    @classmethod
    def from_link(cls, c: float, phi: float) -> "LinkOutageParams":
        scatter = 1.0 - c
        return cls(
            a=math.sqrt(2.0 * c / scatter),
            b=math.sqrt(2.0 * phi / scatter),
            K=phi / scatter * math.exp(-c / scatter),
        )


@dataclass(frozen=True)
class NetworkModel:
    """Fixed environment of an N-hop chain.

    Attributes:
        c: LOS component of each link, ``0 <= c_k < 1``.
        rate: transmission rate R in bits per channel use.
        snr: average linear SNR ``gamma = 1 / sigma**2``.
    """

    c: tuple[float, ...]
    rate: float = 1.0
    snr: float = 100.0
    params: tuple[LinkOutageParams, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        if not c:
            raise ValueError("network needs at least one link")
        for k, ck in enumerate(c):
            if not (math.isfinite(ck) and 0.0 <= ck < 1.0):
                raise ValueError(f"LOS component c[{k}]={ck!r} must lie in [0, 1)")
            if ck >= NEAR_AWGN_WARNING:
                warnings.warn(
                    f"c[{k}]={ck} is close to 1; outage constants underflow towards 0",
                    RuntimeWarning,
                    stacklevel=3,
                )
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be positive, got {self.rate!r}")
        if not (math.isfinite(self.snr) and self.snr > 0):
            raise ValueError(f"snr must be positive, got {self.snr!r}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "snr", float(self.snr))
        phi = self.phi
        object.__setattr__(self, "params", tuple(LinkOutageParams.from_link(ck, phi) for ck in c))

    @classmethod
    def from_db(cls, c: Sequence[float], rate: float, snr_db: float) -> "NetworkModel":
        return cls(tuple(c), rate, db_to_linear(snr_db))

    @property
    def n_links(self) -> int:
        return len(self.c)

    @property
    def threshold(self) -> float:
        """SNR a packet must accumulate to be decoded, ``2**R - 1``."""
        return 2.0**self.rate - 1.0

    @property
    def phi(self) -> float:
        return self.threshold / self.snr

    @property
    def K(self) -> tuple[float, ...]:
        return tuple(p.K for p in self.params)

    def with_snr(self, snr: float) -> "NetworkModel":
        return NetworkModel(self.c, self.rate, snr)


def _check_link(model: NetworkModel, k: int) -> None:
    if not 0 <= k < model.n_links:
        raise IndexError(f"link index {k} out of range for {model.n_links} links")


def _check_attempts(q: int) -> None:
    if int(q) != q or q < 1:
        raise ValueError(f"attempt count must be a positive integer, got {q!r}")


@lru_cache(maxsize=1 << 16)
def _rician_cdf(a: float, b: float, q: int, rel_tol: float) -> float:
    return marcum_q1_complement(a, b / math.sqrt(q), rel_tol)


def outage_prob(model: NetworkModel, k: int, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Single-attempt outage ``P_k = 1 - Q1(a_k, b_k)`` of link ``k`` (0-based)."""
    return outage_prob_cc(model, k, 1, rel_tol)


def outage_prob_cc(model: NetworkModel, k: int, q: int, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Outage of link ``k`` after ``q`` chase-combined attempts over a frozen channel.

    Combining ``q`` identical copies multiplies the effective SNR by ``q``,
    so the threshold argument of the Marcum-Q function shrinks by ``sqrt(q)``.
    """
    _check_link(model, k)
    _check_attempts(q)
    p = model.params[k]
    return _rician_cdf(p.a, p.b, int(q), rel_tol)


def outage_prob_cc_approx(model: NetworkModel, k: int, q: int) -> float:
    """High-SNR outage ``K_k / q``; unclamped, may exceed one at low SNR."""
    _check_link(model, k)
    _check_attempts(q)
    return model.params[k].K / q


def outage_prob_type1(model: NetworkModel, k: int, q: int, fading: str = "slow",
                      rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Outage of link ``k`` under Type-1 ARQ (failed copies discarded).

    ``fading="slow"`` keeps the channel frozen, so retries never help;
    ``fading="iid"`` redraws the channel on every attempt.
    """
    _check_link(model, k)
    _check_attempts(q)
    if fading == "slow":
        return outage_prob(model, k, rel_tol)
    if fading == "iid":
        return outage_prob(model, k, rel_tol) ** q
    raise ValueError(f"fading must be one of {FADING_MODES}, got {fading!r}")


def marcum_pair(model: NetworkModel, k: int, q: int = 1, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """Exact ``Q1`` and its approximation at the arguments of link ``k`` with ``q`` attempts."""
    _check_link(model, k)
    _check_attempts(q)
    p = model.params[k]
    b = p.b / math.sqrt(q)
    return marcum_q1_exact(p.a, b, rel_tol), marcum_q1_approx(p.a, b)
