"""Packet-level Monte Carlo simulation of an N-hop ARQ chain with delay accounting.

Every packet walks the chain link by link. On link ``k`` it may use up to
``q_k`` attempts; attempt ``j`` is decoded when the accumulated SNR reaches
``2**R - 1`` (equivalently ``R <= log2(1 + SNR)``). Each attempt costs
``tau_p + tau_d`` and every retry after a NACK costs ``tau_nack`` on top. A
packet that exhausts a link's attempts is dropped there.

Trials are split into fixed-size shards seeded from one ``SeedSequence``, so
a report depends only on the inputs and the seed, never on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .link import NetworkModel
from .pdp import as_distribution

PROTOCOLS = ("cc_harq", "cc_harq_iid", "type1_slow", "type1_iid")
SHARD_SIZE = 1 << 16
DEFAULT_TRIALS = 1_000_000
# relative slack when comparing a packet delay with the deadline
_DEADLINE_EPS = 1e-9


@dataclass(frozen=True)
class DelayParams:
    """Per-hop timing in microseconds and the end-to-end deadline."""

    tau_p: float
    tau_d: float
    tau_total: float
    tau_nack: float = 0.0

    def __post_init__(self):
        for name in ("tau_p", "tau_d", "tau_total", "tau_nack"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a non-negative number, got {v!r}")
        if self.hop_time <= 0:
            raise ValueError("tau_p + tau_d must be positive")
        if self.tau_total < self.hop_time:
            raise ValueError(f"tau_total={self.tau_total} is shorter than one hop ({self.hop_time})")

    @property
    def hop_time(self) -> float:
        return self.tau_p + self.tau_d

    def with_nack(self, tau_nack: float) -> "DelayParams":
        return DelayParams(self.tau_p, self.tau_d, self.tau_total, tau_nack)


def derive_budget(delays: DelayParams) -> int:
    """Total attempt budget ``floor(tau_total / (tau_p + tau_d))``.

    NACK time is left out on purpose. A ``1e-9`` nudge keeps ratios
    such as ``0.3 / 0.1`` from rounding down a whole attempt.
    """
    return math.floor(delays.tau_total / delays.hop_time + 1e-9)


@dataclass(frozen=True)
class SimReport:
    trials: int
    p_drop: float
    p_deadline: float
    avg_delay: float
    eta: float | None
    seed: int
    protocol: str
    delivered: int
    dropped: int
    late: int
    avg_delay_delivered: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def sample_gain(c: float, size, rng: np.random.Generator) -> np.ndarray:
    """Draw ``|h|**2`` for ``h = sqrt(c/2)(1+i) + sqrt((1-c)/2) g``.

    The real and imaginary parts of ``g`` are independent standard normals,
    which gives ``E|h|**2 = 1`` and the Marcum-Q power CDF.
    """
    los = math.sqrt(c / 2.0)
    nlos = math.sqrt((1.0 - c) / 2.0)
    re = los + nlos * rng.standard_normal(size)
    im = los + nlos * rng.standard_normal(size)
    return re * re + im * im


def _first_success(ok: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per row: whether any attempt succeeded and the 1-based index of the first."""
    hit = ok.any(axis=1)
    first = ok.argmax(axis=1) + 1
    return hit, first


def _link_attempts(protocol: str, c: float, qk: int, m: int, snr: float, threshold: float,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    attempts = np.arange(1, qk + 1)
    if protocol == "cc_harq":
        g = sample_gain(c, m, rng)
        acc = snr * g[:, None] * attempts[None, :]
    elif protocol == "type1_slow":
        g = sample_gain(c, m, rng)
        acc = np.repeat((snr * g)[:, None], qk, axis=1)
    elif protocol == "cc_harq_iid":
        acc = snr * np.cumsum(sample_gain(c, (m, qk), rng), axis=1)
    elif protocol == "type1_iid":
        acc = snr * sample_gain(c, (m, qk), rng)
    else:
        raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    return _first_success(acc >= threshold)


@dataclass(frozen=True)
class PacketTrace:
    """Per-packet outcome of one batch of trials."""

    attempts: np.ndarray
    retries: np.ndarray
    delivered: np.ndarray
    delay: np.ndarray
    late: np.ndarray


def trace_packets(model: NetworkModel, q: Sequence[int], delays: DelayParams, protocol: str,
                  trials: int, rng: np.random.Generator) -> PacketTrace:
    """Walk ``trials`` packets through the chain and keep every packet's record."""
    q = as_distribution(q, model.n_links)
    attempts = np.zeros(trials, dtype=np.int64)
    retries = np.zeros(trials, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    for k, qk in enumerate(q):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        hit, first = _link_attempts(protocol, model.c[k], qk, idx.size, model.snr, model.threshold, rng)
        used = np.where(hit, first, qk)
        attempts[idx] += used
        retries[idx] += used - 1  # the final failure before a drop sends no retry
        alive[idx[~hit]] = False
    delay = attempts * delays.hop_time + retries * delays.tau_nack
    late = alive & (delay > delays.tau_total * (1 + _DEADLINE_EPS))
    return PacketTrace(attempts, retries, alive, delay, late)


def _run_shard(model: NetworkModel, q: tuple[int, ...], delays: DelayParams, protocol: str,
               trials: int, seed_seq: np.random.SeedSequence) -> tuple[int, ...]:
    t = trace_packets(model, q, delays, protocol, trials, np.random.default_rng(seed_seq))
    ok = t.delivered
    return (
        int(ok.sum()),
        int(t.late.sum()),
        int(t.attempts.sum()),
        int(t.retries.sum()),
        int(t.attempts[ok].sum()),
        int(t.retries[ok].sum()),
    )


def _shard_task(args):
    return _run_shard(*args)


def simulate(model: NetworkModel, q: Sequence[int], delays: DelayParams, protocol: str = "cc_harq",
             trials: int = DEFAULT_TRIALS, seed: int = 0, workers: int = 1) -> SimReport:
    """Simulate ``trials`` packets and aggregate drop, deadline and delay metrics.

    ``cc_harq`` and ``type1_slow`` keep each link's channel frozen across its
    attempts; ``cc_harq_iid`` and ``type1_iid`` redraw it on every attempt.
    """
    q = as_distribution(q, model.n_links)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    n_shards = -(-trials // SHARD_SIZE)
    seeds = np.random.SeedSequence(seed).spawn(n_shards)
    sizes = [SHARD_SIZE] * (n_shards - 1) + [trials - SHARD_SIZE * (n_shards - 1)]
    tasks = [(model, q, delays, protocol, size, ss) for size, ss in zip(sizes, seeds)]
    if workers > 1 and n_shards > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_shard_task, tasks))
    else:
        parts = [_shard_task(t) for t in tasks]
    delivered, late, att, ret, att_ok, ret_ok = (sum(col) for col in zip(*parts))
    dropped = trials - delivered
    p_drop = dropped / trials
    p_deadline = late / trials
    avg_delay = (att * delays.hop_time + ret * delays.tau_nack) / trials
    avg_ok = (att_ok * delays.hop_time + ret_ok * delays.tau_nack) / delivered if delivered else None
    eta = (dropped + late) / dropped if dropped else None
    return SimReport(
        trials=trials,
        p_drop=p_drop,
        p_deadline=p_deadline,
        avg_delay=avg_delay,
        eta=eta,
        seed=seed,
        protocol=protocol,
        delivered=delivered,
        dropped=dropped,
        late=late,
        avg_delay_delivered=avg_ok,
    )


def estimate_pdp(model: NetworkModel, q: Sequence[int], protocol: str = "cc_harq",
                 trials: int = DEFAULT_TRIALS, seed: int = 0, workers: int = 1) -> tuple[float, float]:
    """Empirical drop probability and its binomial standard error."""
    if trials < 100:
        raise ValueError("estimate_pdp needs at least 100 trials")
    hop = DelayParams(tau_p=0.0, tau_d=1.0, tau_total=float(sum(q)))
    report = simulate(model, q, hop, protocol, trials, seed, workers)
    p = report.p_drop
    return p, math.sqrt(p * (1.0 - p) / trials)
