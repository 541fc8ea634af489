"""Experiment configuration: YAML ingestion, dotted-key overrides, validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .link import NetworkModel, db_to_linear
from .optimizer import OBJECTIVES
from .simulator import DEFAULT_TRIALS, PROTOCOLS, DelayParams, derive_budget

MODES = ("optimize", "conditions", "simulate", "compare", "sweep")
METHODS = ("list", "exhaustive")
SWEEP_KINDS = ("list_size", "marcum")

_SCHEMA = {
    "network": {"c", "rate", "snr_db"},
    "budget": {"q_sum", "tau_p", "tau_d", "tau_total"},
    "optimize": {"method", "objective", "q"},
    "sim": {"protocol", "tau_nack", "trials", "seed"},
    "compare": {"type1_fading"},
    "sweep": {"kind"},
    "run": {"workers"},
    "output": {"path"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    c: tuple[float, ...]
    rate: float
    snr_db: tuple[float, ...]
    q_sums: tuple[int, ...]
    delays: tuple[DelayParams, ...] | None = None
    method: str = "list"
    objective: str = "approx"
    q: tuple[int, ...] | None = None
    protocol: str = "cc_harq"
    tau_nack: tuple[float, ...] = (0.0,)
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    type1_fading: str = "slow"
    sweep_kind: str = "list_size"
    workers: int = 1
    output: Path | None = None

    def model(self, snr_db: float) -> NetworkModel:
        return NetworkModel(self.c, self.rate, db_to_linear(snr_db))


def parse_scalar(text: str) -> Any:
    """Interpret an override value with YAML rules (``3`` -> int, ``[1, 2]`` -> list)."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {text!r}: {exc}") from None


def apply_overrides(raw: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted keys such as ``sim.trials`` on a nested config mapping."""
    out = copy.deepcopy(raw)
    for key, value in overrides.items():
        parts = key.split(".")
        if len(parts) != 2:
            raise ConfigError(f"{key}: override keys take the form section.key")
        section, name = parts
        node = out.setdefault(section, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{section}: expected a mapping")
        node[name] = value
    return out


def load_raw(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _as_list(value, key: str) -> list:
    if isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(f"{key}: list must not be empty")
        return list(value)
    return [value]


def _number(value, key: str, *, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be positive, got {value!r}")
    if nonneg and not value >= 0:
        raise ConfigError(f"{key}: must be non-negative, got {value!r}")
    return value


def _integer(value, key: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{key}: must be at least {minimum}, got {value!r}")
    return value


def _choice(value, key: str, options) -> str:
    if value not in options:
        raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {value!r}")
    return value


def _q_sums(value, n: int) -> tuple[int, ...]:
    if isinstance(value, dict):
        if set(value) != {"start", "stop"}:
            raise ConfigError("budget.q_sum: a range needs exactly the keys start and stop")
        lo = _integer(value["start"], "budget.q_sum.start", 1)
        hi = _integer(value["stop"], "budget.q_sum.stop", lo)
        values = list(range(lo, hi + 1))
    else:
        values = [_integer(v, "budget.q_sum", 1) for v in _as_list(value, "budget.q_sum")]
    for v in values:
        if v < n:
            raise ConfigError(f"budget.q_sum: {v} is infeasible for {n} links (need q_sum >= N)")
    return tuple(values)


def validate(raw: dict, mode: str) -> ExperimentConfig:
    """Check a raw mapping against the schema and build an :class:`ExperimentConfig`."""
    _choice(mode, "mode", MODES)
    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown section")
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a mapping")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")

    net = raw.get("network", {})
    if "c" not in net:
        raise ConfigError("network.c: required")
    c = tuple(_number(v, "network.c") for v in _as_list(net["c"], "network.c"))
    for k, ck in enumerate(c):
        if not 0 <= ck < 1:
            raise ConfigError(f"network.c: entry {k} = {ck} must lie in [0, 1)")
    rate = _number(net.get("rate", 1.0), "network.rate", positive=True)
    if "snr_db" not in net:
        raise ConfigError("network.snr_db: required")
    snr_db = tuple(_number(v, "network.snr_db") for v in _as_list(net["snr_db"], "network.snr_db"))
    n = len(c)

    fields: dict[str, Any] = {}
    opt = raw.get("optimize", {})
    fields["method"] = _choice(opt.get("method", "list"), "optimize.method", METHODS)
    fields["objective"] = _choice(opt.get("objective", "approx"), "optimize.objective", OBJECTIVES)
    if "q" in opt:
        q = tuple(_integer(v, "optimize.q", 1) for v in _as_list(opt["q"], "optimize.q"))
        if len(q) != n:
            raise ConfigError(f"optimize.q: has {len(q)} entries but network.c has {n}")
        fields["q"] = q

    sim = raw.get("sim", {})
    fields["protocol"] = _choice(sim.get("protocol", "cc_harq"), "sim.protocol", PROTOCOLS)
    fields["tau_nack"] = tuple(_number(v, "sim.tau_nack", nonneg=True)
                               for v in _as_list(sim.get("tau_nack", 0.0), "sim.tau_nack"))
    fields["trials"] = _integer(sim.get("trials", DEFAULT_TRIALS), "sim.trials", 1)
    fields["seed"] = _integer(sim.get("seed", 0), "sim.seed", 0)
    fields["type1_fading"] = _choice(raw.get("compare", {}).get("type1_fading", "slow"),
                                     "compare.type1_fading", ("slow", "iid"))
    fields["sweep_kind"] = _choice(raw.get("sweep", {}).get("kind", "list_size"), "sweep.kind", SWEEP_KINDS)
    fields["workers"] = _integer(raw.get("run", {}).get("workers", 1), "run.workers", 1)
    path = raw.get("output", {}).get("path")
    if path is not None:
        if not isinstance(path, str) or not path:
            raise ConfigError("output.path: expected a file name")
        fields["output"] = Path(path)

    budget = raw.get("budget", {})
    has_q_sum = "q_sum" in budget
    delay_keys = {"tau_p", "tau_d", "tau_total"} & set(budget)
    if has_q_sum and delay_keys:
        raise ConfigError("budget: give either q_sum or the delay parameters, not both")
    if has_q_sum:
        q_sums = _q_sums(budget["q_sum"], n)
        delays = None
    elif delay_keys:
        missing = {"tau_p", "tau_d", "tau_total"} - delay_keys
        if missing:
            raise ConfigError(f"budget.{sorted(missing)[0]}: required with delay-based budgets")
        tau_p = _number(budget["tau_p"], "budget.tau_p", nonneg=True)
        tau_d = _number(budget["tau_d"], "budget.tau_d", nonneg=True)
        totals = [_number(v, "budget.tau_total", positive=True)
                  for v in _as_list(budget["tau_total"], "budget.tau_total")]
        try:
            delays = tuple(DelayParams(tau_p, tau_d, t) for t in totals)
        except ValueError as exc:
            raise ConfigError(f"budget: {exc}") from None
        q_sums = tuple(derive_budget(d) for d in delays)
        for t, qs in zip(totals, q_sums):
            if qs < n:
                raise ConfigError(f"budget.tau_total: {t} allows only {qs} attempts for {n} links")
    else:
        if mode != "sweep":
            raise ConfigError("budget: required (q_sum or tau_p/tau_d/tau_total)")
        q_sums, delays = (), None

    if mode == "simulate" and delays is None:
        raise ConfigError("budget.tau_total: simulate needs a delay-based budget")
    if mode == "sweep" and fields["sweep_kind"] == "list_size" and not q_sums:
        raise ConfigError("budget: required (q_sum or tau_p/tau_d/tau_total)")
    if "q" in fields and mode in ("conditions", "simulate"):
        for qs in q_sums:
            if sum(fields["q"]) != qs:
                raise ConfigError(f"optimize.q: sums to {sum(fields['q'])} but the budget is {qs}")

    return ExperimentConfig(mode=mode, c=c, rate=rate, snr_db=snr_db, q_sums=q_sums, delays=delays, **fields)


def load_config(path: str | Path | None, mode: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    raw = load_raw(path) if path is not None else {}
    return validate(apply_overrides(raw, overrides or {}), mode)
