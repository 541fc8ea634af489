"""Command-line entry point: ``ccharq {optimize,conditions,simulate,compare,sweep}``.

Every subcommand reads a YAML experiment file, applies flag overrides and
writes one record per sweep point as CSV (header row) plus a JSON-lines
mirror next to it. SNR values are given in dB and converted with
``10 ** (dB / 10)``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Iterable

from .config import MODES, ConfigError, ExperimentConfig, load_config, parse_scalar
from .link import marcum_pair, outage_prob, outage_prob_cc_approx
from .optimizer import (
    SearchSpace,
    exhaustive_search,
    is_local_min,
    list_search,
    respects_los_order,
    satisfies_pair_conditions,
    uniform_distribution,
)
from .pdp import pdp_approx, pdp_exact, pdp_type1
from .simulator import simulate
from .special import ConvergenceError

log = logging.getLogger("ccharq")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMPARE_COLUMNS = [
    "q_sum", "snr_db", "pdp_exhaustive_exact", "pdp_exhaustive_approx", "pdp_list",
    "pdp_uniform", "pdp_type1", "list_size", "exhaustive_size",
]


def _optimize(model, space: SearchSpace, cfg: ExperimentConfig):
    if cfg.method == "exhaustive":
        return exhaustive_search(model, space, cfg.objective, cfg.workers)
    return list_search(model, space, cfg.objective)


def run_optimize(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for snr_db in cfg.snr_db:
        model = cfg.model(snr_db)
        for q_sum in cfg.q_sums:
            space = SearchSpace(model.n_links, q_sum)
            out = _optimize(model, space, cfg)
            rows.append({
                "q_sum": q_sum,
                "snr_db": snr_db,
                "method": cfg.method,
                "objective": cfg.objective,
                "argmin": list(out.argmin),
                "pdp": out.pdp_value,
                "pdp_exact": pdp_exact(model, out.argmin),
                "candidates_evaluated": out.candidates_evaluated,
                "list_size": out.list_size,
                "exhaustive_size": space.size,
            })
    return rows


def run_conditions(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for snr_db in cfg.snr_db:
        model = cfg.model(snr_db)
        for q_sum in cfg.q_sums:
            q = cfg.q or _optimize(model, SearchSpace(model.n_links, q_sum), cfg).argmin
            rows.append({
                "q_sum": q_sum,
                "snr_db": snr_db,
                "q": list(q),
                "pdp_exact": pdp_exact(model, q),
                "pdp_approx": pdp_approx(model, q),
                "local_min_exact": is_local_min(model, q, "exact"),
                "local_min_approx": is_local_min(model, q, "approx"),
                "pair_conditions": satisfies_pair_conditions(model.K, q),
                "los_order": respects_los_order(model.c, q),
            })
    return rows


def run_simulate(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for snr_db in cfg.snr_db:
        model = cfg.model(snr_db)
        for delays, q_sum in zip(cfg.delays, cfg.q_sums):
            q = cfg.q or _optimize(model, SearchSpace(model.n_links, q_sum), cfg).argmin
            for tau_nack in cfg.tau_nack:
                report = simulate(model, q, delays.with_nack(tau_nack), cfg.protocol,
                                  cfg.trials, cfg.seed, cfg.workers)
                rows.append({
                    "snr_db": snr_db,
                    "tau_total": delays.tau_total,
                    "q_sum": q_sum,
                    "tau_nack": tau_nack,
                    "q": list(q),
                    "pdp_exact": pdp_exact(model, q),
                    **report.to_dict(),
                })
    return rows


def run_compare(cfg: ExperimentConfig) -> list[dict]:
    type1_objective = f"type1_{cfg.type1_fading}"
    rows = []
    for q_sum in cfg.q_sums:
        for snr_db in cfg.snr_db:
            model = cfg.model(snr_db)
            space = SearchSpace(model.n_links, q_sum)
            best_exact = exhaustive_search(model, space, "exact", cfg.workers)
            best_approx = exhaustive_search(model, space, "approx", cfg.workers)
            listed = list_search(model, space, "approx")
            type1 = exhaustive_search(model, space, type1_objective, cfg.workers)
            rows.append({
                "q_sum": q_sum,
                "snr_db": snr_db,
                "pdp_exhaustive_exact": best_exact.pdp_value,
                "pdp_exhaustive_approx": pdp_exact(model, best_approx.argmin),
                "pdp_list": pdp_exact(model, listed.argmin),
                "pdp_uniform": pdp_exact(model, uniform_distribution(model.c, q_sum)),
                "pdp_type1": pdp_type1(model, type1.argmin, cfg.type1_fading),
                "list_size": listed.list_size,
                "exhaustive_size": space.size,
            })
    return rows


def run_sweep(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    if cfg.sweep_kind == "marcum":
        for snr_db in cfg.snr_db:
            model = cfg.model(snr_db)
            for k, ck in enumerate(model.c):
                exact, approx = marcum_pair(model, k)
                p = model.params[k]
                rows.append({
                    "c": ck,
                    "snr_db": snr_db,
                    "a": p.a,
                    "b": p.b,
                    "q1_exact": exact,
                    "q1_approx": approx,
                    "q1_rel_error": abs(exact - approx) / exact,
                    "outage_exact": outage_prob(model, k),
                    "outage_approx": outage_prob_cc_approx(model, k, 1),
                })
        return rows
    for q_sum in cfg.q_sums:
        for snr_db in cfg.snr_db:
            model = cfg.model(snr_db)
            space = SearchSpace(model.n_links, q_sum)
            listed = list_search(model, space, cfg.objective)
            full = exhaustive_search(model, space, cfg.objective, cfg.workers)
            rows.append({
                "q_sum": q_sum,
                "snr_db": snr_db,
                "excess": listed.excess,
                "list_size": listed.list_size,
                "list_size_unfiltered": listed.list_size_unfiltered,
                "exhaustive_size": space.size,
                "list_argmin": list(listed.argmin),
                "exhaustive_argmin": list(full.argmin),
                "match": listed.pdp_value == full.pdp_value,
            })
    return rows


RUNNERS = {
    "optimize": run_optimize,
    "conditions": run_conditions,
    "simulate": run_simulate,
    "compare": run_compare,
    "sweep": run_sweep,
}


# -- result files -----------------------------------------------------------

def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, list, tuple)):
        return json.dumps(list(value) if isinstance(value, tuple) else value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    try:
        return json.loads(text)
    except ValueError:
        return text


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        cols.extend(k for k in row if k not in cols)
    return cols


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = _columns(rows)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def format_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(row, allow_nan=False) + "\n" for row in rows)


def write_results(rows: list[dict], path: Path) -> tuple[Path, Path]:
    """Write ``path`` (CSV) and its ``.jsonl`` mirror; return both paths."""
    path.parent.mkdir(parents=True, exist_ok=True)
    mirror = path.with_suffix(".jsonl")
    path.write_text(format_csv(rows))
    mirror.write_text(format_jsonl(rows))
    return path, mirror


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- argument handling ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccharq", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("config", nargs="?", help="YAML experiment file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. --set network.snr_db=30")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--output", help="CSV path; a .jsonl mirror is written alongside")
        p.add_argument("-v", "--verbose", action="store_true")
        if mode in ("optimize", "conditions", "simulate"):
            p.add_argument("--method", choices=("list", "exhaustive"))
        if mode in ("optimize", "conditions", "simulate", "sweep"):
            p.add_argument("--objective")
    return parser


def _overrides(args) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item}: expected KEY=VALUE")
        out[key.strip()] = parse_scalar(value)
    for flag, key in (("seed", "sim.seed"), ("trials", "sim.trials"), ("workers", "run.workers"),
                      ("output", "output.path"), ("method", "optimize.method"),
                      ("objective", "optimize.objective")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.mode, _overrides(args))
        rows = RUNNERS[cfg.mode](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, OverflowError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.output is None:
        sys.stdout.write(format_csv(rows))
    else:
        csv_path, mirror = write_results(rows, cfg.output)
        log.info("wrote %d rows to %s and %s", len(rows), csv_path, mirror)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
