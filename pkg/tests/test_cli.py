import json
import math
from pathlib import Path

import pytest

from ccharq.cli import COMPARE_COLUMNS, format_csv, main, read_csv, read_jsonl, write_results
from ccharq.config import ConfigError, load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GOLDEN = Path(__file__).resolve().parent / "data" / "compare_golden.csv"


def write_yaml(tmp_path, text, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


BASE = """
network:
  c: [0.0, 0.4, 0.7]
  snr_db: 30
budget:
  q_sum: 8
"""


def test_optimize_to_stdout(tmp_path, capsys):
    cfg = write_yaml(tmp_path, BASE)
    code, out, _ = run(["optimize", cfg, "--method", "exhaustive", "--objective", "exact"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split(",")[:3] == ["q_sum", "snr_db", "method"]
    assert len(lines) == 2
    assert '"[3, 3, 2]"' in lines[1]


def test_optimize_list_and_files(tmp_path, capsys):
    cfg = write_yaml(tmp_path, BASE)
    out = tmp_path / "res" / "opt.csv"
    code, _, _ = run(["optimize", cfg, "--output", str(out)], capsys)
    assert code == 0
    rows = read_csv(out)
    assert rows == read_jsonl(out.with_suffix(".jsonl"))
    assert rows[0]["method"] == "list"
    assert sum(rows[0]["argmin"]) == 8


def test_conditions_reports_local_min(tmp_path, capsys):
    cfg = write_yaml(tmp_path, BASE + "optimize:\n  q: [3, 3, 2]\n")
    out = tmp_path / "cond.csv"
    assert run(["conditions", cfg, "--output", str(out)], capsys)[0] == 0
    (row,) = read_csv(out)
    assert row["q"] == [3, 3, 2]
    assert row["local_min_exact"] is True
    assert row["local_min_approx"] == row["pair_conditions"]
    assert row["los_order"] is True


def test_conditions_q_must_match_budget(tmp_path, capsys):
    cfg = write_yaml(tmp_path, BASE + "optimize:\n  q: [3, 3, 3]\n")
    code, _, err = run(["conditions", cfg], capsys)
    assert code == 2
    assert "optimize.q" in err


def test_simulate_sweeps_nack(tmp_path, capsys):
    out = tmp_path / "delay.csv"
    code, _, _ = run(["simulate", str(CONFIGS / "delay.yaml"), "--trials", "20000",
                      "--set", "budget.tau_total=6", "--output", str(out)], capsys)
    assert code == 0
    rows = read_csv(out)
    assert [r["tau_nack"] for r in rows] == [0.0, 0.05, 0.2, 0.8]
    assert all(r["q_sum"] == 6 and r["trials"] == 20000 and r["seed"] == 7 for r in rows)
    assert rows[0]["eta"] == 1.0
    assert len({r["p_drop"] for r in rows}) == 1


def test_simulate_needs_deadline(tmp_path, capsys):
    cfg = write_yaml(tmp_path, BASE)
    code, _, err = run(["simulate", cfg], capsys)
    assert code == 2 and "budget.tau_total" in err


def test_compare_columns(tmp_path, capsys):
    cfg = write_yaml(tmp_path, BASE.replace("q_sum: 8", "q_sum: [6, 9]"))
    out = tmp_path / "cmp.csv"
    assert run(["compare", cfg, "--output", str(out)], capsys)[0] == 0
    rows = read_csv(out)
    assert list(rows[0]) == COMPARE_COLUMNS
    for r in rows:
        assert r["pdp_exhaustive_exact"] <= r["pdp_list"] * (1 + 1e-12)
        assert r["pdp_exhaustive_exact"] <= r["pdp_uniform"] * (1 + 1e-12)
        assert r["exhaustive_size"] == math.comb(r["q_sum"] - 1, 2)


def test_compare_matches_golden(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    assert run(["compare", str(CONFIGS / "compare.yaml"), "--output", str(out)], capsys)[0] == 0
    got, want = read_csv(out), read_csv(GOLDEN)
    assert [r["q_sum"] for r in want] == [q for q in range(5, 31) for _ in (20, 30)]
    assert len(got) == len(want)
    for g, w in zip(got, want):
        assert g.keys() == w.keys()
        for k in w:
            assert g[k] == pytest.approx(w[k], rel=1e-12), (w["q_sum"], w["snr_db"], k)


def test_golden_optimum_against_quadrature(oracle):
    c = (0.1, 0.35, 0.6, 0.85)
    rows = {(r["q_sum"], r["snr_db"]): r for r in read_csv(GOLDEN)}
    for q_sum in (5, 7, 9):
        snr = 10 ** 2.0
        brute = min(oracle.pdp(c, 1.0, snr, q) for q in oracle.compositions(4, q_sum))
        assert rows[(q_sum, 20.0)]["pdp_exhaustive_exact"] == pytest.approx(brute, rel=1e-9)


def test_sweep_marcum(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert run(["sweep", str(CONFIGS / "marcum.yaml"), "--output", str(out)], capsys)[0] == 0
    rows = read_csv(out)
    assert len(rows) == 16
    at40 = [r for r in rows if r["snr_db"] == 40.0]
    assert all(r["q1_rel_error"] < 1e-3 for r in at40)


def test_sweep_list_size(tmp_path, capsys):
    cfg = write_yaml(tmp_path, """
network: {c: [0.05, 0.25, 0.45, 0.65], snr_db: 30}
budget: {q_sum: {start: 8, stop: 12}}
sweep: {kind: list_size}
""")
    code, out, _ = run(["sweep", cfg], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 6


@pytest.mark.parametrize("text,field", [
    ("network: {snr_db: 10}\nbudget: {q_sum: 5}\n", "network.c"),
    ("network: {c: [0.2, 1.0], snr_db: 10}\nbudget: {q_sum: 5}\n", "network.c"),
    ("network: {c: [0.2, 0.3], snr_db: 10}\nbudget: {q_sum: 1}\n", "budget.q_sum"),
    ("network: {c: [0.2], snr_db: 10}\nbudget: {q_sum: 3, tau_total: 4}\n", "budget"),
    ("network: {c: [0.2], snr_db: 10}\nbudget: {q_sum: 3}\nsim: {trails: 5}\n", "sim.trails"),
    ("network: {c: [0.2], snr_db: 10}\nbudget: {q_sum: 3}\noptimize: {objective: best}\n",
     "optimize.objective"),
    ("network: {c: [0.2], snr_db: 10}\nbudget: {tau_p: 1, tau_d: 1}\n", "budget.tau_total"),
    ("network: {c: [0.2], snr_db: 10}\nplots: {dpi: 3}\n", "plots"),
    ("network: {c: [0.2, 0.3], snr_db: 10}\nbudget: {q_sum: 5}\noptimize: {q: [5]}\n", "optimize.q"),
])
def test_config_errors_name_the_field(tmp_path, capsys, text, field):
    code, out, err = run(["optimize", write_yaml(tmp_path, text)], capsys)
    assert code == 2
    assert field in err
    assert out == ""


def test_missing_file_and_bad_override(tmp_path, capsys):
    assert run(["optimize", str(tmp_path / "nope.yaml")], capsys)[0] == 2
    cfg = write_yaml(tmp_path, BASE)
    code, _, err = run(["optimize", cfg, "--set", "network.snr_db"], capsys)
    assert code == 2 and "KEY=VALUE" in err


def test_overrides_without_file(capsys):
    code, out, _ = run(["optimize", "--set", "network.c=[0.1, 0.5]", "--set", "network.snr_db=20",
                        "--set", "budget.q_sum=5"], capsys)
    assert code == 0
    assert "[3, 2]" in out or "[2, 3]" in out


def test_delay_budget_derivation():
    cfg = load_config(CONFIGS / "delay.yaml", "simulate")
    assert cfg.q_sums == (6, 9, 12)
    assert cfg.tau_nack == (0.0, 0.05, 0.2, 0.8)
    with pytest.raises(ConfigError, match="budget.tau_total"):
        load_config(CONFIGS / "delay.yaml", "simulate", {"budget.tau_total": 2})


def test_numeric_failure_exit_code(tmp_path, capsys, monkeypatch):
    import ccharq.cli as cli
    from ccharq.special import ConvergenceError

    def boom(cfg):
        raise ConvergenceError(1.0, 2.0, 10000)

    monkeypatch.setitem(cli.RUNNERS, "optimize", boom)
    code, _, err = run(["optimize", write_yaml(tmp_path, BASE)], capsys)
    assert code == 3 and "numerical failure" in err


def test_csv_jsonl_round_trip(tmp_path):
    rows = [
        {"a": 1, "b": 0.1 + 0.2, "q": [1, 2], "flag": True, "eta": None, "name": "x"},
        {"a": 2, "b": 1e-300, "q": [3], "flag": False, "eta": 1.25, "name": "y"},
    ]
    path, mirror = write_results(rows, tmp_path / "r.csv")
    assert read_csv(path) == rows
    assert read_jsonl(mirror) == rows
    assert format_csv(rows).splitlines()[0] == "a,b,q,flag,eta,name"


def test_outputs_are_byte_identical(tmp_path, capsys):
    paths = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}" / "d.csv"
        argv = ["simulate", str(CONFIGS / "delay.yaml"), "--trials", "140000", "--workers", str(workers),
                "--set", "budget.tau_total=[6, 9]", "--output", str(out)]
        assert run(argv, capsys)[0] == 0
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].with_suffix(".jsonl").read_bytes() == paths[1].with_suffix(".jsonl").read_bytes()
    for line in paths[0].with_suffix(".jsonl").read_text().splitlines():
        json.loads(line)
