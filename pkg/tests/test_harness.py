import json
from dataclasses import replace

import pytest

from heisenberg_aag.attack import Budget
from heisenberg_aag.cli import main
from heisenberg_aag.errors import ConfigError, IncomparableRows
from heisenberg_aag.harness import (
    CSV_HEADER,
    REPLICATION_PROFILE,
    ExperimentConfig,
    SummaryRow,
    default_parallelism,
    load_batch,
    records_to_csv,
    render_table,
    run_batch,
    run_grid,
    trend_report,
    trend_reports,
    trial_seed,
    write_batch,
)

SMALL = ExperimentConfig(n=2, N1=5, N2=5, L=4, L1=3, L2=5, M=30, budget=Budget(iterations=40), trials=12, master_seed=99)


def row(rate, **kw):
    cfg = replace(SMALL, **kw)
    return SummaryRow(cfg, 100, round(rate * 100), 0, rate, 0.0, 0.0)


def test_replication_profile():
    p = REPLICATION_PROFILE
    assert (p.L, p.L1, p.L2, p.N1, p.N2, p.M) == (50, 40, 43, 20, 20, 1000)
    assert p.budget == Budget(seconds=1800.0)


def test_config_json_round_trip():
    doc = SMALL.to_dict()
    assert doc["budget"] == {"iterations": 40}
    assert ExperimentConfig.from_dict(json.loads(json.dumps(doc))) == SMALL


@pytest.mark.parametrize("bad", [
    {"trials": 0},
    {"L1": 6, "L2": 5},
    {"M": -1},
    {"budget": {"minutes": 3}},
    {"budget": {"iterations": 3, "seconds": 2}},
    {"role": "eve"},
    {"colour": "red"},
    {"master_seed": -1},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL.to_dict(), **bad})


def test_trial_seeds_distinct_and_stable():
    seeds = [trial_seed(7, t) for t in range(200)]
    assert len(set(seeds)) == 200
    assert seeds == [trial_seed(7, t) for t in range(200)]
    assert trial_seed(8, 0) != seeds[0]
    assert all(0 <= s < 2**64 for s in seeds)


def test_default_parallelism(monkeypatch):
    monkeypatch.delenv("HEISENBERG_AAG_PARALLELISM", raising=False)
    assert default_parallelism() == 1
    monkeypatch.setenv("HEISENBERG_AAG_PARALLELISM", "3")
    assert default_parallelism() == 3
    monkeypatch.setenv("HEISENBERG_AAG_PARALLELISM", "many")
    with pytest.raises(ConfigError):
        default_parallelism()


def test_single_factor_batch_always_succeeds():
    cfg = replace(SMALL, L=1, M=10, budget=Budget(iterations=1), trials=8)
    records, summary = run_batch(cfg)
    assert summary.success_rate == 1.0
    assert all(r.verified and r.iterations == 1 for r in records)


def test_batch_deterministic_across_parallelism():
    one = run_batch(SMALL)[0]
    again = run_batch(SMALL)[0]
    par = run_batch(replace(SMALL, parallelism=3))[0]
    assert records_to_csv(one, False) == records_to_csv(again, False) == records_to_csv(par, False)


def test_summary_matches_records():
    records, summary = run_batch(SMALL)
    assert summary.success_rate == sum(r.outcome == "success" for r in records) / len(records)
    assert all(r.verified for r in records if r.outcome == "success")
    assert [r.trial for r in records] == list(range(SMALL.trials))


def test_persistence_round_trip(tmp_path):
    records, summary = run_batch(SMALL)
    csv_path, json_path = write_batch(tmp_path / "b", records, summary)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == SMALL.trials + 1
    loaded, s2 = load_batch(csv_path)
    assert s2.success_rate == summary.success_rate
    assert [(r.trial, r.seed, r.outcome, r.iterations, r.verified) for r in loaded] == [
        (r.trial, r.seed, r.outcome, r.iterations, r.verified) for r in records
    ]


def test_load_detects_tampered_key(tmp_path):
    records, summary = run_batch(SMALL)
    _, json_path = write_batch(tmp_path / "b", records, summary)
    doc = json.loads(json_path.read_text())
    trial, word = next(iter(doc["recovered"].items()))
    word[0][1] = -word[0][1]
    doc["recovered"][trial] = word + [[0, 1], [1, 1]]
    json_path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_batch(tmp_path / "b.csv")


def test_wall_clock_batch_records_seconds(tmp_path):
    cfg = replace(SMALL, budget=Budget(seconds=0.05), trials=3)
    records, summary = run_batch(cfg)
    csv_path, _ = write_batch(tmp_path / "w", records, summary)
    body = [line.split(",") for line in csv_path.read_text().splitlines()[1:]]
    assert all(field[4] for field in body)


def test_run_grid_rows_in_order():
    cells = [replace(SMALL, L=L, trials=5) for L in (1, 6)]
    rows = run_grid(cells)
    assert [r.config.L for r in rows] == [1, 6]
    assert rows[0].success_rate == 1.0
    single, batch = run_grid([cells[0]])[0], run_batch(cells[0])[1]
    assert (single.config, single.successes, single.trials) == (batch.config, batch.successes, batch.trials)
    with pytest.raises(ConfigError):
        run_grid([])


def test_run_grid_annotates_failed_cell(monkeypatch):
    import heisenberg_aag.harness as H

    real = H.run_batch

    def flaky(cfg):
        if cfg.L == 6:
            raise RuntimeError("boom")
        return real(cfg)

    monkeypatch.setattr(H, "run_batch", flaky)
    rows = H.run_grid([replace(SMALL, L=1, trials=3), replace(SMALL, L=6, trials=3)])
    assert rows[0].note == "" and rows[1].note == "error: boom"
    assert "error" in render_table(rows)


def test_render_table():
    rows = [row(0.53, L=10, n=5), row(0.11, L=20, n=5), row(0.39, L=10, n=6)]
    text = render_table(rows)
    assert "L=10" in text and "L=20" in text
    assert "| 5 |  11  |" in text and "53%" in text and "39%" in text


def test_trend_key_length():
    v = trend_report([row(0.53, L=10), row(0.11, L=20), row(0.01, L=50)])
    assert v.parameter == "L"
    assert v.text == "decreasing, consistent with paper"
    assert v.consistent is True


def test_trend_flat():
    v = trend_report([row(0.4, L=10), row(0.4, L=20), row(0.42, L=50)])
    assert v.direction == "flat"


def test_trend_hirsch_anomaly():
    v = trend_report([row(0.11, n=3), row(0.69, n=6)])
    assert v.text == "increasing with n, matching paper's anomaly"


def test_trend_element_length():
    v = trend_report([row(0.29, L1=10, L2=13), row(0.53, L1=20, L2=23)])
    assert v.parameter == "element_length" and v.consistent is True


def test_trend_incomparable():
    with pytest.raises(IncomparableRows):
        trend_report([row(0.5, L=10), row(0.4, L=20, n=3)])
    with pytest.raises(IncomparableRows):
        trend_report([row(0.5, L=10), row(0.4, L=20, M=5)])
    with pytest.raises(IncomparableRows):
        trend_report([row(0.5)])


def test_trend_reports_families():
    rows = [row(r, n=n, L=L) for n, L, r in [(5, 10, .53), (5, 20, .11), (6, 10, .39), (6, 20, .07)]]
    verdicts = trend_reports(rows)
    assert sorted(v.parameter for v in verdicts) == ["L", "L", "n", "n"]


# --- CLI ---------------------------------------------------------------------------

FLAGS = ["--n", "2", "--public-size", "5", "--key-length", "4", "--min-len", "3", "--max-len", "5"]


def test_cli_session(capsys):
    assert main(["session", *FLAGS, "--seed", "3", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n"] == 2 and len(doc["alice_public"]) == 5


def test_cli_attack_and_instance_file(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    args = [*FLAGS, "--memory", "50", "--budget-iters", "50"]
    assert main(["attack", *args, "--seed", "3", "--save-instance", str(inst)]) == 0
    first = capsys.readouterr().out
    assert main(["attack", *args, "--instance", str(inst)]) == 0
    second = capsys.readouterr().out
    assert first.split("(")[0] == second.split("(")[0]
    assert "verified=true" in first or first.startswith("FAIL")


def test_cli_batch_grid_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL.to_dict()))
    assert main(["batch", "--config", str(cfg), "--key-length", "2", "--out", str(tmp_path / "b2")]) == 0
    assert main(["batch", "--config", str(cfg), "--key-length", "10", "--out", str(tmp_path / "b10")]) == 0
    capsys.readouterr()
    assert main(["report", str(tmp_path / "b2.csv"), str(tmp_path / "b10.csv")]) == 0
    out = capsys.readouterr().out
    assert "L: (2:" in out

    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"base": {**SMALL.to_dict(), "trials": 4}, "cells": [{"L": 1}, {"L": 8}]}))
    assert main(["grid", "--grid", str(grid), "--out", str(tmp_path / "g")]) == 0
    out = capsys.readouterr().out
    assert "L=1" in out and "L=8" in out
    assert (tmp_path / "g" / "cell_001.csv").exists()


def test_cli_config_errors(tmp_path, capsys):
    assert main(["batch", "--trials", "0"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["batch", "--config", str(bad)]) == 2
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"cells": []}))
    assert main(["grid", "--grid", str(grid)]) == 2
    assert main(["report", str(tmp_path / "missing.csv")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["batch", "--budget-iters", "3", "--budget-secs", "2"])
    assert exc.value.code == 2
