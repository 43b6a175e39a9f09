"""Seeded batches of attack trials, success-rate tables and trend verdicts."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .attack import AttackConfig, AttackResult, Budget, CapturedInstance, attack, verify_result
from .errors import BadParams, ConfigError, GroupOverflowError, IncomparableRows
from .group import GroupParams, hirsch_length
from .protocol import run_session

log = logging.getLogger(__name__)

PARALLELISM_ENV = "HEISENBERG_AAG_PARALLELISM"
CSV_HEADER = ("trial", "seed", "outcome", "iterations", "seconds", "verified")


def default_parallelism() -> int:
    raw = os.environ.get(PARALLELISM_ENV)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{PARALLELISM_ENV}={raw!r} is not an integer") from exc
    if value < 1:
        raise ConfigError(f"{PARALLELISM_ENV} must be >= 1")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 6
    N1: int = 20
    N2: int = 20
    L: int = 50
    L1: int = 40
    L2: int = 43
    M: int = 1000
    budget: Budget = Budget(seconds=1800.0)
    trials: int = 100
    master_seed: int = 0
    dedup: bool = True
    parallelism: int = 1
    # whose private key the eavesdropper goes after
    role: str = "alice"

    def __post_init__(self):
        for name in ("n", "N1", "N2", "L", "L1", "L2", "M", "trials", "parallelism"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.L1 > self.L2:
            raise ConfigError(f"L1={self.L1} exceeds L2={self.L2}")
        if not isinstance(self.budget, Budget):
            raise ConfigError("budget must be a Budget")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.role not in ("alice", "bob"):
            raise ConfigError(f"role must be 'alice' or 'bob', got {self.role!r}")

    def attack_config(self) -> AttackConfig:
        return AttackConfig(memory=self.M, budget=self.budget, dedup=self.dedup)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["budget"] = (
            {"iterations": self.budget.iterations}
            if self.budget.iterations is not None
            else {"seconds": self.budget.seconds}
        )
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        values = dict(data)
        if "budget" in values:
            values["budget"] = parse_budget(values["budget"])
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def parse_budget(raw: Any) -> Budget:
    if isinstance(raw, Budget):
        return raw
    if not isinstance(raw, dict) or len(raw) != 1 or not set(raw) <= {"iterations", "seconds"}:
        raise ConfigError(f'budget must be {{"iterations": k}} or {{"seconds": t}}, got {raw!r}')
    try:
        if "iterations" in raw:
            return Budget(iterations=int(raw["iterations"]))
        return Budget(seconds=float(raw["seconds"]))
    except (BadParams, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# Safe parameters recommended for H^{2n+1}: key length 50 over 40..43-letter elements.
REPLICATION_PROFILE = ExperimentConfig()


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit seed for one trial, derived from the master seed by spawn key."""
    state = np.random.SeedSequence(master_seed, spawn_key=(trial,)).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    outcome: str  # "success", "fail" or "error"
    iterations: int
    seconds: float
    verified: bool
    recovered: Optional[tuple[tuple[int, int], ...]] = None
    error: str = ""


@dataclass(frozen=True)
class SummaryRow:
    config: ExperimentConfig
    trials: int
    successes: int
    errors: int
    success_rate: float
    mean_seconds: float
    median_seconds: float
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["config"] = self.config.to_dict()
        return out


def build_instance(config: ExperimentConfig, seed: int) -> CapturedInstance:
    rng = np.random.default_rng(seed)
    session = run_session(GroupParams(config.n), config.N1, config.N2, config.L, (config.L1, config.L2), rng)
    return CapturedInstance.from_session(session, config.role)


def run_trial(config: ExperimentConfig, trial: int) -> TrialRecord:
    seed = trial_seed(config.master_seed, trial)
    try:
        instance = build_instance(config, seed)
        result = attack(instance, config.attack_config())
    except GroupOverflowError as exc:
        log.warning("trial %d overflowed: %s", trial, exc)
        return TrialRecord(trial, seed, "error", 0, 0.0, False, error=str(exc))
    verified = result.success and verify_result(instance, result)
    if result.success and not verified:
        # never happens unless the attack is broken; keep it visible
        log.error("trial %d: success failed verification", trial)
    return TrialRecord(
        trial,
        seed,
        "success" if result.success else "fail",
        result.stats.iterations,
        result.stats.elapsed,
        verified,
        result.recovered_conjugator if result.success else None,
    )


def _run_trial_args(args: tuple[ExperimentConfig, int]) -> TrialRecord:
    return run_trial(*args)


def summarize(config: ExperimentConfig, records: Sequence[TrialRecord], note: str = "") -> SummaryRow:
    trials = len(records)
    successes = sum(r.outcome == "success" for r in records)
    errors = sum(r.outcome == "error" for r in records)
    secs = [r.seconds for r in records]
    return SummaryRow(
        config,
        trials,
        successes,
        errors,
        successes / trials if trials else 0.0,
        statistics.fmean(secs) if secs else 0.0,
        statistics.median(secs) if secs else 0.0,
        note,
    )


def run_batch(config: ExperimentConfig) -> tuple[list[TrialRecord], SummaryRow]:
    jobs = [(config, t) for t in range(config.trials)]
    if config.parallelism == 1:
        records = [run_trial(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            records = list(pool.map(_run_trial_args, jobs, chunksize=max(1, len(jobs) // (4 * config.parallelism))))
    records.sort(key=lambda r: r.trial)
    return records, summarize(config, records)


def run_grid(cells: Sequence[ExperimentConfig]) -> list[SummaryRow]:
    if not cells:
        raise ConfigError("grid has no cells")
    rows = []
    for cell in cells:
        try:
            rows.append(run_batch(cell)[1])
        except Exception as exc:  # annotate, keep the rest of the grid
            log.exception("grid cell failed")
            rows.append(SummaryRow(cell, 0, 0, 0, 0.0, 0.0, 0.0, note=f"error: {exc}"))
    return rows


# --- persistence --------------------------------------------------------------


def records_to_csv(records: Sequence[TrialRecord], with_seconds: bool) -> str:
    """CSV text; ``seconds`` is left blank unless ``with_seconds`` is set."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([
            r.trial,
            r.seed,
            r.outcome,
            r.iterations,
            f"{r.seconds:.6f}" if with_seconds else "",
            "true" if r.verified else "false",
        ])
    return buf.getvalue()


def write_batch(path: str | Path, records: Sequence[TrialRecord], summary: SummaryRow) -> tuple[Path, Path]:
    """Write ``<path>.csv`` and ``<path>.json``; returns both paths.

    Timings go into the CSV only under a wall-clock budget so that iteration
    budgets give byte-identical files.
    """
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    csv_path.write_text(records_to_csv(records, not summary.config.budget.deterministic))
    doc = summary.to_dict()
    doc["recovered"] = {str(r.trial): [list(f) for f in r.recovered] for r in records if r.recovered is not None}
    doc["errors_detail"] = {str(r.trial): r.error for r in records if r.error}
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_batch(path: str | Path, reverify: bool = True) -> tuple[list[TrialRecord], SummaryRow]:
    """Read a persisted batch; successes are re-verified against regenerated instances."""
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    doc = json.loads(base.with_suffix(".json").read_text())
    config = ExperimentConfig.from_dict(doc["config"])
    recovered = {int(k): tuple(tuple(f) for f in v) for k, v in doc.get("recovered", {}).items()}
    records = []
    with open(base.with_suffix(".csv"), newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            trial = int(row["trial"])
            records.append(TrialRecord(
                trial,
                int(row["seed"]),
                row["outcome"],
                int(row["iterations"]),
                float(row["seconds"]) if row["seconds"] else 0.0,
                row["verified"] == "true",
                recovered.get(trial),
            ))
    if reverify:
        for r in records:
            if r.outcome != "success":
                continue
            if r.recovered is None or not r.verified or r.seed != trial_seed(config.master_seed, r.trial):
                raise ConfigError(f"trial {r.trial}: persisted success lacks a verifiable key")
            instance = build_instance(config, r.seed)
            if not verify_result(instance, AttackResult(True, r.recovered)):
                raise ConfigError(f"trial {r.trial}: persisted key does not replay the capture")
    summary = summarize(config, records)
    # seconds live in the JSON summary when the CSV omits them
    if config.budget.deterministic:
        summary = replace(summary, mean_seconds=doc["mean_seconds"], median_seconds=doc["median_seconds"])
    return records, summary


# --- tables and trends ----------------------------------------------------------


def _cell_label(c: ExperimentConfig, show_L: bool, show_range: bool) -> str:
    parts = []
    if show_L:
        parts.append(f"L={c.L}")
    if show_range:
        parts.append(f"[L1,L2]=[{c.L1},{c.L2}]")
    return " ".join(parts) or "rate"


def render_table(rows: Sequence[SummaryRow]) -> str:
    """Text table with one line per n and one rate column per (L, [L1,L2])."""
    show_L = len({r.config.L for r in rows}) > 1
    show_range = len({(r.config.L1, r.config.L2) for r in rows}) > 1
    columns: list[str] = []
    cells: dict[tuple[int, str], str] = {}
    for r in rows:
        label = _cell_label(r.config, show_L, show_range)
        if label not in columns:
            columns.append(label)
        cells[(r.config.n, label)] = "error" if r.note.startswith("error") else f"{100 * r.success_rate:.0f}%"
    ns = sorted({r.config.n for r in rows})
    header = ["n", "h(G)"] + columns
    body = [[str(n), str(hirsch_length(GroupParams(n)))] + [cells.get((n, c), "") for c in columns] for n in ns]
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    fmt = lambda line: "| " + " | ".join(v.center(w) for v, w in zip(line, widths)) + " |"
    rule = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    return "\n".join([rule, fmt(header), rule, *map(fmt, body), rule])


_STUDIED = {
    "L": lambda c: c.L,
    "element_length": lambda c: (c.L1, c.L2),
    "n": lambda c: c.n,
}
_FIXED = ("N1", "N2", "M", "budget", "dedup", "role")


@dataclass(frozen=True)
class TrendVerdict:
    parameter: str
    values: tuple
    rates: tuple[float, ...]
    direction: str  # "increasing", "decreasing", "flat" or "mixed"
    consistent: Optional[bool]
    text: str


def _direction(rates: Sequence[float], flat_tol: float) -> str:
    if max(rates) - min(rates) <= flat_tol:
        return "flat"
    diffs = [b - a for a, b in zip(rates, rates[1:])]
    if all(d <= flat_tol for d in diffs) and rates[-1] < rates[0]:
        return "decreasing"
    if all(d >= -flat_tol for d in diffs) and rates[-1] > rates[0]:
        return "increasing"
    return "mixed"


def _fixed_key(c: ExperimentConfig, studied: str) -> tuple:
    key = tuple(getattr(c, f) for f in _FIXED)
    return key + tuple(fn(c) for name, fn in _STUDIED.items() if name != studied)


def trend_report(rows: Sequence[SummaryRow], flat_tol: float = 0.05, dramatic: float = 0.5) -> TrendVerdict:
    """Verdict for rows that differ in exactly one studied parameter."""
    if len(rows) < 2:
        raise IncomparableRows("need at least two rows")
    varying = [name for name, fn in _STUDIED.items() if len({fn(r.config) for r in rows}) > 1]
    if len(varying) != 1:
        raise IncomparableRows(f"rows must differ in exactly one of L, element length, n; vary in {varying}")
    studied = varying[0]
    if len({_fixed_key(r.config, studied) for r in rows}) != 1:
        raise IncomparableRows("rows differ in a parameter other than the one under study")
    ordered = sorted(rows, key=lambda r: _STUDIED[studied](r.config))
    values = tuple(_STUDIED[studied](r.config) for r in ordered)
    if len(set(values)) != len(values):
        raise IncomparableRows(f"duplicate rows for {studied}")
    rates = tuple(r.success_rate for r in ordered)
    direction = _direction(rates, flat_tol)

    if studied == "L":
        consistent = direction == "decreasing"
        text = f"{direction}, " + ("consistent with paper" if consistent else "expected decreasing per paper")
    elif studied == "element_length":
        consistent = max(rates) - min(rates) <= dramatic
        text = f"{direction}, " + ("consistent with paper" if consistent else "dramatic change, unlike paper")
    else:
        consistent = True if direction == "increasing" else None
        text = (
            "increasing with n, matching paper's anomaly"
            if direction == "increasing"
            else f"{direction} with n, paper states no expected direction"
        )
    return TrendVerdict(studied, values, rates, direction, consistent, text)


def trend_reports(rows: Sequence[SummaryRow], **kwargs) -> list[TrendVerdict]:
    """Every one-parameter family with at least two rows inside a mixed table."""
    out = []
    for studied in _STUDIED:
        groups: dict[tuple, list[SummaryRow]] = {}
        for r in rows:
            groups.setdefault(_fixed_key(r.config, studied), []).append(r)
        for family in groups.values():
            if len({_STUDIED[studied](r.config) for r in family}) == len(family) >= 2:
                out.append(trend_report(family, **kwargs))
    return out
