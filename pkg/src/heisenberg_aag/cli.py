"""Command line entry point: ``heisenberg-aag {session,attack,batch,grid,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import group as G
from .attack import CapturedInstance, attack, verify_result
from .errors import BadParams, BadRange, ConfigError, IncomparableRows
from .group import GroupParams
from .harness import (
    REPLICATION_PROFILE,
    ExperimentConfig,
    default_parallelism,
    load_batch,
    render_table,
    run_batch,
    run_grid,
    trend_reports,
    write_batch,
)
from .protocol import PublicSet, run_session

EXIT_CONFIG = 2


def instance_to_dict(instance: CapturedInstance) -> dict[str, Any]:
    fmt = G.format_element
    return {
        "n": instance.attacker_generators.params.n,
        "attacker_generators": [fmt(g) for g in instance.attacker_generators.elements],
        "target_tuple": [fmt(g) for g in instance.target_tuple],
        "captured_tuple": [fmt(g) for g in instance.captured_tuple],
    }


def instance_from_dict(doc: dict[str, Any]) -> CapturedInstance:
    parse = G.parse_element
    try:
        gens = PublicSet(tuple(parse(s) for s in doc["attacker_generators"]))
        return CapturedInstance(
            gens,
            tuple(parse(s) for s in doc["target_tuple"]),
            tuple(parse(s) for s in doc["captured_tuple"]),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad instance file: {exc}") from exc


def _add_group_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="rank n of H^{2n+1}")
    p.add_argument("--N1", type=int, help="size of Alice's public set")
    p.add_argument("--N2", type=int, help="size of Bob's public set")
    p.add_argument("--public-size", type=int, help="set N1 and N2 together")
    p.add_argument("--key-length", dest="L", type=int, help="private key length L")
    p.add_argument("--min-len", dest="L1", type=int, help="shortest public element word L1")
    p.add_argument("--max-len", dest="L2", type=int, help="longest public element word L2")
    p.add_argument("--seed", dest="master_seed", type=int, help="master seed")


def _add_attack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--memory", dest="M", type=int, help="beam memory M")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--budget-iters", type=int, help="stop after this many iterations")
    budget.add_argument("--budget-secs", type=float, help="stop after this many seconds per trial")
    p.add_argument("--dedup", dest="dedup", action="store_true", default=None, help="drop duplicate candidate tuples")
    p.add_argument("--no-dedup", dest="dedup", action="store_false", help="keep duplicates, as in the printed algorithm")
    p.add_argument("--role", choices=("alice", "bob"), help="whose private key to attack")


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name in ("n", "N1", "N2", "L", "L1", "L2", "master_seed", "M", "dedup", "role", "trials", "parallelism"):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    if getattr(args, "public_size", None) is not None:
        out["N1"] = out["N2"] = args.public_size
    if getattr(args, "budget_iters", None) is not None:
        out["budget"] = {"iterations": args.budget_iters}
    elif getattr(args, "budget_secs", None) is not None:
        out["budget"] = {"seconds": args.budget_secs}
    return out


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Profile defaults, then the config file, then command line flags."""
    base = REPLICATION_PROFILE.to_dict()
    base["parallelism"] = default_parallelism()
    if getattr(args, "config", None):
        data = _read_json(args.config)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        base.update(data)
    base.update(_overrides(args))
    return ExperimentConfig.from_dict(base)


def cmd_session(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    rng = np.random.default_rng(cfg.master_seed)
    session = run_session(GroupParams(cfg.n), cfg.N1, cfg.N2, cfg.L, (cfg.L1, cfg.L2), rng)
    doc = session.to_dict()
    if args.json:
        print(json.dumps(doc, indent=2))
        return 0
    print(f"H^{2 * cfg.n + 1}  N1={cfg.N1} N2={cfg.N2} L={cfg.L} [L1,L2]=[{cfg.L1},{cfg.L2}]")
    for key in ("a_element", "b_element", "shared_key_alice", "shared_key_bob"):
        print(f"{key:18} {doc[key]}")
    print(f"alice_key          {doc['alice_key']}")
    print(f"bob_key            {doc['bob_key']}")
    return 0


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if args.instance:
        instance = instance_from_dict(_read_json(args.instance))
    else:
        rng = np.random.default_rng(cfg.master_seed)
        session = run_session(GroupParams(cfg.n), cfg.N1, cfg.N2, cfg.L, (cfg.L1, cfg.L2), rng)
        instance = CapturedInstance.from_session(session, cfg.role)
    if args.save_instance:
        Path(args.save_instance).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n")

    sink = None
    if args.progress:
        sink = lambda rec: print(json.dumps(rec), file=sys.stderr, flush=True)
    result = attack(instance, cfg.attack_config(), progress=sink)
    s = result.stats
    if result.success:
        ok = verify_result(instance, result)
        print(f"SUCCESS after {s.iterations} iterations ({s.elapsed:.3f}s), verified={str(ok).lower()}")
        print(f"recovered word: {list(result.recovered_conjugator)}")
        print(f"recovered element: {result.recovered_element}")
    else:
        print(f"FAIL after {s.iterations} iterations ({s.elapsed:.3f}s)")
    print(f"expanded={s.expanded} peak_beam={s.peak_beam} peak_candidates={s.peak_candidates}")
    return 0


def _print_summary(summary) -> None:
    print(render_table([summary]))
    print(
        f"trials={summary.trials} successes={summary.successes} errors={summary.errors} "
        f"success_rate={summary.success_rate:.4f} mean_seconds={summary.mean_seconds:.3f} "
        f"median_seconds={summary.median_seconds:.3f}"
    )


def cmd_batch(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    records, summary = run_batch(cfg)
    if args.out:
        csv_path, json_path = write_batch(args.out, records, summary)
        print(f"wrote {csv_path} and {json_path}")
    _print_summary(summary)
    return 0


def load_grid(path: str) -> list[ExperimentConfig]:
    data = _read_json(path)
    if isinstance(data, list):
        base, cells = {}, data
    elif isinstance(data, dict):
        base, cells = data.get("base", {}), data.get("cells", [])
    else:
        raise ConfigError("grid file must hold a list of cells or {base, cells}")
    if not cells:
        raise ConfigError("grid has no cells")
    defaults = REPLICATION_PROFILE.to_dict()
    defaults["parallelism"] = default_parallelism()
    return [ExperimentConfig.from_dict({**defaults, **base, **cell}) for cell in cells]


def _print_trends(rows) -> None:
    verdicts = trend_reports(rows)
    if not verdicts:
        print("no one-parameter families to compare")
    for v in verdicts:
        pairs = ", ".join(f"{val}:{rate:.2f}" for val, rate in zip(v.values, v.rates))
        print(f"{v.parameter}: ({pairs}) -> {v.text}")


def cmd_grid(args: argparse.Namespace) -> int:
    cells = load_grid(args.grid)
    overrides = _overrides(args)
    if overrides:
        cells = [ExperimentConfig.from_dict({**c.to_dict(), **overrides}) for c in cells]
    if args.out:
        rows = []
        for k, cell in enumerate(cells):
            records, summary = run_batch(cell)
            write_batch(Path(args.out) / f"cell_{k:03d}", records, summary)
            rows.append(summary)
    else:
        rows = run_grid(cells)
    print(render_table(rows))
    _print_trends(rows)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rows = []
    for path in args.batches:
        try:
            rows.append(load_batch(path)[1])
        except OSError as exc:
            raise ConfigError(f"cannot read batch {path}: {exc}") from exc
    print(render_table(rows))
    _print_trends(rows)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heisenberg-aag",
        description="AAG key exchange over Heisenberg groups and the memory length-based attack.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("session", help="generate and print one AAG session")
    _add_group_flags(p)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--json", action="store_true", help="print the full session as JSON")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("attack", help="run one attack on a generated or loaded instance")
    _add_group_flags(p)
    _add_attack_flags(p)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--instance", help="load the captured instance from this JSON file")
    p.add_argument("--save-instance", help="write the captured instance to this JSON file")
    p.add_argument("--progress", action="store_true", help="per-iteration JSON records on stderr")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("batch", help="run a seeded batch of trials")
    _add_group_flags(p)
    _add_attack_flags(p)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--trials", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--out", help="write <out>.csv and <out>.json")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("grid", help="run every cell of a grid config file")
    p.add_argument("--grid", required=True, help="JSON grid: list of cells or {base, cells}")
    p.add_argument("--trials", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--out", help="directory for per-cell CSV/JSON files")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="success-rate table and trend verdicts from saved batches")
    p.add_argument("batches", nargs="+", help="batch CSV (or stem) paths written by 'batch'")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, IncomparableRows, BadParams, BadRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
