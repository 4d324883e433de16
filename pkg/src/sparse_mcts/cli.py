"""Command-line pipeline: gen, label, train, solve, plot and exact.

Every flag can also come from a JSON file passed with ``--config``; keys are
the flag names with dashes or underscores. Flags given on the command line
win over the file. Exit status is 0 on success, 2 when inputs fail
validation and 1 on I/O problems.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import plotting
from .errors import (
    CorruptFile,
    EdgeLimitExceeded,
    ParseError,
    SparseMCTSError,
    TerminalLimitExceeded,
    Timeout,
    VersionMismatch,
)
from .exact import OracleCache, exact_solution, exact_spanner
from .gnn import PolicyModel, load_model, save_model
from .instances import (
    ADD_SPANNER,
    MULT_SPANNER,
    STEINER,
    Instance,
    generate_geometric,
    load_dataset,
    load_samples,
    load_stp,
    make_labeled_samples,
    save_dataset,
    save_samples,
)
from .mcts import MCTS, SearchConfig
from .sparsifiers import baseline, prune
from .train import TrainConfig, train

log = logging.getLogger("sparse_mcts")

SEED_ENV = "SPARSE_MCTS_SEED"
KIND_ALIASES = {"steiner": STEINER, "mult": MULT_SPANNER, "add": ADD_SPANNER}
RESULT_COLUMNS = [
    "instance", "kind", "n", "n_terminals",
    "baseline_cost", "mcts_cost", "random_mcts_cost", "exact_cost",
]
TIMING_COLUMNS = ["instance", "baseline_s", "mcts_s", "random_mcts_s", "exact_s"]
ORACLE_FAILURES = (Timeout, EdgeLimitExceeded, TerminalLimitExceeded)


class UsageError(Exception):
    """Bad flag values that argparse itself cannot catch."""


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def read_instances(path) -> list[Instance]:
    path = Path(path)
    if path.suffix.lower() == ".stp":
        return [load_stp(path)]
    return load_dataset(path)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def sidecar(path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_{suffix}.csv")


# -- subcommands --------------------------------------------------------------------------


def cmd_gen(args) -> None:
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    kind = KIND_ALIASES[args.kind]
    instances, attempts = [], []
    for i in range(args.count):
        inst, tries = generate_geometric(
            args.n, instance_seed(args.seed, i), kind,
            alpha=args.alpha if kind == MULT_SPANNER else None,
            beta_w=args.beta_w if kind == ADD_SPANNER else None,
            max_retries=args.max_retries, return_attempts=True,
        )
        instances.append(inst)
        attempts.append(tries)
    save_dataset(args.out, instances)
    retries = [a - 1 for a in attempts]
    print(
        f"wrote {len(instances)} {kind} instances (n={args.n}) to {args.out}; "
        f"connectivity retries: total {sum(retries)}, max {max(retries, default=0)}"
    )


def cmd_label(args) -> None:
    instances = read_instances(args.dataset)
    cache = OracleCache(args.cache)
    samples, skipped = [], 0
    for i, inst in enumerate(instances):
        try:
            sol = cache.solve(inst, args.budget)
        except ORACLE_FAILURES as exc:
            log.warning("instance %d skipped: %s", i, exc)
            skipped += 1
            continue
        nodes = sol.nodes() | set(inst.terminals)
        samples += make_labeled_samples(inst, nodes, args.max_perms, seed=[args.seed, i], instance_index=i)
    save_samples(args.out, instances, samples)
    print(f"wrote {len(samples)} samples from {len(instances) - skipped} instances to {args.out}; skipped {skipped}")


def cmd_train(args) -> None:
    instances, samples = load_samples(args.samples)
    config = TrainConfig(
        lr=args.lr, batch_size=args.batch_size, max_epochs=args.epochs,
        patience=args.patience, val_fraction=args.val_fraction, seed=args.seed,
    )
    model = PolicyModel(args.d, args.layers, seed=args.seed)
    best, history = train(model, instances, samples, config)
    save_model(best, args.out)
    hist_path = args.history or sidecar(args.out, "history")
    write_csv(
        hist_path, ["epoch", "train_loss", "val_loss"],
        [[h["epoch"], repr(h["train_loss"]), "" if np.isnan(h["val_loss"]) else repr(h["val_loss"])] for h in history],
    )
    print(f"trained {len(history)} epochs on {len(samples)} samples; model {args.out}, history {hist_path}")


def _search_config(args, seed: int) -> SearchConfig:
    return SearchConfig(
        c_puct=args.c_puct, epsilon=args.epsilon, sample_size=args.sample_size,
        height_fraction=args.height, seed=seed, max_rounds=args.max_rounds,
    )


def _solve_one(job):
    index, inst_dict, model_path, model_seed, args = job
    inst = Instance.from_dict(inst_dict)
    row = {"instance": index, "kind": inst.kind, "n": inst.n, "n_terminals": len(inst.terminals)}
    times = {"instance": index}
    t = time.perf_counter()
    row["baseline_cost"] = prune(inst, baseline(inst)).total_weight
    times["baseline_s"] = time.perf_counter() - t
    seed = instance_seed(args.seed, index)
    runs = []
    if args.policy in ("gnn", "both"):
        model = load_model(model_path) if model_path else PolicyModel(args.d, args.layers, seed=model_seed)
        runs.append(("mcts", model.forward))
    if args.policy in ("random", "both"):
        runs.append(("random_mcts", None))
    for col, policy in runs:
        t = time.perf_counter()
        row[f"{col}_cost"] = MCTS(inst, policy, _search_config(args, seed)).run().total_weight
        times[f"{col}_s"] = time.perf_counter() - t
    if args.exact:
        t = time.perf_counter()
        try:
            row["exact_cost"] = exact_solution(inst, args.budget).total_weight
        except ORACLE_FAILURES as exc:
            log.warning("instance %d: no exact cost (%s)", index, exc)
        times["exact_s"] = time.perf_counter() - t
    return row, times


def _result_row(r: dict) -> list:
    return [r["instance"], r["kind"], r["n"], r["n_terminals"]] + [fmt(r.get(c)) for c in RESULT_COLUMNS[4:]]


def _seconds(x) -> str:
    return "" if x is None else f"{x:.6f}"


def cmd_solve(args) -> None:
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    instances = read_instances(args.dataset)
    if args.model:
        load_model(args.model)  # fail fast on a bad file
    elif args.policy != "random":
        log.warning("no --model given; the gnn policy uses an untrained network")
    jobs = [(i, inst.to_dict(), args.model, args.seed, args) for i, inst in enumerate(instances)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_solve_one, jobs))
    else:
        results = [_solve_one(j) for j in jobs]
    results.sort(key=lambda r: r[0]["instance"])
    write_csv(args.out, RESULT_COLUMNS, [_result_row(r) for r, _ in results])
    timing = args.timing or sidecar(args.out, "timing")
    write_csv(timing, TIMING_COLUMNS, [[t["instance"]] + [_seconds(t.get(c)) for c in TIMING_COLUMNS[1:]] for _, t in results])
    print(f"solved {len(results)} instances; results {args.out}, timings {timing}")


def cmd_plot(args) -> None:
    written = plotting.plot_results(args.results, args.out)
    for p in written:
        print(p)


def cmd_exact(args) -> None:
    instances = read_instances(args.dataset)
    rows = []
    for i, inst in enumerate(instances):
        try:
            if inst.kind == STEINER or args.objective == "weight":
                sol = exact_solution(inst, args.budget)
            else:
                sol = exact_spanner(inst, budget=args.budget, objective=args.objective)
            cost, status = sol.total_weight, "ok"
        except ORACLE_FAILURES as exc:
            cost, status = None, type(exc).__name__
            log.warning("instance %d: %s", i, exc)
        rows.append([i, inst.kind, inst.n, len(inst.terminals), fmt(cost), status])
    write_csv(args.out, ["instance", "kind", "n", "n_terminals", "exact_cost", "status"], rows)
    print(f"wrote {len(rows)} rows to {args.out}")


# -- parser ---------------------------------------------------------------------------------


def _add_search_flags(p):
    p.add_argument("--c-puct", type=float, default=1.3)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--sample-size", type=int, default=None, help="simulation length (default: n)")
    p.add_argument("--height", type=float, default=0.2, help="tree height cap as a fraction of n")
    p.add_argument("--max-rounds", type=int, default=None, help="round limit (default: 4n)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-mcts", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flag values")
    common.add_argument("--seed", type=int, default=None, help=f"global seed (fallback: ${SEED_ENV}, then 0)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate random geometric instances")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--kind", choices=sorted(KIND_ALIASES), default="steiner")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--beta-w", type=float, default=2.0, help="additive stretch in units of the max edge weight")
    p.add_argument("--max-retries", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("label", parents=[common], help="solve exactly and emit training samples")
    p.add_argument("dataset")
    p.add_argument("--budget", type=float, default=60.0, help="oracle seconds per instance")
    p.add_argument("--max-perms", type=int, default=100)
    p.add_argument("--cache", default=None, help="oracle cache file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", parents=[common], help="train the policy network")
    p.add_argument("samples")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--patience", type=int, default=15)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--history", default=None, help="loss CSV (default: <out>_history.csv)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", parents=[common], help="run baseline, MCTS and the exact oracle")
    p.add_argument("dataset", help="dataset JSON or a single .stp file")
    p.add_argument("--model", default=None)
    p.add_argument("--policy", choices=["gnn", "random", "both"], default="gnn")
    p.add_argument("--d", type=int, default=128, help="width of the untrained network used without --model")
    p.add_argument("--layers", type=int, default=3)
    _add_search_flags(p)
    p.add_argument("--exact", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--budget", type=float, default=60.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", default=None, help="wall-clock CSV (default: <out>_timing.csv)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("plot", parents=[common], help="SVG scatter plots from a results CSV")
    p.add_argument("results")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("exact", parents=[common], help="exact costs only")
    p.add_argument("dataset")
    p.add_argument("--budget", type=float, default=60.0)
    p.add_argument("--objective", choices=["weight", "edges"], default="weight", help="spanner objective")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_exact)
    return parser


def _apply_config(parser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - set(vars(args)) - {"command"})
        if unknown:
            raise UsageError(f"{args.config}: unknown key(s) {', '.join(unknown)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k: v for k, v in cfg.items() if k != "command"})
        args = parser.parse_args(argv)
    if args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = int(env) if env else 0
        except ValueError as exc:
            raise UsageError(f"${SEED_ENV} must be an integer") from exc
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        args.func(args)
    except (OSError, CorruptFile, VersionMismatch, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UsageError, SparseMCTSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
