"""Command-line interface.

Subcommands: verify-exact (machine vs brute-force oracle), counterexample
(collapse and separation on the recipient-swap pair), heuristics
(history baselines over a labeled stream), train, eval, and generate.
Exit codes: 0 when the requested checks pass, 1 when they fail, 2 on
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import ConfigError, read_kv
from .events import (
    IngestError,
    chronological_split,
    compute_affinity_labels,
    ingest_csv,
    labels_to_csv,
    write_csv,
)
from .exact import ExactMachine
from .expressivity import (
    WindowedStatisticOracle,
    build_counterexample,
    check_tgn_collapse,
    check_tgnv2_separation,
)
from .heuristics import (
    MessageAverageEngine,
    RandomScoreEngine,
    moving_average_labels,
    persistent_forecast_labels,
)
from .metrics import EvalResult, EvalRow, evaluate_stream, ndcg_at_k
from .nn import LearnableEngine, ParamStore, TrainConfig, TrainingError, load_checkpoint, train
from .pipeline import Formulation
from .synthetic import SyntheticSpec, generate_stream, random_stream
from ._kernels import BACKEND


def _csv_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _resolve_out(flag_value: str | None, default: str = "runs") -> str:
    if flag_value:
        return flag_value
    env = os.environ.get("TGAFFINITY_OUT")
    if env:
        return env
    return default


def _emit(args, text: str, **record) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(text)


def _load_stream(args):
    if getattr(args, "input", None):
        return ingest_csv(args.input)
    if getattr(args, "synthetic", False):
        spec = SyntheticSpec(
            num_nodes=args.nodes,
            num_events=args.events,
            noise=args.noise,
            seed=args.data_seed,
        )
        return generate_stream(spec)
    raise ConfigError("give --input CSV or --synthetic")


# ---------------------------------------------------------------------------
# verify-exact


def _max_dev_vs_oracle(machine: ExactMachine, stream) -> float:
    """Worst per-event deviation between machine readouts and the oracle."""
    _, readouts = machine.replay_with_readouts(stream)
    oracle = WindowedStatisticOracle(machine.num_nodes, machine.weights)
    max_dev = 0.0
    for i, event in enumerate(stream):
        oracle.observe(event.src, event.dst, event.value)
        expected = oracle.statistics(event.src)
        max_dev = max(max_dev, float(np.max(np.abs(readouts[i] - expected))))
    return max_dev


def _build_machine(statistic: str, num_nodes: int, k: int, coeffs) -> ExactMachine:
    if statistic == "ma":
        return ExactMachine.moving_average(num_nodes, k)
    if statistic == "persistent":
        return ExactMachine.persistent(num_nodes)
    if statistic == "ar":
        return ExactMachine.autoregressive(num_nodes, coeffs)
    raise ConfigError(f"unknown statistic {statistic!r}")


def cmd_verify_exact(args) -> int:
    statistics = ["ma", "persistent", "ar"] if args.statistic == "all" else [args.statistic]
    failed = False
    overall = 0.0
    for s in range(args.streams):
        stream_seed = args.seed + s
        rng = np.random.default_rng(np.random.SeedSequence([stream_seed, 99]))
        n = 2 + int(rng.integers(max(args.nodes - 1, 1)))
        k = args.k_list[s % len(args.k_list)]
        stream = random_stream(n, args.events, seed=stream_seed)
        for statistic in statistics:
            coeffs = rng.uniform(-1.0, 1.0, size=k)
            machine = _build_machine(statistic, n, k, coeffs)
            if s == 0 and args.export_matrices:
                machine.export_matrices(os.path.join(args.export_matrices, statistic))
            dev = _max_dev_vs_oracle(machine, stream)
            overall = max(overall, dev)
            ok = dev <= args.tol
            failed = failed or not ok
            _emit(
                args,
                f"stream {s}: nodes={n} k={machine.k} statistic={statistic} "
                f"max_dev={dev:.3e} {'ok' if ok else 'FAIL'}",
                kind="verify-exact",
                stream=s,
                nodes=n,
                k=machine.k,
                statistic=statistic,
                max_dev=dev,
                ok=ok,
            )
    verdict = "FAIL" if failed else "PASS"
    _emit(
        args,
        f"{verdict}: {args.streams} streams, max deviation {overall:.3e} (tol {args.tol:.1e}, backend {BACKEND})",
        kind="summary",
        passed=not failed,
        max_dev=overall,
        tol=args.tol,
        backend=BACKEND,
    )
    return 0 if not failed else 1


# ---------------------------------------------------------------------------
# counterexample


def cmd_counterexample(args) -> int:
    alphas, betas = args.alphas, args.betas
    k = len(args.ar_coeffs) if args.statistic == "ar" else (1 if args.statistic == "persistent" else args.k)
    machine = _build_machine(args.statistic, 3, k, args.ar_coeffs)
    pair = build_counterexample(alphas, betas)

    def make_engine():
        store = ParamStore(args.seed)
        formulation = Formulation.tgn(args.dim, d_event=1, neighbor_cap=10, num_layers=1)
        return LearnableEngine(formulation, pair.num_nodes, store)

    collapse = check_tgn_collapse(make_engine, pair)
    separation = check_tgnv2_separation(machine, pair)
    collapsed = collapse.collapsed(args.collapse_tol)
    separated = separation.separated(args.tol)
    _emit(
        args,
        f"anonymous pipeline: max deviation across swapped runs {collapse.max_deviation:.3e} "
        f"({'collapses' if collapsed else 'DOES NOT collapse'} at {args.collapse_tol:.1e})",
        kind="collapse",
        max_deviation=collapse.max_deviation,
        collapsed=collapsed,
        tol=args.collapse_tol,
    )
    _emit(
        args,
        f"exact machine: oracle deviation {separation.oracle_dev:.3e}, target gap {separation.gap:.3e} "
        f"({'separates' if separated else 'DOES NOT separate'} at {args.tol:.1e})",
        kind="separation",
        oracle_dev=separation.oracle_dev,
        gap=separation.gap,
        separated=separated,
        tol=args.tol,
        prediction_a=[float(x) for x in separation.prediction_a],
        prediction_b=[float(x) for x in separation.prediction_b],
    )
    passed = collapsed and separated
    _emit(args, "PASS" if passed else "FAIL", kind="summary", passed=passed)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# heuristics


def cmd_heuristics(args) -> int:
    stream = _load_stream(args)
    labels = compute_affinity_labels(stream, args.period)
    out_dir = _resolve_out(args.out)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"heuristic_{args.heuristic}.csv")

    if args.heuristic == "ma-messages":
        engine = MessageAverageEngine(stream.num_nodes, args.k)
        result = evaluate_stream(
            engine, stream, labels, args.period, k=args.ndcg_k, csv_path=csv_path
        )
    elif args.heuristic == "random":
        engine = RandomScoreEngine(stream.num_nodes, seed=args.seed)
        result = evaluate_stream(
            engine, stream, labels, args.period, k=args.ndcg_k, csv_path=csv_path
        )
    else:
        result = EvalResult()
        t0 = stream.min_time
        by_window: dict[int, list] = {}
        for label in labels:
            by_window.setdefault(label.window_index, []).append(label)
        for w in sorted(by_window):
            window_labels = by_window[w]
            sources = [label.source for label in window_labels]
            start = float(t0 + w * args.period)
            if args.heuristic == "persistent-labels":
                preds = persistent_forecast_labels(labels, start, sources, stream.num_nodes)
            else:  # ma-labels
                preds = moving_average_labels(labels, start, sources, stream.num_nodes, args.k)
            for row, label in enumerate(window_labels):
                result.rows.append(
                    EvalRow(
                        window=w,
                        source=label.source,
                        ndcg=ndcg_at_k(preds[row], label.affinity, k=args.ndcg_k),
                    )
                )
        result.write_csv(csv_path)

    _emit(
        args,
        f"{args.heuristic}: mean ndcg@{args.ndcg_k} = {result.mean:.4f} over {result.count} labels "
        f"(per-label scores in {csv_path})",
        kind="heuristics",
        heuristic=args.heuristic,
        mean_ndcg=result.mean,
        count=result.count,
        csv=csv_path,
    )
    return 0


# ---------------------------------------------------------------------------
# train / eval


def cmd_train(args) -> int:
    stream = _load_stream(args)
    cfg_kv = read_kv(args.config) if args.config else {}
    cfg = TrainConfig.from_kv(cfg_kv)
    overrides = {
        "variant": args.variant,
        "node_mode": args.node_mode,
        "hidden_dim": args.hidden_dim,
        "num_layers": args.num_layers,
        "neighbor_cap": args.neighbor_cap,
        "label_period": args.period,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "seed": args.seed,
        "ndcg_k": args.ndcg_k,
    }
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    out_dir = _resolve_out(args.out)
    result = train(stream, cfg, out_dir=out_dir)
    for row in result.trace:
        ndcg = "" if row.ndcg is None else f"{row.ndcg:.4f}"
        loss = "" if row.loss is None else f"{row.loss:.4f}"
        _emit(
            args,
            f"epoch {row.epoch} {row.split}: ndcg@{cfg.ndcg_k}={ndcg} loss={loss}",
            kind="trace",
            epoch=row.epoch,
            split=row.split,
            ndcg=row.ndcg,
            loss=row.loss,
        )
    best_val = "" if result.best_val_ndcg is None else f"{result.best_val_ndcg:.4f}"
    _emit(
        args,
        f"done: variant={cfg.variant} best_epoch={result.best_epoch} val={best_val} "
        f"test_ndcg@{cfg.ndcg_k}={result.test_ndcg:.4f} artifacts={out_dir}",
        kind="summary",
        variant=cfg.variant,
        best_epoch=result.best_epoch,
        val_ndcg=result.best_val_ndcg,
        test_ndcg=result.test_ndcg,
        out_dir=out_dir,
    )
    return 0


def cmd_eval(args) -> int:
    engine, cfg = load_checkpoint(args.checkpoint)
    stream = _load_stream(args)
    if stream.num_nodes != engine.num_nodes:
        raise ConfigError(
            f"checkpoint was trained on {engine.num_nodes} nodes, stream has {stream.num_nodes}"
        )
    labels = compute_affinity_labels(stream, cfg.label_period)
    train_l, val_l, test_l = chronological_split(labels, cfg.ratios)
    selected = {"train": train_l, "val": val_l, "test": test_l, "all": labels}[args.split]
    windows = None if args.split == "all" else {label.window_index for label in selected}
    engine.reset_state()
    csv_path = None
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, f"eval_{args.split}.csv")
    result = evaluate_stream(
        engine,
        stream,
        selected,
        cfg.label_period,
        k=cfg.ndcg_k,
        batch_size=cfg.batch_size,
        windows=windows,
        csv_path=csv_path,
    )
    _emit(
        args,
        f"{args.split}: mean ndcg@{cfg.ndcg_k} = {result.mean:.4f} over {result.count} labels",
        kind="eval",
        split=args.split,
        mean_ndcg=result.mean,
        count=result.count,
    )
    return 0


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    spec = SyntheticSpec(
        num_nodes=args.nodes,
        num_events=args.events,
        noise=args.noise,
        mean_low=args.mean_low,
        mean_high=args.mean_high,
        seed=args.seed,
    )
    stream = generate_stream(spec)
    write_csv(stream, args.out)
    if args.labels_out:
        labels = compute_affinity_labels(stream, args.period)
        labels_to_csv(labels, args.labels_out)
    _emit(
        args,
        f"wrote {len(stream)} events over {stream.num_nodes} nodes to {args.out}",
        kind="generate",
        events=len(stream),
        nodes=stream.num_nodes,
        path=args.out,
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tgaffinity",
        description="Temporal-graph affinity pipelines, exact statistic machines, and baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-exact", help="check the machines against the brute-force oracle")
    p.add_argument("--streams", type=int, default=20)
    p.add_argument("--events", type=int, default=2000)
    p.add_argument("--nodes", type=int, default=8, help="maximum node count per stream")
    p.add_argument("--k-list", type=_csv_ints, default=[1, 2, 3, 5])
    p.add_argument("--statistic", choices=["ma", "persistent", "ar", "all"], default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--export-matrices", default=None, metavar="DIR")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify_exact)

    p = sub.add_parser("counterexample", help="collapse/separation on the recipient-swap pair")
    p.add_argument("--alphas", type=_csv_floats, default=[1.0, 2.0])
    p.add_argument("--betas", type=_csv_floats, default=[9.0, 8.0])
    p.add_argument("--statistic", choices=["ma", "persistent", "ar"], default="ma")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--ar-coeffs", type=_csv_floats, default=[0.9, -0.4])
    p.add_argument("--dim", type=int, default=4, help="hidden width of the anonymous pipeline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--collapse-tol", type=float, default=1e-12)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("heuristics", help="evaluate history baselines on a labeled stream")
    p.add_argument("--input", default=None, metavar="CSV")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--nodes", type=int, default=6)
    p.add_argument("--events", type=int, default=600)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--period", type=float, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument(
        "--heuristic",
        choices=["persistent-labels", "ma-labels", "ma-messages", "random"],
        required=True,
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ndcg-k", type=int, default=10)
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_heuristics)

    p = sub.add_parser("train", help="train one pipeline variant")
    p.add_argument("--input", default=None, metavar="CSV")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--nodes", type=int, default=6)
    p.add_argument("--events", type=int, default=600)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--config", default=None, metavar="FILE")
    p.add_argument("--variant", choices=["tgn", "tgnv2"], default=None)
    p.add_argument("--node-mode", choices=["cosine", "zero"], default=None)
    p.add_argument("--hidden-dim", type=int, default=None)
    p.add_argument("--num-layers", type=int, default=None)
    p.add_argument("--neighbor-cap", type=int, default=None)
    p.add_argument("--period", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ndcg-k", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a stream")
    p.add_argument("--checkpoint", required=True, metavar="DIR")
    p.add_argument("--input", default=None, metavar="CSV")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--nodes", type=int, default=6)
    p.add_argument("--events", type=int, default=600)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--split", choices=["train", "val", "test", "all"], default="test")
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate", help="write a synthetic stream to CSV")
    p.add_argument("--out", required=True, metavar="CSV")
    p.add_argument("--nodes", type=int, default=6)
    p.add_argument("--events", type=int, default=600)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--mean-low", type=float, default=0.5)
    p.add_argument("--mean-high", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels-out", default=None, metavar="CSV")
    p.add_argument("--period", type=float, default=10.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IngestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
