"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .dataset import (
    SliceSet,
    read_dataset,
    scale_y,
    slices_from_files,
    split_matches,
    window_parts,
    write_dataset,
)
from .errors import ConfigError, DataError, DivergenceError, DomainError, EmptyDataset
from .ingest import list_match_files, load_match_file
from .model import TrainConfig, TseConfig, TseModel, check_compatible, fit, load_checkpoint, save_checkpoint
from .synth import SynthConfig, generate_corpus

logger = logging.getLogger("mobaslice")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4


# -- argument types -----------------------------------------------------------


def interval_arg(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if not 0 <= lo < hi <= 100:
        raise argparse.ArgumentTypeError(f"need 0 <= LO < HI <= 100, got {text!r}")
    return lo, hi


def split_arg(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TRAIN:VAL:TEST, got {text!r}") from None
    if len(parts) != 3 or any(p < 0 for p in parts) or abs(sum(parts) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError(f"split must be three non-negative shares summing to 1, got {text!r}")
    return parts  # type: ignore[return-value]


def rate_arg(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError("dropout must be in [0, 1)")
    return value


def positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


# -- parser -------------------------------------------------------------------


def _training_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=positive_int, default=TrainConfig.epochs, help="training epochs (default %(default)s)")
    g.add_argument("--batch", type=positive_int, default=TrainConfig.batch_size, help="mini-batch size (default %(default)s)")
    g.add_argument("--lr", type=positive_float, default=TrainConfig.lr, help="Adam learning rate (default %(default)s)")
    g.add_argument("--mu", type=nonneg_float, default=TseConfig.mu, help="weight of the Ind head loss (default %(default)s)")
    g.add_argument("--nu", type=nonneg_float, default=TseConfig.nu, help="weight of the Glo head loss (default %(default)s)")
    g.add_argument("--dropout", type=rate_arg, default=TseConfig.r_d, help="hidden-layer dropout rate (default %(default)s)")
    g.add_argument("--interval", type=interval_arg, default=(50.0, 100.0), metavar="LO:HI",
                   help="use slices between LO%% and HI%% of each match (default 50:100)")
    g.add_argument("--split", type=split_arg, default=(0.9, 0.05, 0.05), metavar="TRAIN:VAL:TEST",
                   help="match-level split shares (default 0.9:0.05:0.05)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mobaslice", description="Outcome and remaining-time evaluation of MOBA game slices.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="validate match files and write a slice dataset")
    p.add_argument("--input", required=True, nargs="+", type=Path, help="match files or directories of them")
    p.add_argument("--out", required=True, type=Path, help="dataset file to write")
    p.add_argument("--format", choices=("csv", "bin"), default="csv", help="dataset format (default %(default)s)")
    p.add_argument("--report", type=Path, help="ingestion report JSON (default: <out>.report.json)")

    p = sub.add_parser("synth", help="generate a synthetic match corpus")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--seed", required=True, type=int, help="master seed")
    p.add_argument("--n-matches", type=int, help="number of matches (overrides the config file)")
    p.add_argument("--config", type=Path, help="key = value generator config file")

    p = sub.add_parser("train", help="train a model on a slice dataset")
    p.add_argument("--input", required=True, type=Path, help="dataset file or directory of match files")
    p.add_argument("--out", required=True, type=Path, help="checkpoint file to write")
    p.add_argument("--seed", required=True, type=int, help="seed for the split, initialisation and batching")
    p.add_argument("--model", choices=ex.MODEL_KINDS, default="tse", help="model kind (default %(default)s)")
    p.add_argument("--report-dir", type=Path, help="where to write history and metrics (default under the run root)")
    _training_flags(p)

    p = sub.add_parser("predict", help="trace a checkpoint's predictions over one match")
    p.add_argument("--checkpoint", required=True, type=Path, help="trained checkpoint")
    p.add_argument("--input", required=True, type=Path, help="match file (JSON lines)")
    p.add_argument("--out", type=Path, help="trace CSV (default: stdout)")

    p = sub.add_parser("experiment", help="run a scripted experiment")
    p.add_argument("kind", choices=("holdout", "kfold", "intervals", "accuracy"), help="experiment to run")
    p.add_argument("--input", required=True, type=Path, help="dataset file or directory of match files")
    p.add_argument("--seed", required=True, type=int, help="experiment seed")
    p.add_argument("--out", type=Path, help="run directory (default under $MSLICE_RUN_DIR or ./runs)")
    p.add_argument("--kfold", type=positive_int, default=10, metavar="K", help="folds for kind=kfold (default %(default)s)")
    p.add_argument("--windows", choices=("ten", "suffix"), default="ten",
                   help="kind=intervals: 10%% windows or suffix windows [x%%, 100%%] (default %(default)s)")
    p.add_argument("--checkpoint", type=Path, help="kind=accuracy: checkpoint to evaluate")
    _training_flags(p)
    return parser


# -- helpers ------------------------------------------------------------------


def _load_slices(path: Path) -> SliceSet:
    if not path.exists():
        raise FileNotFoundError(f"input {path} does not exist")
    if path.is_dir():
        slices, report = slices_from_files(list_match_files(path))
        for file, cls, msg in report.rejected:
            logger.warning("rejected %s: %s: %s", file, cls, msg)
        if slices is None:
            raise EmptyDataset(f"no valid matches under {path}")
        return slices
    return read_dataset(path)


def _configs(args) -> tuple[TseConfig, TrainConfig]:
    tse = TseConfig(r_d=args.dropout, mu=args.mu, nu=args.nu)
    train = TrainConfig(lr=args.lr, batch_size=args.batch, epochs=args.epochs)
    return tse, train


def _run_dir(args, kind: str, *cfg) -> Path:
    if getattr(args, "out", None):
        return args.out
    return ex.run_root() / f"{kind}-{ex.config_hash(*cfg)}-s{args.seed}"


def _input_files(inputs: list[Path]) -> list[Path]:
    files: list[Path] = []
    for path in inputs:
        if not path.exists():
            raise FileNotFoundError(f"input {path} does not exist")
        files += list_match_files(path) if path.is_dir() else [path]
    return files


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args) -> int:
    files = _input_files(args.input)
    slices, report = slices_from_files(files)
    report_path = args.report or args.out.with_name(args.out.name + ".report.json")
    doc = {"accepted": report.accepted, "n_slices": report.n_slices,
           "rejected": [{"file": f, "error": c, "message": m} for f, c, m in report.rejected]}
    for file, cls, msg in report.rejected:
        logger.warning("rejected %s: %s: %s", file, cls, msg)
    if slices is None:
        report_path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        raise EmptyDataset(f"no valid matches among {len(files)} input file(s)")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(args.out, slices, args.format)
    report_path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    print(f"{len(report.accepted)} matches, {report.n_slices} slices -> {args.out}; {len(report.rejected)} rejected")
    return EXIT_OK


def cmd_synth(args) -> int:
    overrides = {"seed": args.seed}
    if args.n_matches is not None:
        overrides["n_matches"] = args.n_matches
    cfg = SynthConfig.from_file(args.config, **overrides) if args.config else SynthConfig(**overrides)
    paths = generate_corpus(cfg, args.out)
    print(f"{len(paths)} matches -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    tse_cfg, train_cfg = _configs(args)
    slices = _load_slices(args.input)
    plan = split_matches(slices.match_ids(), args.split, args.seed)
    train, val, test = window_parts(slices, *args.interval, plan.parts())
    model = TseModel(tse_cfg, args.model, seed=args.seed)
    history = fit(model, train, val, train_cfg, seed=args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, args.out, train_cfg, seed=args.seed)
    report_dir = args.report_dir or ex.run_root() / f"train-{ex.config_hash(tse_cfg, train_cfg, args.model, list(args.interval), list(args.split))}-s{args.seed}"
    report_dir.mkdir(parents=True, exist_ok=True)
    cols = list(history.epochs[0])
    with open(report_dir / "history.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in history.epochs:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    rows = []
    if len(test):
        y = scale_y(test.targets(model.scaling.alpha), model.scaling)
        rows.append({"name": args.model, **ex.metrics(model.predict(test.features), y, model.scaling),
                     "n_slices": len(test)})
    ex.MetricsReport(rows, meta={
        "experiment": "train", "seed": args.seed, "model": args.model, "best_epoch": history.best_epoch,
        "config_hash": ex.config_hash(tse_cfg, train_cfg, args.model, list(args.interval), list(args.split)),
        "dataset_id": slices.fingerprint(), "interval": list(args.interval), "split": list(args.split),
        "checkpoint": str(args.out),
    }).write(report_dir)
    best = history.best()
    print(f"best epoch {history.best_epoch}: val MAE {best['val_mae']:.4f} "
          f"(rescaled {best['val_rescaled_mae']:.3f}) -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    if not args.checkpoint.exists():
        raise FileNotFoundError(f"checkpoint {args.checkpoint} does not exist")
    model = load_checkpoint(args.checkpoint)
    # validate against the full pool so that an undersized checkpoint is reported as such
    timeline = load_match_file(args.input)
    trace = ex.trace_match(model, timeline)
    if args.out:
        trace.write(args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(trace.FIELDS)
        for r in trace.rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in trace.FIELDS])
    return EXIT_OK


def cmd_experiment(args) -> int:
    tse_cfg, train_cfg = _configs(args)
    if args.kind == "accuracy" and args.checkpoint is None:
        raise ConfigError("kind=accuracy needs --checkpoint")
    if args.checkpoint is not None and not args.checkpoint.exists():
        raise FileNotFoundError(f"checkpoint {args.checkpoint} does not exist")
    slices = _load_slices(args.input)
    if args.kind == "holdout":
        report, _, _ = ex.run_holdout(slices, tse_cfg, train_cfg, args.seed, args.interval, args.split)
        out = report.write(_run_dir(args, "holdout", tse_cfg, train_cfg, list(args.interval), list(args.split)))
        for r in report.rows:
            print(f"{r['name']:>6}  MAE {r['mae']:.4f}  MSE {r['mse']:.4f}  rescaled {r['rescaled_mae']:.3f}")
    elif args.kind == "kfold":
        report = ex.run_kfold(slices, args.kfold, tse_cfg, train_cfg, args.seed, args.interval)
        out = report.write(_run_dir(args, "kfold", tse_cfg, train_cfg, args.kfold, list(args.interval)))
        for r in report.rows:
            print(f"{r['name']:>6}  MAE {r['mae']:.4f} +- {r['mae_std']:.4f}")
    elif args.kind == "intervals":
        windows = ex.TEN_PERCENT_WINDOWS if args.windows == "ten" else ex.SUFFIX_WINDOWS
        rows, meta = ex.run_interval_study(slices, windows, tse_cfg, train_cfg, args.seed, args.split)
        out = ex.write_interval_study(rows, meta, _run_dir(args, f"intervals-{args.windows}", tse_cfg, train_cfg,
                                                          list(args.split)))
        for r in rows:
            print(f"{r['lo']:>5g}-{r['hi']:<5g}  MAE {r['mae']:.4f}  blind {r['blind_mae']:.4f}")
    else:
        model = load_checkpoint(args.checkpoint)
        check_compatible(model, slices)
        plan = split_matches(slices.match_ids(), args.split, args.seed)
        table = ex.accuracy_by_time_percent({model.kind: model}, slices.for_matches(plan.test))
        table.meta.update({"seed": args.seed, "split": list(args.split), "checkpoint": str(args.checkpoint)})
        out = table.write(_run_dir(args, "accuracy", str(args.checkpoint), list(args.split)))
        for r in table.rows():
            print(f"{r['percent']!s:>8}  {r[model.kind]:.4f}")
    print(f"report -> {out}")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "synth": cmd_synth, "train": cmd_train, "predict": cmd_predict,
            "experiment": cmd_experiment}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
