"""Scripted experiments: metric tables, cross validation, traces, interval
studies and accuracy by game-time percent.

Every report carries the seed, a hash of the configuration and the id of the
slice set it was computed on, so it can be reproduced exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import (
    SliceSet,
    SplitPlan,
    build_slice_set,
    extract_prediction,
    fit_scaling,
    kfold_matches,
    rescale_y,
    scale_y,
    split_matches,
    window_parts,
)
from .errors import ConfigError, EmptyDataset
from .ingest import MatchTimeline
from .model import TrainConfig, TseConfig, TseModel, check_compatible, fit, metrics

logger = logging.getLogger(__name__)

MODEL_KINDS = ("ind", "glo", "tse")
TEN_PERCENT_WINDOWS = tuple((10 * i, 10 * (i + 1)) for i in range(10))
SUFFIX_WINDOWS = tuple((10 * i, 100) for i in range(10))
DEFAULT_PERCENTS = tuple(range(10, 100, 10))
METRIC_FIELDS = ("name", "mae", "mse", "rescaled_mae", "t_mae", "n_slices")


def config_hash(*parts) -> str:
    """Short stable hash of dataclasses / plain values."""
    norm = [asdict(p) if hasattr(p, "__dataclass_fields__") else p for p in parts]
    blob = json.dumps(norm, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def run_root() -> Path:
    return Path(os.environ.get("MSLICE_RUN_DIR", "runs"))


# ---------------------------------------------------------------------------
# reports


@dataclass
class MetricsReport:
    rows: list[dict] = field(default_factory=list)
    folds: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def row(self, name: str) -> dict:
        for r in self.rows:
            if r["name"] == name:
                return r
        raise KeyError(name)

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "metrics.csv", self.rows, METRIC_FIELDS)
        if self.folds:
            _write_csv(out / "folds.csv", self.folds, ("fold",) + METRIC_FIELDS)
        _write_json(out / "summary.json", {"meta": self.meta, "rows": self.rows})
        return out


@dataclass
class TraceReport:
    match_id: str
    duration_s: int
    result: int
    half_time_s: float
    rows: list[dict] = field(default_factory=list)

    FIELDS = ("slice_time_s", "remaining_time_min", "y_true", "y_rescaled", "t_hat", "r_hat")

    def errors(self) -> np.ndarray:
        return np.array([abs(r["y_rescaled"] - r["y_true"]) for r in self.rows])

    def half_errors(self) -> tuple[float, float]:
        """Mean |error| on slices before and after the half-time marker."""
        t = np.array([r["slice_time_s"] for r in self.rows])
        e = self.errors()
        left, right = e[t <= self.half_time_s], e[t > self.half_time_s]
        return float(left.mean()) if len(left) else math.nan, float(right.mean()) if len(right) else math.nan

    def write(self, path: str | Path) -> None:
        _write_csv(Path(path), self.rows, self.FIELDS)


@dataclass
class AccuracyTable:
    percents: list[int]
    accuracy: dict[str, list[float]]
    n_matches: int
    meta: dict = field(default_factory=dict)

    def average(self, name: str) -> float:
        return float(np.mean(self.accuracy[name]))

    def at(self, name: str, percent: int) -> float:
        return self.accuracy[name][self.percents.index(percent)]

    def rows(self) -> list[dict]:
        names = list(self.accuracy)
        out = [{"percent": p, **{n: self.accuracy[n][i] for n in names}} for i, p in enumerate(self.percents)]
        out.append({"percent": "average", **{n: self.average(n) for n in names}})
        return out

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "accuracy.csv", self.rows(), ("percent",) + tuple(self.accuracy))
        _write_json(out / "summary.json", {"meta": self.meta, "n_matches": self.n_matches, "rows": self.rows()})
        return out


def _write_csv(path: Path, rows: Sequence[Mapping], columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (r[c] for c in columns)])


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# baseline and model training


def blind_baseline(y_train_scaled: np.ndarray) -> float:
    """Constant predictor minimising training MAE: the median target."""
    y = np.asarray(y_train_scaled, dtype=np.float64)
    if y.size == 0:
        raise EmptyDataset("blind baseline needs at least one training target")
    return float(np.median(y))


def _row(name: str, pred: np.ndarray, y_scaled: np.ndarray, scaling) -> dict:
    return {"name": name, **metrics(pred, y_scaled, scaling), "n_slices": int(len(y_scaled))}


def train_model(kind: str, train: SliceSet, val: SliceSet, tse_config: TseConfig, train_config: TrainConfig,
                seed: int, scaling=None) -> TseModel:
    model = TseModel(tse_config, kind, seed=seed)
    model.scaling = scaling
    fit(model, train, val, train_config, seed=seed)
    return model


def _resolve(train_config, kind: str) -> TrainConfig:
    if isinstance(train_config, Mapping):
        return train_config[kind]
    return train_config


def _evaluate_split(train: SliceSet, val: SliceSet, test: SliceSet, kinds: Sequence[str],
                    tse_config: TseConfig, train_config, seed: int) -> tuple[list[dict], dict]:
    if not len(train) or not len(val) or not len(test):
        raise EmptyDataset("train, validation and test parts must all contain slices")
    scaling = fit_scaling(train, _resolve(train_config, kinds[0] if kinds else "tse").r)
    y_test = scale_y(test.targets(scaling.alpha), scaling)
    const = blind_baseline(scale_y(train.targets(scaling.alpha), scaling))
    rows = [_row("blind", np.full(len(test), const), y_test, scaling)]
    models = {}
    for kind in kinds:
        model = train_model(kind, train, val, tse_config, _resolve(train_config, kind), seed, scaling)
        rows.append(_row(kind, model.predict(test.features), y_test, scaling))
        models[kind] = model
    return rows, models


def _meta(kind: str, seed: int, slices: SliceSet, *cfg) -> dict:
    return {"experiment": kind, "seed": seed, "config_hash": config_hash(*cfg), "dataset_id": slices.fingerprint()}


def run_holdout(slices: SliceSet, tse_config: TseConfig | None = None, train_config=None, seed: int = 0,
                interval: tuple[float, float] = (50, 100), split: tuple[float, float, float] = (0.9, 0.05, 0.05),
                kinds: Sequence[str] = MODEL_KINDS) -> tuple[MetricsReport, dict[str, TseModel], SplitPlan]:
    """Blind baseline plus each model kind on one match-level split.

    All models share the split, target scaling, seed and slice window.
    ``train_config`` may map model kinds to their own TrainConfig.
    """
    tse_config = tse_config or TseConfig()
    train_config = train_config or TrainConfig()
    plan = split_matches(slices.match_ids(), split, seed)
    parts = window_parts(slices, *interval, plan.parts())
    rows, models = _evaluate_split(*parts, kinds, tse_config, train_config, seed)
    report = MetricsReport(rows, meta={
        **_meta("holdout", seed, slices, tse_config, _cfg_doc(train_config), list(interval), list(split), list(kinds)),
        "interval": list(interval), "split": list(split),
        "n_matches": {"train": len(plan.train), "val": len(plan.val), "test": len(plan.test)},
    })
    return report, models, plan


def _cfg_doc(train_config):
    if isinstance(train_config, Mapping):
        return {k: asdict(v) for k, v in sorted(train_config.items())}
    return asdict(train_config)


def run_kfold(slices: SliceSet, k: int = 10, tse_config: TseConfig | None = None, train_config=None,
              seed: int = 0, interval: tuple[float, float] = (50, 100), kinds: Sequence[str] = ("tse",),
              val_fraction: float = 0.05) -> MetricsReport:
    """Match-level k-fold CV; each fold in turn is the test set.

    A ``val_fraction`` share of the remaining matches (at least one) selects
    the best epoch; the rest train.
    """
    tse_config = tse_config or TseConfig()
    train_config = train_config or TrainConfig()
    plan = kfold_matches(slices.match_ids(), k, seed)
    fold_rows: list[dict] = []
    for i, test_ids in enumerate(plan.folds):
        rest = [m for j, f in enumerate(plan.folds) if j != i for m in f]
        n_val = max(1, round(val_fraction * len(rest)))
        val_ids, train_ids = rest[:n_val], rest[n_val:]
        parts = window_parts(slices, *interval, (train_ids, val_ids, test_ids))
        rows, _ = _evaluate_split(*parts, kinds, tse_config, train_config, seed + i)
        fold_rows += [{"fold": i, **r} for r in rows]
        logger.info("fold %d/%d done", i + 1, k)
    summary = []
    for name in ["blind", *kinds]:
        mine = [r for r in fold_rows if r["name"] == name]
        row = {"name": name, "n_slices": int(sum(r["n_slices"] for r in mine))}
        for key in ("mae", "mse", "rescaled_mae", "t_mae"):
            vals = np.array([r[key] for r in mine])
            row[key] = float(vals.mean())
            row[key + "_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        summary.append(row)
    return MetricsReport(summary, fold_rows, {
        **_meta("kfold", seed, slices, tse_config, _cfg_doc(train_config), k, list(interval), list(kinds)),
        "k": k, "interval": list(interval),
    })


# ---------------------------------------------------------------------------
# per-match traces


def trace_match(model, timeline: MatchTimeline) -> TraceReport:
    """Chronological predictions over every slice of one match."""
    slices = build_slice_set([timeline])
    return trace_slices(model, slices)


def trace_slices(model, slices: SliceSet) -> TraceReport:
    ids = slices.match_ids()
    if len(ids) != 1:
        raise ConfigError(f"a trace covers exactly one match, got {len(ids)}")
    if isinstance(model, TseModel):
        check_compatible(model, slices)
    scaling = model.scaling
    y_true = slices.targets(scaling.alpha)
    y_res = rescale_y(model.predict(slices.features), scaling)
    t_hat, r_hat = extract_prediction(y_res, scaling.alpha)
    rows = [
        {
            "slice_time_s": int(slices.slice_time_s[i]),
            "remaining_time_min": float(slices.remaining_time_min[i]),
            "y_true": float(y_true[i]),
            "y_rescaled": float(y_res[i]),
            "t_hat": float(t_hat[i]),
            "r_hat": int(r_hat[i]),
        }
        for i in range(len(slices))
    ]
    duration = int(slices.duration_s[0])
    return TraceReport(ids[0], duration, int(slices.result[0]), duration / 2.0, rows)


# ---------------------------------------------------------------------------
# interval studies


def run_interval_study(slices: SliceSet, windows: Sequence[tuple[float, float]] = TEN_PERCENT_WINDOWS,
                       tse_config: TseConfig | None = None, train_config: TrainConfig | None = None,
                       seed: int = 0, split: tuple[float, float, float] = (0.9, 0.05, 0.05),
                       kind: str = "glo") -> tuple[list[dict], dict]:
    """Train and test a single-branch model inside each window.

    The match-level split is the same for every window. Returns one row per
    window and the run metadata.
    """
    tse_config = tse_config or TseConfig()
    train_config = train_config or TrainConfig()
    plan = split_matches(slices.match_ids(), split, seed)
    rows = []
    for lo, hi in windows:
        train, val, test = window_parts(slices, lo, hi, plan.parts())
        r, _ = _evaluate_split(train, val, test, (kind,), tse_config, train_config, seed)
        blind, model_row = r
        rows.append({"lo": lo, "hi": hi, "n_train": len(train), "n_test": len(test),
                     "mae": model_row["mae"], "mse": model_row["mse"], "rescaled_mae": model_row["rescaled_mae"],
                     "blind_mae": blind["mae"]})
        logger.info("window %s-%s: %s MAE %.4f (blind %.4f)", lo, hi, kind, model_row["mae"], blind["mae"])
    meta = _meta("intervals", seed, slices, tse_config, train_config, [list(w) for w in windows], list(split), kind)
    return rows, meta


INTERVAL_FIELDS = ("lo", "hi", "n_train", "n_test", "mae", "mse", "rescaled_mae", "blind_mae")


def write_interval_study(rows: list[dict], meta: dict, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "intervals.csv", rows, INTERVAL_FIELDS)
    _write_json(out / "summary.json", {"meta": meta, "rows": rows})
    return out


# ---------------------------------------------------------------------------
# accuracy by game-time percent


def nearest_slice_index(slice_time_s: np.ndarray, duration_s: int, percent: float) -> int:
    """Index of the slice closest to ``percent`` of the duration; ties pick the earlier."""
    target = percent / 100.0 * duration_s
    return int(np.argmin(np.abs(slice_time_s - target)))


def accuracy_by_time_percent(models: Mapping[str, object], slices: SliceSet,
                             percents: Sequence[int] = DEFAULT_PERCENTS) -> AccuracyTable:
    """Share of matches whose winner each model gets right at each percent.

    A prediction of exactly zero ("unknown") counts as wrong. ``slices``
    must hold every slice of the test matches.
    """
    ids = slices.match_ids()
    if not ids:
        raise EmptyDataset("no test matches")
    picks = np.empty((len(percents), len(ids)), dtype=np.int64)
    bounds = np.searchsorted(slices.match_id.astype(str), np.array(ids), side="left")
    ends = np.append(bounds[1:], len(slices))
    order_ok = np.all(slices.match_id[bounds].astype(str) == np.array(ids))
    if not order_ok:
        raise ConfigError("slices must be grouped by match id in ascending order")
    for j, (lo, hi) in enumerate(zip(bounds, ends)):
        duration = int(slices.duration_s[lo])
        for i, p in enumerate(percents):
            picks[i, j] = lo + nearest_slice_index(slices.slice_time_s[lo:hi], duration, p)
    chosen = slices.take(picks.ravel())
    truth = chosen.result.reshape(picks.shape)
    table = {}
    for name, model in models.items():
        y_res = rescale_y(model.predict(chosen.features), model.scaling)
        _, r_hat = extract_prediction(y_res, model.scaling.alpha)
        correct = r_hat.reshape(picks.shape) == truth  # unknown (0) never equals +-1
        table[name] = [float(v) for v in correct.mean(axis=1)]
    return AccuracyTable(list(percents), table, len(ids), {"dataset_id": slices.fingerprint()})
