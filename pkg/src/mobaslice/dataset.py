"""Time-slice vectors, discounted-evaluation targets, scaling and splits."""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DomainError, EmptyDataset, InconsistentMatch, MissingHeroState
from .ingest import N_HERO_POOL, N_ITEMS, MatchTimeline, load_match_file, read_meta

N_HEROES = 10
N_ATTRS = 5
N_STATS = 13
DEFAULT_PERIOD_S = 60
DEFAULT_R = math.e - 1.0

ATTR_FIELDS = ("life_state", "gold", "experience", "pos_x", "pos_y")
STAT_FIELDS = (
    "deaths",
    "kills",
    "last_hits",
    "denies",
    "assists",
    "creeps_stacked",
    "camps_stacked",
    "towers_killed",
    "roshans_killed",
    "obs_placed",
    "sen_placed",
    "rune_pickups",
    "teamfight_participation",
)


def hero_dims(n_items: int = N_ITEMS) -> int:
    return 1 + N_ATTRS + N_STATS + n_items


def slice_dims(n_items: int = N_ITEMS) -> int:
    return 1 + N_HEROES * hero_dims(n_items)


# ---------------------------------------------------------------------------
# Discounted evaluation and target transforms


def de_ts(R: int, t: float, alpha: float) -> float:
    """Discounted evaluation of a slice, ``R / (alpha * t)``."""
    if not t > 0:
        raise DomainError(f"remaining time must be positive, got {t}")
    return R / (alpha * t)


def target_y(R: int, t: float, alpha: float) -> float:
    """Regression target, the reciprocal of :func:`de_ts`."""
    if not t > 0:
        raise DomainError(f"remaining time must be positive, got {t}")
    return alpha * t / R


def targets(result: np.ndarray, remaining_min: np.ndarray, alpha: float) -> np.ndarray:
    """Vectorised ``alpha * t * R``.

    Unlike :func:`target_y` this accepts ``t == 0`` (the slice stamped at the
    exact end of a match), where the target is the limit value 0.
    """
    remaining_min = np.asarray(remaining_min, dtype=np.float64)
    if np.any(remaining_min < 0):
        raise DomainError("remaining time must be non-negative")
    return alpha * remaining_min * np.asarray(result, dtype=np.float64)


@dataclass(frozen=True)
class ScalingParams:
    r: float
    alpha: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.r > 0 and self.alpha > 0):
            raise ConfigError("discount rate r and alpha must be positive")

    @classmethod
    def from_r(cls, r: float, y_min: float, y_max: float) -> ScalingParams:
        if not r > 0:
            raise ConfigError(f"discount rate must be positive, got {r}")
        return cls(r=r, alpha=math.log1p(r), y_min=float(y_min), y_max=float(y_max))

    @property
    def span(self) -> float:
        return self.y_max - self.y_min

    def validate(self) -> None:
        if not self.y_max > self.y_min:
            raise ConfigError(f"y_max ({self.y_max}) must exceed y_min ({self.y_min})")

    def to_dict(self) -> dict:
        return {"r": self.r, "alpha": self.alpha, "y_min": self.y_min, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, d: dict) -> ScalingParams:
        return cls(r=float(d["r"]), alpha=float(d["alpha"]), y_min=float(d["y_min"]), y_max=float(d["y_max"]))


def scale_y(y, params: ScalingParams):
    """Affine map of ``[y_min, y_max]`` onto ``[-1, 1]``; no clamping."""
    params.validate()
    return -1.0 + 2.0 * (np.asarray(y, dtype=np.float64) - params.y_min) / params.span


def rescale_y(y_hat, params: ScalingParams):
    params.validate()
    return params.y_min + (np.asarray(y_hat, dtype=np.float64) + 1.0) / 2.0 * params.span


def extract_prediction(y_rescaled, alpha: float):
    """Split a rescaled prediction into remaining minutes and predicted winner.

    A winner of 0 means the prediction is exactly on the fence ("unknown").
    """
    y_rescaled = np.asarray(y_rescaled, dtype=np.float64)
    t_hat = np.abs(y_rescaled) / alpha
    r_hat = np.sign(y_rescaled).astype(np.int64)
    if t_hat.ndim == 0:
        return float(t_hat), int(r_hat)
    return t_hat, r_hat


# ---------------------------------------------------------------------------
# Slices


@dataclass
class TimeSlice:
    match_id: str
    slice_time_s: int
    remaining_time_min: float
    result: int
    features: np.ndarray

    @property
    def duration_s(self) -> int:
        return self.slice_time_s + round(self.remaining_time_min * 60)

    def hero_matrix(self) -> np.ndarray:
        """The ten hero blocks as a ``(10, hero_dims)`` view."""
        return self.features[1:].reshape(N_HEROES, -1)


@dataclass
class SliceSet:
    """Columnar collection of slices; row order is (match_id, slice_time)."""

    match_id: np.ndarray
    slice_time_s: np.ndarray
    duration_s: np.ndarray
    result: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        n = len(self.match_id)
        for name in ("slice_time_s", "duration_s", "result"):
            if len(getattr(self, name)) != n:
                raise DataError(f"column {name} has wrong length")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError("features must be a (n_slices, dim) matrix")

    def __len__(self) -> int:
        return len(self.match_id)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def remaining_time_min(self) -> np.ndarray:
        return (self.duration_s - self.slice_time_s) / 60.0

    @property
    def time_percent(self) -> np.ndarray:
        return 100.0 * self.slice_time_s / self.duration_s

    def targets(self, alpha: float) -> np.ndarray:
        return targets(self.result, self.remaining_time_min, alpha)

    def match_ids(self) -> list[str]:
        return sorted(set(self.match_id.tolist()))

    def take(self, index) -> SliceSet:
        return SliceSet(
            self.match_id[index],
            self.slice_time_s[index],
            self.duration_s[index],
            self.result[index],
            self.features[index],
        )

    def for_matches(self, ids: Iterable[str]) -> SliceSet:
        return self.take(np.isin(self.match_id, np.array(list(ids), dtype=object)))

    def __getitem__(self, i: int) -> TimeSlice:
        return TimeSlice(
            str(self.match_id[i]),
            int(self.slice_time_s[i]),
            float(self.remaining_time_min[i]),
            int(self.result[i]),
            self.features[i],
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_slices(cls, slices: Sequence[TimeSlice]) -> SliceSet:
        if not slices:
            raise EmptyDataset("no slices")
        return cls(
            np.array([s.match_id for s in slices], dtype=object),
            np.array([s.slice_time_s for s in slices], dtype=np.int64),
            np.array([s.duration_s for s in slices], dtype=np.int64),
            np.array([s.result for s in slices], dtype=np.int64),
            np.stack([np.asarray(s.features, dtype=np.float64) for s in slices]),
        )

    def fingerprint(self) -> str:
        """Short stable id of the slice metadata and feature bytes."""
        h = hashlib.sha256()
        h.update("\n".join(self.match_id.tolist()).encode())
        for arr in (self.slice_time_s, self.duration_s, self.result):
            h.update(np.ascontiguousarray(arr, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.features).tobytes())
        return h.hexdigest()[:16]


def _record_block(rec, n_items: int) -> np.ndarray:
    block = np.zeros(hero_dims(n_items))
    block[0] = rec.hero_id
    block[1 : 1 + N_ATTRS] = [getattr(rec, f) for f in ATTR_FIELDS]
    block[1 + N_ATTRS : 1 + N_ATTRS + N_STATS] = [getattr(rec, f) for f in STAT_FIELDS]
    if rec.items:
        np.add.at(block, 1 + N_ATTRS + N_STATS + np.asarray(rec.items) - 1, 1.0)
    return block


def slice_times(duration_s: int, period_s: int = DEFAULT_PERIOD_S) -> np.ndarray:
    return np.arange(period_s, duration_s + 1, period_s, dtype=np.int64)


def _fill_match(timeline: MatchTimeline, times: np.ndarray, out: np.ndarray, n_items: int) -> None:
    hd = hero_dims(n_items)
    out[:, 0] = times
    for slot, (hero_id, _team) in enumerate(timeline.heroes):
        recs = timeline.records[hero_id]
        rec_times = np.array([r.game_time_s for r in recs])
        pick = np.searchsorted(rec_times, times, side="right") - 1
        if pick[0] < 0:
            first_bad = int(times[np.argmax(pick < 0)])
            raise MissingHeroState(hero_id, first_bad)
        used = np.unique(pick)
        blocks = {int(i): _record_block(recs[i], n_items) for i in used}
        col = 1 + slot * hd
        for row, i in enumerate(pick):
            out[row, col : col + hd] = blocks[int(i)]


def build_slices(
    timeline: MatchTimeline, period_s: int = DEFAULT_PERIOD_S, n_items: int = N_ITEMS
) -> list[TimeSlice]:
    """One slice every ``period_s`` seconds of game time up to the duration.

    Each hero block is filled from that hero's latest record at or before the
    slice time. Blocks 1-5 are team A, 6-10 team B.
    """
    times = slice_times(timeline.duration_s, period_s)
    feats = np.zeros((len(times), slice_dims(n_items)))
    if len(times):
        _fill_match(timeline, times, feats, n_items)
    result = 1 if timeline.winner == "A" else -1
    return [
        TimeSlice(timeline.match_id, int(t), (timeline.duration_s - int(t)) / 60.0, result, feats[i])
        for i, t in enumerate(times)
    ]


class SliceSetBuilder:
    """Fills a preallocated matrix one match at a time.

    Matches must be added in ascending match-id order; ``capacity`` is an
    upper bound on the number of slices.
    """

    def __init__(self, capacity: int, period_s: int = DEFAULT_PERIOD_S, n_items: int = N_ITEMS):
        self.period_s = period_s
        self.n_items = n_items
        self.features = np.zeros((capacity, slice_dims(n_items)))
        self.match_id = np.empty(capacity, dtype=object)
        self.slice_time_s = np.empty(capacity, dtype=np.int64)
        self.duration_s = np.empty(capacity, dtype=np.int64)
        self.result = np.empty(capacity, dtype=np.int64)
        self.n = 0
        self._last_id: str | None = None

    def add(self, timeline: MatchTimeline) -> int:
        if self._last_id is not None and timeline.match_id <= self._last_id:
            raise DataError(f"match {timeline.match_id!r} added out of order")
        times = slice_times(timeline.duration_s, self.period_s)
        lo, hi = self.n, self.n + len(times)
        if hi > len(self.features):
            raise DataError("slice capacity exceeded")
        if len(times):
            # fill first so a MissingHeroState leaves the builder unchanged
            _fill_match(timeline, times, self.features[lo:hi], self.n_items)
        self.match_id[lo:hi] = timeline.match_id
        self.slice_time_s[lo:hi] = times
        self.duration_s[lo:hi] = timeline.duration_s
        self.result[lo:hi] = 1 if timeline.winner == "A" else -1
        self.n = hi
        self._last_id = timeline.match_id
        return len(times)

    def finish(self) -> SliceSet:
        if self.n == 0:
            raise EmptyDataset("no slices in the given matches")
        n = self.n
        return SliceSet(self.match_id[:n], self.slice_time_s[:n], self.duration_s[:n],
                        self.result[:n], self.features[:n])


def build_slice_set(
    timelines: Sequence[MatchTimeline], period_s: int = DEFAULT_PERIOD_S, n_items: int = N_ITEMS
) -> SliceSet:
    """Slices of many matches in one matrix, ordered by (match id, time)."""
    timelines = sorted(timelines, key=lambda tl: tl.match_id)
    builder = SliceSetBuilder(sum(tl.duration_s // period_s for tl in timelines), period_s, n_items)
    for tl in timelines:
        builder.add(tl)
    return builder.finish()


def fit_scaling(train: SliceSet, r: float = DEFAULT_R) -> ScalingParams:
    """Target range of the training slices."""
    if len(train) == 0:
        raise EmptyDataset("cannot fit scaling on zero slices")
    y = train.targets(math.log1p(r))
    return ScalingParams.from_r(r, float(y.min()), float(y.max()))


def _interval_mask(slices: SliceSet, lo_pct: float, hi_pct: float) -> np.ndarray:
    if not (0 <= lo_pct < hi_pct <= 100):
        raise ConfigError(f"invalid interval [{lo_pct}, {hi_pct}]")
    pct = 100.0 * slices.slice_time_s / slices.duration_s
    return (pct >= lo_pct) & (pct <= hi_pct)


def filter_interval(slices: SliceSet, lo_pct: float, hi_pct: float) -> SliceSet:
    """Slices whose position in their match lies in ``[lo_pct, hi_pct]`` percent."""
    return slices.take(_interval_mask(slices, lo_pct, hi_pct))


def window_parts(slices: SliceSet, lo_pct: float, hi_pct: float,
                 groups: Iterable[Iterable[str]]) -> list[SliceSet]:
    """``filter_interval`` of each group of matches, without copying the whole window."""
    keep = _interval_mask(slices, lo_pct, hi_pct)
    return [slices.take(keep & np.isin(slices.match_id, np.array(list(ids), dtype=object))) for ids in groups]


# ---------------------------------------------------------------------------
# Match-level splits


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train: tuple[str, ...] = ()
    val: tuple[str, ...] = ()
    test: tuple[str, ...] = ()
    folds: tuple[tuple[str, ...], ...] = field(default_factory=tuple)

    def parts(self) -> list[tuple[str, ...]]:
        return list(self.folds) if self.folds else [self.train, self.val, self.test]


def _permuted(match_ids: Iterable[str], seed: int) -> list[str]:
    ids = sorted(set(match_ids))
    rng = np.random.default_rng(seed)
    return [ids[i] for i in rng.permutation(len(ids))]


def split_matches(
    match_ids: Iterable[str], ratios: tuple[float, float, float] = (0.9, 0.05, 0.05), seed: int = 0
) -> SplitPlan:
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0):
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    ids = _permuted(match_ids, seed)
    n_val = round(ratios[1] * len(ids))
    n_test = round(ratios[2] * len(ids))
    n_train = len(ids) - n_val - n_test
    return SplitPlan(
        seed=seed,
        train=tuple(ids[:n_train]),
        val=tuple(ids[n_train : n_train + n_val]),
        test=tuple(ids[n_train + n_val :]),
    )


def kfold_matches(match_ids: Iterable[str], k: int = 10, seed: int = 0) -> SplitPlan:
    ids = _permuted(match_ids, seed)
    if not 2 <= k <= len(ids):
        raise ConfigError(f"need 2 <= k <= n_matches, got k={k} for {len(ids)} matches")
    folds = tuple(tuple(part) for part in np.array_split(np.array(ids, dtype=object), k))
    return SplitPlan(seed=seed, folds=tuple(tuple(str(x) for x in f) for f in folds))


# ---------------------------------------------------------------------------
# Dataset files

BIN_MAGIC = b"MSLC"
BIN_VERSION = 1
_BIN_HEADER = struct.Struct("<4sHI")
_BIN_ROW = struct.Struct("<qqb")  # slice_time_s, duration_s, result


def _csv_header(dim: int) -> list[str]:
    return ["match_id", "slice_time_s", "remaining_time_min", "result"] + [f"f{i}" for i in range(dim)]


def write_dataset_csv(path: str | Path, slices: SliceSet) -> None:
    remaining = slices.remaining_time_min
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_csv_header(slices.dim))
        for i in range(len(slices)):
            w.writerow(
                [slices.match_id[i], int(slices.slice_time_s[i]), repr(float(remaining[i])), int(slices.result[i])]
                + [repr(v) for v in slices.features[i].tolist()]
            )


def read_dataset_csv(path: str | Path) -> SliceSet:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != _csv_header(0)[:4]:
            raise DataError(f"{path}: not a slice dataset (bad header)")
        dim = len(header) - 4
        ids, times, dur, res, rows = [], [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 4:
                raise DataError(f"{path}:{line_no}: expected {dim + 4} columns, got {len(row)}")
            t = int(row[1])
            ids.append(row[0])
            times.append(t)
            dur.append(t + round(float(row[2]) * 60))
            res.append(int(row[3]))
            rows.append([float(v) for v in row[4:]])
    if not ids:
        raise EmptyDataset(f"{path}: no rows")
    return SliceSet(
        np.array(ids, dtype=object),
        np.array(times, dtype=np.int64),
        np.array(dur, dtype=np.int64),
        np.array(res, dtype=np.int64),
        np.array(rows, dtype=np.float64),
    )


def write_dataset_bin(path: str | Path, slices: SliceSet) -> None:
    """Little-endian binary: header (magic, u16 version, u32 dim) then rows.

    Row: u16 id length, utf-8 match id, i64 slice time, i64 duration,
    i8 result, ``dim`` float64 features.
    """
    with open(path, "wb") as fh:
        fh.write(_BIN_HEADER.pack(BIN_MAGIC, BIN_VERSION, slices.dim))
        feats = np.ascontiguousarray(slices.features, dtype="<f8")
        for i in range(len(slices)):
            mid = str(slices.match_id[i]).encode("utf-8")
            fh.write(struct.pack("<H", len(mid)) + mid)
            fh.write(_BIN_ROW.pack(int(slices.slice_time_s[i]), int(slices.duration_s[i]), int(slices.result[i])))
            fh.write(feats[i].tobytes())


def read_dataset_bin(path: str | Path) -> SliceSet:
    data = Path(path).read_bytes()
    if len(data) < _BIN_HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, dim = _BIN_HEADER.unpack_from(data, 0)
    if magic != BIN_MAGIC or version != BIN_VERSION:
        raise DataError(f"{path}: not an MSLC v{BIN_VERSION} file")
    pos = _BIN_HEADER.size
    ids, times, dur, res, offsets = [], [], [], [], []
    fbytes = 8 * dim
    try:
        while pos < len(data):
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            ids.append(data[pos : pos + n].decode("utf-8"))
            pos += n
            t, d, r = _BIN_ROW.unpack_from(data, pos)
            pos += _BIN_ROW.size
            if pos + fbytes > len(data):
                raise DataError(f"{path}: truncated row {len(ids)}")
            times.append(t)
            dur.append(d)
            res.append(r)
            offsets.append(pos)
            pos += fbytes
    except struct.error as exc:
        raise DataError(f"{path}: truncated row {len(ids)}") from exc
    if not ids:
        raise EmptyDataset(f"{path}: no rows")
    feats = np.empty((len(ids), dim))
    for i, off in enumerate(offsets):
        feats[i] = np.frombuffer(data, dtype="<f8", count=dim, offset=off)
    return SliceSet(
        np.array(ids, dtype=object),
        np.array(times, dtype=np.int64),
        np.array(dur, dtype=np.int64),
        np.array(res, dtype=np.int64),
        feats,
    )


def write_dataset(path: str | Path, slices: SliceSet, fmt: str = "csv") -> None:
    if fmt == "csv":
        write_dataset_csv(path, slices)
    elif fmt == "bin":
        write_dataset_bin(path, slices)
    else:
        raise ConfigError(f"unknown dataset format {fmt!r}")


def read_dataset(path: str | Path) -> SliceSet:
    """Read a dataset file, detecting the format from its first bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_dataset_bin(path) if head == BIN_MAGIC else read_dataset_csv(path)


# ---------------------------------------------------------------------------
# Corpus loading


@dataclass
class IngestReport:
    accepted: list[str] = field(default_factory=list)
    rejected: list[tuple[str, str, str]] = field(default_factory=list)  # (file, error class, message)
    n_slices: int = 0


def slices_from_files(
    paths: Iterable[str | Path],
    period_s: int = DEFAULT_PERIOD_S,
    c_a: int = N_HERO_POOL,
    n_items: int = N_ITEMS,
) -> tuple[SliceSet | None, IngestReport]:
    """Validate match files and slice the good ones, one file in memory at a time.

    Bad files are listed in the report with the error that rejected them.
    Returns ``None`` for the slice set when no file is usable.
    """
    report = IngestReport()
    metas = []
    for path in paths:
        try:
            metas.append((read_meta(path), Path(path)))
        except DataError as exc:
            report.rejected.append((str(path), type(exc).__name__, str(exc)))
    metas.sort(key=lambda mp: (mp[0].match_id, str(mp[1])))
    builder = SliceSetBuilder(sum(m.duration_s // period_s for m, _ in metas), period_s, n_items)
    seen: set[str] = set()
    for meta, path in metas:
        try:
            if meta.match_id in seen:
                raise InconsistentMatch(f"match {meta.match_id!r} appears in more than one file")
            timeline = load_match_file(path, c_a=c_a, n_items=n_items)
            builder.add(timeline)
        except DataError as exc:
            report.rejected.append((str(path), type(exc).__name__, str(exc)))
            continue
        seen.add(meta.match_id)
        report.accepted.append(str(path))
    report.rejected.sort()
    report.n_slices = builder.n
    return (builder.finish() if builder.n else None), report
