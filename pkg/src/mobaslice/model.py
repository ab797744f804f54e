"""Time Slice Evaluation model.

Two branches read the same slice. The individual branch runs one small
subnet per hero of the pool and returns (sum over team A) - (sum over team
B). The global branch reads the whole slice vector. A small combiner maps
the two branch outputs to the final tanh prediction of the scaled target.

A model can also be built with only one branch (``kind="ind"`` or
``kind="glo"``), which is how the partial models are trained standalone.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import nn
from .dataset import (
    DEFAULT_R,
    N_ATTRS,
    N_STATS,
    ScalingParams,
    SliceSet,
    TimeSlice,
    extract_prediction,
    fit_scaling,
    rescale_y,
    scale_y,
)
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    EmptyDataset,
    IncompatibleCheckpoint,
    ShapeMismatch,
    UnknownHero,
)

logger = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = "tse-ckpt/1"
KINDS = ("tse", "ind", "glo")
# standardised inputs are clipped; rare item counts otherwise reach |z| > 40
Z_CLIP = 5.0


@dataclass
class TseConfig:
    c_a: int = 114  # heroes in the pool, one subnet each
    c_m: int = 10  # heroes per match
    n_sub_in: int = 263  # subnet input width
    l_i: int = 3
    n_i: int = 40
    l_m: int = 4
    n_m: int = 400
    l_c: int = 3
    n_c_comb: int = 4
    r_d: float = 0.5
    mu: float = 0.3
    nu: float = 0.3

    def __post_init__(self):
        ints = ("c_a", "c_m", "n_sub_in", "l_i", "n_i", "l_m", "n_m", "l_c", "n_c_comb")
        if any(getattr(self, k) <= 0 for k in ints):
            raise ConfigError("all TSE sizes must be positive")
        if self.c_m > self.c_a or self.c_m % 2:
            raise ConfigError("c_m must be even and no larger than c_a")
        if not 0.0 <= self.r_d < 1.0:
            raise ConfigError("dropout rate must be in [0, 1)")
        if self.mu < 0 or self.nu < 0:
            raise ConfigError("auxiliary loss weights must be non-negative")

    @property
    def slice_dim(self) -> int:
        return 1 + self.c_m * self.n_sub_in

    @classmethod
    def for_items(cls, n_items: int, **kw) -> TseConfig:
        return cls(n_sub_in=1 + N_ATTRS + N_STATS + n_items, **kw)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 256
    epochs: int = 100
    r: float = DEFAULT_R

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size <= 0 or self.epochs <= 0 or self.r <= 0:
            raise ConfigError("lr, batch_size, epochs and r must be positive")


@dataclass
class Normalizer:
    """Per-feature standardisation fitted on training slices."""

    slice_mean: np.ndarray
    slice_std: np.ndarray
    hero_mean: np.ndarray
    hero_std: np.ndarray

    @classmethod
    def identity(cls, config: TseConfig) -> Normalizer:
        d, h = config.slice_dim, config.n_sub_in
        return cls(np.zeros(d), np.ones(d), np.zeros(h), np.ones(h))

    @classmethod
    def fit(cls, features: np.ndarray, config: TseConfig, chunk: int = 4096) -> Normalizer:
        n = len(features)
        if n == 0:
            raise EmptyDataset("cannot fit normalisation on zero slices")
        s1 = np.zeros(features.shape[1])
        s2 = np.zeros(features.shape[1])
        for lo in range(0, n, chunk):
            part = features[lo : lo + chunk]
            s1 += part.sum(0)
            s2 += (part * part).sum(0)
        mean = s1 / n
        var = np.maximum(s2 / n - mean * mean, 0.0)
        h1 = s1[1:].reshape(config.c_m, -1).sum(0)
        h2 = s2[1:].reshape(config.c_m, -1).sum(0)
        # hero id column is replaced by game time in subnet inputs
        h1[0], h2[0] = s1[0] * config.c_m, s2[0] * config.c_m
        h_mean = h1 / (n * config.c_m)
        h_var = np.maximum(h2 / (n * config.c_m) - h_mean * h_mean, 0.0)
        return cls(mean, _safe_std(var), h_mean, _safe_std(h_var))

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("slice_mean", "slice_std", "hero_mean", "hero_std")}

    @classmethod
    def from_dict(cls, d: dict) -> Normalizer:
        return cls(*(np.array(d[k], dtype=np.float64) for k in ("slice_mean", "slice_std", "hero_mean", "hero_std")))


def _safe_std(var: np.ndarray) -> np.ndarray:
    std = np.sqrt(var)
    std[std < 1e-12] = 1.0
    return std


@dataclass
class SliceBatchIndex:
    """Routing of a batch's hero rows to subnet slots.

    ``hero_ids[b, i]`` is the (1-based) id of the i-th hero of slice ``b``;
    the first ``c_m/2`` positions are team A. The dense distributor and
    team-sign views exist for inspection and testing; the model routes rows
    with index lists.
    """

    hero_ids: np.ndarray  # (B, c_m) int
    c_a: int

    @classmethod
    def from_features(cls, features: np.ndarray, config: TseConfig) -> SliceBatchIndex:
        blocks = features[:, 1:].reshape(len(features), config.c_m, config.n_sub_in)
        raw = blocks[:, :, 0]
        ids = np.rint(raw).astype(np.int64)
        bad = (ids < 1) | (ids > config.c_a) | (ids != raw)
        if bad.any():
            raise UnknownHero(int(raw[bad][0]))
        srt = np.sort(ids, axis=1)
        if (srt[:, 1:] == srt[:, :-1]).any():
            raise DataError("a slice lists the same hero twice")
        return cls(ids, config.c_a)

    @property
    def c_m(self) -> int:
        return self.hero_ids.shape[1]

    @property
    def signs(self) -> np.ndarray:
        half = self.c_m // 2
        return np.where(np.arange(self.c_m) < half, 1.0, -1.0)

    def distributor(self, b: int) -> np.ndarray:
        """Dense placement matrix with ``M = D @ A`` putting hero row i at slot id-1."""
        D = np.zeros((self.c_a, self.c_m))
        D[self.hero_ids[b] - 1, np.arange(self.c_m)] = 1.0
        return D

    def team_signs(self, b: int) -> np.ndarray:
        G = np.zeros(self.c_a)
        G[self.hero_ids[b] - 1] = self.signs
        return G


@dataclass
class Heads:
    y: np.ndarray | None
    y_ind: np.ndarray | None
    y_glo: np.ndarray | None


@dataclass
class _ForwardCache:
    batch: SliceBatchIndex | None = None
    ind: list = field(default_factory=list)  # (slot, rows, nn.Cache)
    glo: nn.Cache | None = None
    comb: nn.Cache | None = None


class TseModel:
    def __init__(self, config: TseConfig | None = None, kind: str = "tse", seed: int = 0):
        if kind not in KINDS:
            raise ConfigError(f"model kind must be one of {KINDS}, got {kind!r}")
        self.config = config or TseConfig()
        self.kind = kind
        self.seed = seed
        self.scaling: ScalingParams | None = None
        self.norm = Normalizer.identity(self.config)
        self.norm_fitted = False
        cfg = self.config
        ind_seq, glo_seq, comb_seq = np.random.SeedSequence(seed).spawn(3)

        self.ind_weights: list[np.ndarray] = []
        self.ind_biases: list[np.ndarray] = []
        self.subnets: list[nn.DenseNet] = []
        if kind in ("tse", "ind"):
            rng = np.random.default_rng(ind_seq)
            sizes = [cfg.n_sub_in] + [cfg.n_i] * cfg.l_i + [1]
            acts = ["relu"] * cfg.l_i + ["tanh"]
            nets = [nn.init_net(sizes, acts, cfg.r_d, rng) for _ in range(cfg.c_a)]
            self.ind_weights = [np.stack([n.layers[l].weight for n in nets]) for l in range(len(acts))]
            self.ind_biases = [np.stack([n.layers[l].bias for n in nets]) for l in range(len(acts))]
            self._bind_subnets(acts, cfg.r_d)

        self.glo: nn.DenseNet | None = None
        if kind in ("tse", "glo"):
            sizes = [cfg.slice_dim] + [cfg.n_m] * cfg.l_m + [1]
            self.glo = nn.init_net(sizes, ["relu"] * cfg.l_m + ["tanh"], cfg.r_d, np.random.default_rng(glo_seq))

        self.combiner: nn.DenseNet | None = None
        if kind == "tse":
            sizes = [2] + [cfg.n_c_comb] * cfg.l_c + [1]
            self.combiner = nn.init_net(sizes, ["relu"] * cfg.l_c + ["tanh"], 0.0, np.random.default_rng(comb_seq))

    def _bind_subnets(self, acts: list[str], dropout: float) -> None:
        """Expose each subnet as a DenseNet whose arrays are views of the stacks."""
        n_layers = len(acts)
        self.subnets = [
            nn.DenseNet([
                nn.Layer(self.ind_weights[l][k], self.ind_biases[l][k], acts[l], dropout if l < n_layers - 1 else 0.0)
                for l in range(n_layers)
            ])
            for k in range(self.config.c_a)
        ]

    # -- parameters ----------------------------------------------------------

    def params(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.ind_weights, self.ind_biases):
            out += [w, b]
        if self.glo is not None:
            out += self.glo.params()
        if self.combiner is not None:
            out += self.combiner.params()
        return out

    def set_params(self, values: list[np.ndarray]) -> None:
        for p, v in zip(self.params(), values, strict=True):
            p[...] = v

    def fit_normalizer(self, train: SliceSet) -> None:
        self.norm = Normalizer.fit(train.features, self.config)
        self.norm_fitted = True

    # -- forward / backward --------------------------------------------------

    def _check_input(self, X: np.ndarray) -> None:
        if X.ndim != 2 or X.shape[1] != self.config.slice_dim:
            raise ShapeMismatch(f"slices of width {X.shape[-1]} for a model expecting {self.config.slice_dim}")

    def subnet_inputs(self, X: np.ndarray) -> np.ndarray:
        """Hero blocks with the hero-id column replaced by game time, normalised.

        Shape ``(B, c_m, n_sub_in)``.
        """
        cfg = self.config
        blocks = X[:, 1:].reshape(len(X), cfg.c_m, cfg.n_sub_in).copy()
        blocks[:, :, 0] = X[:, :1]
        return np.clip((blocks - self.norm.hero_mean) / self.norm.hero_std, -Z_CLIP, Z_CLIP)

    def _ind_forward(self, X, train, rng, cache: _ForwardCache) -> np.ndarray:
        cfg = self.config
        batch = SliceBatchIndex.from_features(X, cfg)
        cache.batch = batch
        inp = self.subnet_inputs(X).reshape(-1, cfg.n_sub_in)
        slots = batch.hero_ids.ravel() - 1
        order = np.argsort(slots, kind="stable")
        used, starts, counts = np.unique(slots[order], return_index=True, return_counts=True)
        v = np.empty(len(slots))
        for k, s, c in zip(used, starts, counts):
            rows = order[s : s + c]
            out, c_net = nn.forward(self.subnets[k], inp[rows], train, rng)
            v[rows] = out[:, 0]
            cache.ind.append((int(k), rows, c_net))
        return (v.reshape(len(X), cfg.c_m) * batch.signs).sum(axis=1)

    def _glo_forward(self, X, train, rng, cache: _ForwardCache) -> np.ndarray:
        z = np.clip((X - self.norm.slice_mean) / self.norm.slice_std, -Z_CLIP, Z_CLIP)
        out, cache.glo = nn.forward(self.glo, z, train, rng)
        return out[:, 0]

    def forward(self, X: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        self._check_input(X)
        cache = _ForwardCache()
        y_ind = self._ind_forward(X, train, rng, cache) if self.subnets else None
        y_glo = self._glo_forward(X, train, rng, cache) if self.glo is not None else None
        y = None
        if self.combiner is not None:
            out, cache.comb = nn.forward(self.combiner, np.stack([y_ind, y_glo], axis=1), train, rng)
            y = out[:, 0]
        return Heads(y, y_ind, y_glo), cache

    def output(self, heads: Heads) -> np.ndarray:
        return {"tse": heads.y, "ind": heads.y_ind, "glo": heads.y_glo}[self.kind]

    def backward(self, cache: _ForwardCache, g_y=None, g_ind=None, g_glo=None) -> list[np.ndarray]:
        """Parameter gradients (``params()`` order) from head gradients."""
        grads: list[np.ndarray] = []
        if self.combiner is not None and g_y is not None:
            comb_grads, g_in = nn.backward(self.combiner, cache.comb, g_y[:, None])
            g_ind = g_in[:, 0] + (0.0 if g_ind is None else g_ind)
            g_glo = g_in[:, 1] + (0.0 if g_glo is None else g_glo)
        elif self.combiner is not None:
            comb_grads = [np.zeros_like(p) for p in self.combiner.params()]
        if self.subnets:
            gw = [np.zeros_like(w) for w in self.ind_weights]
            gb = [np.zeros_like(b) for b in self.ind_biases]
            if g_ind is not None:
                g_rows = (g_ind[:, None] * cache.batch.signs).ravel()
                for k, rows, c_net in cache.ind:
                    sub, _ = nn.backward(self.subnets[k], c_net, g_rows[rows][:, None], input_grad=False)
                    for l in range(len(gw)):
                        gw[l][k] += sub[2 * l]
                        gb[l][k] += sub[2 * l + 1]
            for w, b in zip(gw, gb):
                grads += [w, b]
        if self.glo is not None:
            if g_glo is not None:
                glo_grads, _ = nn.backward(self.glo, cache.glo, g_glo[:, None], input_grad=False)
            else:
                glo_grads = [np.zeros_like(p) for p in self.glo.params()]
            grads += glo_grads
        if self.combiner is not None:
            grads += comb_grads
        return grads

    def loss_and_grads(self, X, y_scaled, train: bool = True, rng=None) -> tuple[float, np.ndarray, list[np.ndarray]]:
        """Training loss for this model kind, its head output and gradients."""
        heads, cache = self.forward(X, train, rng)
        n = len(X)
        if self.kind == "tse":
            loss = tse_loss(heads.y, heads.y_ind, heads.y_glo, y_scaled, self.config.mu, self.config.nu)
            g_y = np.sign(heads.y - y_scaled) / n
            g_ind = self.config.mu * np.sign(heads.y_ind - y_scaled) / n
            g_glo = self.config.nu * np.sign(heads.y_glo - y_scaled) / n
            grads = self.backward(cache, g_y, g_ind, g_glo)
        else:
            out = self.output(heads)
            loss, g = nn.mae_loss(out, y_scaled)
            grads = self.backward(cache, g_ind=g if self.kind == "ind" else None,
                                  g_glo=g if self.kind == "glo" else None)
        return loss, self.output(heads), grads

    def predict(self, X: np.ndarray, batch_size: int = 2048) -> np.ndarray:
        """Eval-mode scaled prediction of this model's head."""
        out = [self.output(self.forward(X[i : i + batch_size])[0]) for i in range(0, len(X), batch_size)]
        return np.concatenate(out) if out else np.empty(0)

    def predict_heads(self, X: np.ndarray) -> Heads:
        return self.forward(X)[0]


def ind_forward(model: TseModel, X: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
    return model._ind_forward(X, train, rng, _ForwardCache())


def glo_forward(model: TseModel, X: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
    return model._glo_forward(X, train, rng, _ForwardCache())


def tse_forward(model: TseModel, X: np.ndarray, train: bool = False, rng=None) -> tuple:
    heads = model.forward(X, train, rng)[0]
    return heads.y, heads.y_ind, heads.y_glo


def subnet_input(model: TseModel, ts: TimeSlice, hero_index: int) -> np.ndarray:
    """Un-normalised subnet input of hero ``hero_index`` (1-based) in a slice."""
    if not 1 <= hero_index <= model.config.c_m:
        raise ConfigError(f"hero index must be in [1, {model.config.c_m}]")
    x = ts.hero_matrix()[hero_index - 1].copy()
    x[0] = ts.features[0]
    return x


def tse_loss(y_hat, y_ind, y_glo, y_scaled, mu: float, nu: float) -> float:
    mae = lambda p: float(np.mean(np.abs(np.asarray(p) - y_scaled)))
    return mae(y_hat) + mu * mae(y_ind) + nu * mae(y_glo)


# ---------------------------------------------------------------------------
# metrics and prediction


def metrics(pred: np.ndarray, y_scaled: np.ndarray, scaling: ScalingParams) -> dict:
    """MAE, MSE, rescaled MAE (target units) and MAE of remaining time.

    The rescaled MAE always bounds ``alpha * t_mae`` from above; a violation
    means a bug and raises.
    """
    pred = np.asarray(pred, dtype=np.float64)
    y_scaled = np.asarray(y_scaled, dtype=np.float64)
    if pred.shape != y_scaled.shape or pred.size == 0:
        raise ShapeMismatch("predictions and targets must be equal-length, non-empty")
    mae = float(np.mean(np.abs(pred - y_scaled)))
    mse = float(np.mean((pred - y_scaled) ** 2))
    rescaled = mae * scaling.span / 2.0
    t_hat, _ = extract_prediction(rescale_y(pred, scaling), scaling.alpha)
    t_true, _ = extract_prediction(rescale_y(y_scaled, scaling), scaling.alpha)
    t_mae = float(np.mean(np.abs(t_hat - t_true)))
    if rescaled < scaling.alpha * t_mae - 1e-9 * max(1.0, rescaled):
        raise RuntimeError(f"rescaled MAE {rescaled} below alpha * t-MAE {scaling.alpha * t_mae}")
    return {"mae": mae, "mse": mse, "rescaled_mae": rescaled, "t_mae": t_mae}


def predict_slice(model: TseModel, ts: TimeSlice) -> tuple[float, int, float]:
    """(remaining minutes, predicted winner, rescaled prediction) of one slice."""
    if model.scaling is None:
        raise ConfigError("model has no target scaling; train it first")
    y_hat = model.predict(np.asarray(ts.features, dtype=np.float64)[None, :])[0]
    y_res = float(rescale_y(y_hat, model.scaling))
    t_hat, r_hat = extract_prediction(y_res, model.scaling.alpha)
    return t_hat, r_hat, y_res


# ---------------------------------------------------------------------------
# training


@dataclass
class History:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = 0

    def best(self) -> dict:
        return self.epochs[self.best_epoch - 1]


def fit(model: TseModel, train: SliceSet, val: SliceSet, config: TrainConfig | None = None,
        seed: int = 0, log_every: int = 1) -> History:
    """Mini-batch Adam on the model's loss; keeps the epoch with the best val MAE.

    Target scaling and input normalisation are fitted on ``train`` unless the
    model already carries them.
    """
    config = config or TrainConfig()
    if len(train) == 0 or len(val) == 0:
        raise EmptyDataset("training and validation sets must be non-empty")
    if model.scaling is None:
        model.scaling = fit_scaling(train, config.r)
    model.scaling.validate()
    if not model.norm_fitted:
        model.fit_normalizer(train)
    alpha = model.scaling.alpha
    y_train = scale_y(train.targets(alpha), model.scaling)
    y_val = scale_y(val.targets(alpha), model.scaling)

    rng = np.random.default_rng(seed)
    params = model.params()
    opt = nn.adam_init(params, lr=config.lr)
    history = History()
    best_mae = math.inf
    best_params = [p.copy() for p in params]
    X = train.features
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train))
        loss_sum = mae_sum = 0.0
        for lo in range(0, len(order), config.batch_size):
            idx = np.sort(order[lo : lo + config.batch_size])
            loss, out, grads = model.loss_and_grads(X[idx], y_train[idx], True, rng)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            nn.adam_step(opt, params, grads)
            loss_sum += loss * len(idx)
            mae_sum += float(np.abs(out - y_train[idx]).sum())
        val_pred = model.predict(val.features)
        if not np.all(np.isfinite(val_pred)):
            raise DivergenceError(f"non-finite validation predictions at epoch {epoch}")
        m = metrics(val_pred, y_val, model.scaling)
        row = {
            "epoch": epoch,
            "train_loss": loss_sum / len(train),
            "train_mae": mae_sum / len(train),
            "train_rescaled_mae": mae_sum / len(train) * model.scaling.span / 2.0,
            "val_mae": m["mae"],
            "val_mse": m["mse"],
            "val_rescaled_mae": m["rescaled_mae"],
        }
        history.epochs.append(row)
        if m["mae"] < best_mae:
            best_mae = m["mae"]
            history.best_epoch = epoch
            for b, p in zip(best_params, params):
                b[...] = p
        if log_every and epoch % log_every == 0:
            logger.info("%s epoch %d: train MAE %.4f, val MAE %.4f (rescaled %.3f)",
                        model.kind, epoch, row["train_mae"], row["val_mae"], row["val_rescaled_mae"])
    model.set_params(best_params)
    return history


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: TseModel, path: str | Path, train_config: TrainConfig | None = None,
                    seed: int | None = None) -> None:
    if model.scaling is None:
        raise ConfigError("refusing to save a model without target scaling")
    doc = {
        "schema": CHECKPOINT_SCHEMA,
        "arch": {"kind": model.kind, **asdict(model.config)},
        "scaling": model.scaling.to_dict(),
        "normalization": model.norm.to_dict(),
        "params": {
            "ind": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in zip(model.ind_weights, model.ind_biases)],
            "glo": nn.net_to_dict(model.glo) if model.glo is not None else None,
            "combiner": nn.net_to_dict(model.combiner) if model.combiner is not None else None,
        },
        "train_config": asdict(train_config) if train_config else None,
        "seed": model.seed if seed is None else seed,
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")), encoding="utf-8")


def load_checkpoint(path: str | Path) -> TseModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise IncompatibleCheckpoint(f"{path}: unreadable checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("schema") != CHECKPOINT_SCHEMA:
        raise IncompatibleCheckpoint(f"{path}: expected schema {CHECKPOINT_SCHEMA!r}")
    try:
        arch = dict(doc["arch"])
        kind = arch.pop("kind")
        names = {f.name for f in fields(TseConfig)}
        config = TseConfig(**{k: v for k, v in arch.items() if k in names})
        model = TseModel(config, kind, seed=int(doc.get("seed") or 0))
        model.scaling = ScalingParams.from_dict(doc["scaling"])
        model.norm = Normalizer.from_dict(doc["normalization"])
        model.norm_fitted = True
        p = doc["params"]
        values: list[np.ndarray] = []
        for layer in p["ind"] or []:
            values += [np.array(layer["weight"], dtype=np.float64), np.array(layer["bias"], dtype=np.float64)]
        for part in ("glo", "combiner"):
            if p.get(part):
                values += nn.net_from_dict(p[part]).params()
        theirs = model.params()
        if len(values) != len(theirs) or any(a.shape != b.shape for a, b in zip(values, theirs)):
            raise IncompatibleCheckpoint(f"{path}: parameter shapes do not match the declared architecture")
        if model.norm.slice_mean.shape != (config.slice_dim,) or model.norm.hero_mean.shape != (config.n_sub_in,):
            raise IncompatibleCheckpoint(f"{path}: normalisation vectors do not match the architecture")
        model.set_params(values)
    except IncompatibleCheckpoint:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise IncompatibleCheckpoint(f"{path}: malformed checkpoint ({exc})") from exc
    return model


def check_compatible(model: TseModel, slices: SliceSet) -> None:
    """Raise IncompatibleCheckpoint unless the model can read these slices."""
    if slices.dim != model.config.slice_dim:
        raise IncompatibleCheckpoint(f"slices have width {slices.dim}, model expects {model.config.slice_dim}")
    try:
        SliceBatchIndex.from_features(slices.features, model.config)
    except UnknownHero as exc:
        raise IncompatibleCheckpoint(f"hero {exc.hero_id} is outside the model's pool of {model.config.c_a}") from exc
