"""Depth-versus-width training experiment on the unit-ball indicator.

A small numpy MLP with hand-written backpropagation, trained by minibatch
SGD with momentum on points whose norm is uniform on [0, r_max].
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import shard_map

__all__ = [
    "TrainingDiverged",
    "DatasetSpec",
    "Dataset",
    "TrainConfig",
    "TrainRun",
    "MomentumSGD",
    "SweepRow",
    "SweepResult",
    "generate_dataset",
    "init_params",
    "forward",
    "loss_and_grads",
    "numerical_grads",
    "count_params",
    "learning_rate",
    "train",
    "sweep_architectures",
    "depth_vs_width_sweep",
    "smoothed_monotone_fraction",
    "curve_csv",
    "summary_csv",
    "read_summary",
]

DIVERGENCE_RMSE = 1e3


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    d: int = 20
    n_train: int = 100_000
    n_valid: int = 10_000
    r_max: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n_train < 1 or self.n_valid < 1:
            raise ValueError("d, n_train and n_valid must be positive")
        if not self.r_max > 1:
            raise ValueError("r_max must exceed 1 so both labels occur")


@dataclass(frozen=True)
class Dataset:
    spec: DatasetSpec
    x_train: np.ndarray
    y_train: np.ndarray
    x_valid: np.ndarray
    y_valid: np.ndarray


def _radial(n: int, d: int, r_max: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = rng.uniform(0.0, r_max, n)
    x = u * r[:, None]
    return x, (np.linalg.norm(x, axis=1) <= 1.0).astype(np.float64)


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Random direction times a norm uniform on [0, r_max]; label 1 inside the unit ball."""
    rng = np.random.default_rng(spec.seed)
    xt, yt = _radial(spec.n_train, spec.d, spec.r_max, rng)
    xv, yv = _radial(spec.n_valid, spec.d, spec.r_max, rng)
    return Dataset(spec, xt, yt, xv, yv)


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (100, 20)
    batch_size: int = 100
    momentum: float = 0.95
    lr: float = 0.1
    decay: float = 0.95
    decay_period: int = 1000
    lr_floor: float = 1e-4
    max_batches: int = 30_000
    eval_every: int = 200
    train_eval_size: int = 10_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("hidden widths must be positive")
        for name in ("batch_size", "decay_period", "max_batches", "eval_every", "train_eval_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not (0 <= self.momentum < 1 and self.lr > 0 and 0 < self.decay <= 1 and self.lr_floor > 0):
            raise ValueError("need 0 <= momentum < 1, lr > 0, 0 < decay <= 1, lr_floor > 0")

    @property
    def arch(self) -> str:
        return "-".join(str(h) for h in self.hidden)


def learning_rate(cfg: TrainConfig, batch: int) -> float:
    return max(cfg.lr * cfg.decay ** (batch // cfg.decay_period), cfg.lr_floor)


Params = list  # [(W, b), ...] with W of shape (fan_in, fan_out)


def init_params(sizes, rng: np.random.Generator) -> Params:
    """Gaussian weights with std sqrt(2 / fan_in), zero biases."""
    return [
        (rng.standard_normal((a, b)) * math.sqrt(2.0 / a), np.zeros(b)) for a, b in zip(sizes[:-1], sizes[1:])
    ]


def count_params(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def forward(params: Params, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer; the last is the linear output."""
    acts = [x]
    for i, (W, b) in enumerate(params):
        z = acts[-1] @ W + b
        acts.append(np.maximum(z, 0.0) if i < len(params) - 1 else z)
    return acts


def loss_and_grads(params: Params, x: np.ndarray, y: np.ndarray) -> tuple[float, list]:
    """Mean squared loss and its gradient; the ReLU derivative at 0 is taken as 0."""
    acts = forward(params, x)
    resid = acts[-1][:, 0] - y
    loss = float(np.mean(resid**2))
    g = (2.0 / x.shape[0]) * resid[:, None]
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (acts[i].T @ g, g.sum(axis=0))
        if i > 0:
            g = (g @ W.T) * (acts[i] > 0)
    return loss, grads


def numerical_grads(params: Params, x: np.ndarray, y: np.ndarray, h: float = 1e-5) -> list:
    """Central finite differences of the same loss, one coordinate at a time."""
    out = []
    for W, b in params:
        pair = []
        for arr in (W, b):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                keep = arr[idx]
                arr[idx] = keep + h
                up, _ = loss_and_grads(params, x, y)
                arr[idx] = keep - h
                down, _ = loss_and_grads(params, x, y)
                arr[idx] = keep
                g[idx] = (up - down) / (2 * h)
            pair.append(g)
        out.append(tuple(pair))
    return out


class MomentumSGD:
    """accum <- momentum * accum + grad; param <- param - lr * accum."""

    def __init__(self, params: Params, momentum: float):
        self.momentum = momentum
        self.accum = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]

    def step(self, params: Params, grads: list, lr: float) -> None:
        for (W, b), (gW, gb), (aW, ab) in zip(params, grads, self.accum):
            aW *= self.momentum
            aW += gW
            ab *= self.momentum
            ab += gb
            W -= lr * aW
            b -= lr * ab


@dataclass
class TrainRun:
    config: TrainConfig
    curve: list = field(default_factory=list)  # (batch, train_rmse, valid_rmse)
    digest: str = ""
    n_params: int = 0
    params: Params | None = None

    @property
    def final_valid_rmse(self) -> float:
        return self.curve[-1][2] if self.curve else float("nan")


def _rmse(params: Params, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((forward(params, x)[-1][:, 0] - y) ** 2)))


def _digest(params: Params) -> str:
    h = hashlib.sha256()
    for W, b in params:
        h.update(np.ascontiguousarray(W).tobytes())
        h.update(np.ascontiguousarray(b).tobytes())
    return h.hexdigest()


def train(data: Dataset, cfg: TrainConfig) -> TrainRun:
    """Minibatch SGD with momentum; deterministic given ``cfg.seed``."""
    n, d = data.x_train.shape
    if cfg.batch_size > n:
        raise ValueError(f"batch size {cfg.batch_size} exceeds the {n} training samples")
    sizes = [d, *cfg.hidden, 1]
    rng = np.random.default_rng(cfg.seed)
    params = init_params(sizes, rng)
    opt = MomentumSGD(params, cfg.momentum)
    run = TrainRun(cfg, n_params=count_params(sizes))
    x_sub = data.x_train[: cfg.train_eval_size]
    y_sub = data.y_train[: cfg.train_eval_size]

    def record(batch: int) -> None:
        tr = _rmse(params, x_sub, y_sub)
        va = _rmse(params, data.x_valid, data.y_valid)
        if not (tr <= DIVERGENCE_RMSE and va <= DIVERGENCE_RMSE):
            raise TrainingDiverged(
                f"arch {cfg.arch} seed {cfg.seed}: RMSE {tr:.3g} (train) / {va:.3g} (valid) at batch {batch}"
            )
        run.curve.append((batch, tr, va))

    perm = rng.permutation(n)
    pos = 0
    for t in range(cfg.max_batches):
        if pos + cfg.batch_size > n:
            perm = rng.permutation(n)
            pos = 0
        idx = perm[pos : pos + cfg.batch_size]
        pos += cfg.batch_size
        _, grads = loss_and_grads(params, data.x_train[idx], data.y_train[idx])
        opt.step(params, grads, learning_rate(cfg, t))
        if (t + 1) % cfg.eval_every == 0:
            record(t + 1)
    if not run.curve or run.curve[-1][0] != cfg.max_batches:
        record(cfg.max_batches)
    run.digest = _digest(params)
    run.params = params
    return run


def smoothed_monotone_fraction(values, window: int = 50) -> float:
    """Fraction of consecutive non-overlapping window means that do not increase."""
    v = np.asarray(values, dtype=np.float64)
    k = v.size // window
    if k < 2:
        return 1.0
    means = v[: k * window].reshape(k, window).mean(axis=1)
    return float(np.mean(np.diff(means) <= 0))


# --- sweep -----------------------------------------------------------------------


def sweep_architectures(scale: float, deep: tuple[int, int] = (100, 20)) -> list[tuple[int, ...]]:
    """The 3-layer net followed by 2-layer nets of width 100, 200, 400, 800 times ``scale``."""
    if not 0 < scale <= 1:
        raise ValueError("scale must lie in (0, 1]")
    shallow = [(max(1, round(w * scale)),) for w in (100, 200, 400, 800)]
    return [tuple(deep)] + shallow


@dataclass(frozen=True)
class SweepRow:
    arch: str
    seed: int
    final_valid_rmse: float
    params: int


@dataclass
class SweepResult:
    rows: list
    runs: dict

    def by_seed(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out.setdefault(r.seed, {})[r.arch] = r.final_valid_rmse
        return out

    def verdicts(self, deep_arch: str, shallow_archs: list[str]) -> dict:
        """Per seed: does the deep net beat every shallow one, and do width doublings give shrinking gains."""
        out = {}
        for seed, res in sorted(self.by_seed().items()):
            if deep_arch not in res or any(a not in res for a in shallow_archs):
                continue
            shallow = [res[a] for a in shallow_archs]
            gains = -np.diff(shallow)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = gains[1:] / gains[:-1]
            out[seed] = {
                "deep_wins": all(res[deep_arch] < s for s in shallow),
                "diminishing": bool(np.all(np.diff(gains) < 0)) if gains.size >= 2 else True,
                "gains": gains.tolist(),
                "ratios": ratios.tolist(),
            }
        return out


def depth_vs_width_sweep(
    d: int = 20,
    scale: float = 0.2,
    seeds=(0, 1, 2, 3, 4),
    *,
    archs=None,
    base: TrainConfig | None = None,
    n_valid: int | None = None,
) -> SweepResult:
    """Train every architecture on every seed; rows are ordered by (seed, architecture)."""
    archs = sweep_architectures(scale) if archs is None else [tuple(a) for a in archs]
    base = TrainConfig() if base is None else base
    n_train = max(base.batch_size, round(500_000 * scale))
    n_valid = max(1, n_train // 10) if n_valid is None else n_valid
    seeds = list(seeds)
    datasets = {s: generate_dataset(DatasetSpec(d, n_train, n_valid, 2.0, s)) for s in seeds}
    cells = [(s, a) for s in seeds for a in archs]

    def run_cell(cell):
        s, a = cell
        return train(datasets[s], replace(base, hidden=a, seed=s))

    runs = shard_map(run_cell, cells)
    rows = [SweepRow(r.config.arch, r.config.seed, r.final_valid_rmse, r.n_params) for r in runs]
    return SweepResult(rows, {(r.config.seed, r.config.arch): r for r in runs})


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(", ".join(header) + "\n")
    for row in rows:
        buf.write(", ".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def curve_csv(run: TrainRun) -> str:
    return _csv(["batch", "train_rmse", "valid_rmse"], run.curve)


def summary_csv(rows) -> str:
    return _csv(["arch", "seed", "final_valid_rmse", "params"], [(r.arch, r.seed, r.final_valid_rmse, r.params) for r in rows])


def read_summary(path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        next(reader)
        return [SweepRow(a, int(s), float(v), int(p)) for a, s, v, p in reader]
