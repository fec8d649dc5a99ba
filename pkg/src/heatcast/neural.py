"""Minimal dense neural-network engine for the two network forecasters.

Implements exactly what the feed-forward and radial-basis forecasters
need: dense, batch-normalization, leaky-ReLU, dropout, and RBF layers
with hand-written backpropagation, Adam updates, a time-ordered
validation split, and patience-based early stopping.  Everything runs in
double precision on plain numpy arrays and is deterministic for a fixed
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime

import numpy as np

from .core import (
    HORIZON,
    FeatureSet,
    ForecastWindow,
    HourlySeries,
    InsufficientDataError,
    WarmupError,
    WeatherRecord,
    weather_features,
)
from .ingest import CleanDataset

HISTORY_HOURS = 144  # past readings reach at most 143 hours back

# hour shifts into the past feeding each architecture
FFNN_PAST_INDICES = (
    0, 1, 2, 6, 7, 8, 9, 11, 12, 17, 19, 20, 21, 22, 23, 25, 26, 28, 29, 30,
    32, 33, 35, 36, 37, 39, 40, 41, 42, 44, 46, 47, 48, 50, 53, 54, 56, 59,
    60, 62, 67, 69, 71, 74, 75, 77, 82, 84, 85, 86, 92, 94, 97, 98, 100, 103,
    105, 106, 107, 109, 110, 112, 114, 116, 117, 118, 119, 121, 122, 125,
    126, 127, 128, 129, 130, 131, 132, 134, 135, 136, 137, 139, 140, 142, 143,
)
RBFNN_PAST_INDICES = (
    1, 2, 4, 5, 10, 14, 15, 19, 21, 23, 27, 28, 29, 41, 44, 45, 46, 47, 48,
    51, 56, 57, 58, 60, 65, 67, 72, 73, 75, 76, 79, 81, 86, 87, 90, 91, 93,
    96, 104, 112, 116, 121, 124, 128, 131, 132, 135, 139, 140, 142,
)

FFNN_HIDDEN = (10, 46)
DROPOUT_P = 0.406
LEAKY_SLOPE = 0.01
RBF_NEURONS = 16


@dataclass
class InputSpec:
    """Which past readings and whether current-hour weather feed the net."""

    past_indices: tuple[int, ...]
    use_weather: bool

    def __post_init__(self):
        if any(i < 0 or i > HISTORY_HOURS - 1 for i in self.past_indices):
            raise ValueError("past indices must lie in 0..143")

    @property
    def width(self) -> int:
        return len(self.past_indices) + (len(FeatureSet.FSM) if self.use_weather else 0)


FFNN_INPUT = InputSpec(past_indices=FFNN_PAST_INDICES, use_weather=True)
RBFNN_INPUT = InputSpec(past_indices=RBFNN_PAST_INDICES, use_weather=False)


@dataclass
class TrainConfig:
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 1000
    patience: int = 20
    validation_fraction: float = 0.10
    seed: int = 0


class Dense:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(n_in)
        self.W = rng.uniform(-bound, bound, (n_in, n_out))
        self.b = rng.uniform(-bound, bound, n_out)
        self._x = None

    def forward(self, x, training, rng=None, update_stats=True):
        if training:
            self._x = x
        return x @ self.W + self.b

    def backward(self, grad):
        self.gW = self._x.T @ grad
        self.gb = grad.sum(axis=0)
        return grad @ self.W.T

    def params(self):
        return [("W", self.W, "gW"), ("b", self.b, "gb")]


class BatchNorm:
    """Batch statistics in training, running statistics in inference."""

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x, training, rng=None, update_stats=True):
        if training:
            mean = x.mean(axis=0)
            var = x.var(axis=0)  # biased, as used for normalization
            if update_stats:
                n = x.shape[0]
                unbiased = var * n / max(1, n - 1)
                self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
                self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
            self._istd = 1.0 / np.sqrt(var + self.eps)
            self._xhat = (x - mean) * self._istd
            return self.gamma * self._xhat + self.beta
        istd = 1.0 / np.sqrt(self.running_var + self.eps)
        return self.gamma * (x - self.running_mean) * istd + self.beta

    def backward(self, grad):
        n = grad.shape[0]
        xhat, istd = self._xhat, self._istd
        self.ggamma = (grad * xhat).sum(axis=0)
        self.gbeta = grad.sum(axis=0)
        gxhat = grad * self.gamma
        # gradient through the batch mean and variance
        return istd / n * (n * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))

    def params(self):
        return [("gamma", self.gamma, "ggamma"), ("beta", self.beta, "gbeta")]


class LeakyReLU:
    def __init__(self, slope: float = LEAKY_SLOPE):
        self.slope = slope

    def forward(self, x, training, rng=None, update_stats=True):
        if training:
            self._neg = x < 0
        return np.where(x < 0, self.slope * x, x)

    def backward(self, grad):
        return np.where(self._neg, self.slope * grad, grad)

    def params(self):
        return []


class Dropout:
    """Inverted dropout; identity in inference mode."""

    def __init__(self, p: float = DROPOUT_P):
        self.p = p

    def forward(self, x, training, rng=None, update_stats=True):
        if not training or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask

    def params(self):
        return []


class RBF:
    """Gaussian units: out_k = exp(-|x - c_k|^2 / (2 w_k^2))."""

    def __init__(self, centers: np.ndarray, widths: np.ndarray, trainable: bool = True):
        self.centers = np.asarray(centers, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        self.trainable = trainable

    def forward(self, x, training, rng=None, update_stats=True):
        diff = x[:, None, :] - self.centers[None, :, :]   # (n, k, d)
        sq = (diff**2).sum(axis=2)                        # (n, k)
        out = np.exp(-sq / (2.0 * self.widths**2))
        if training:
            self._diff, self._sq, self._out = diff, sq, out
        return out

    def backward(self, grad):
        w2 = self.widths**2
        scaled = (grad * self._out / w2)[:, :, None]     # (n, k, 1)
        if self.trainable:
            # d out_k / d c_k = out_k * (x - c_k) / w_k^2
            self.gcenters = (scaled * self._diff).sum(axis=0)
            self.gwidths = (grad * self._out * self._sq).sum(axis=0) / self.widths**3
        # d out_k / d x = out_k * (c_k - x) / w_k^2
        return -(scaled * self._diff).sum(axis=1)

    def params(self):
        if not self.trainable:
            return []
        return [("centers", self.centers, "gcenters"), ("widths", self.widths, "gwidths")]


class Network:
    """Ordered layer stack with explicit train/infer modes."""

    def __init__(self, layers: list):
        self.layers = layers

    def forward(self, x, training=False, rng=None, update_stats=True):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        for layer in self.layers:
            x = layer.forward(x, training, rng=rng, update_stats=update_stats)
        return x

    def backward(self, grad_out):
        grad = grad_out
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        out = []
        for li, layer in enumerate(self.layers):
            for name, arr, gattr in layer.params():
                out.append((li, name, arr, gattr))
        return out

    def get_state(self):
        return [arr.copy() for _, _, arr, _ in self.parameters()]

    def set_state(self, state):
        for (li, name, arr, _), saved in zip(self.parameters(), state):
            arr[...] = saved

    def bn_state(self):
        out = []
        for layer in self.layers:
            if isinstance(layer, BatchNorm):
                out.append((layer.running_mean.copy(), layer.running_var.copy()))
        return out

    def set_bn_state(self, state):
        it = iter(state)
        for layer in self.layers:
            if isinstance(layer, BatchNorm):
                mean, var = next(it)
                layer.running_mean[...] = mean
                layer.running_var[...] = var


def mse_loss_and_grad(pred: np.ndarray, target: np.ndarray):
    """Mean over all elements, with its gradient w.r.t. pred."""
    diff = pred - target
    n = diff.size
    return float((diff**2).sum() / n), 2.0 * diff / n


def build_ffnn(input_width: int, rng: np.random.Generator, dropout: float = DROPOUT_P) -> Network:
    h1, h2 = FFNN_HIDDEN
    return Network([
        BatchNorm(input_width),
        Dense(input_width, h1, rng), BatchNorm(h1), LeakyReLU(), Dropout(dropout),
        Dense(h1, h2, rng), BatchNorm(h2), LeakyReLU(), Dropout(dropout),
        Dense(h2, HORIZON, rng),
    ])


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, iters: int = 50) -> np.ndarray:
    """Plain Lloyd's algorithm; empty clusters are reseeded to random rows."""
    n = x.shape[0]
    centers = x[rng.choice(n, size=min(k, n), replace=False)].copy()
    if centers.shape[0] < k:  # fewer samples than clusters: duplicate rows
        extra = x[rng.integers(0, n, k - centers.shape[0])]
        centers = np.vstack([centers, extra])
    for _ in range(iters):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        new = centers.copy()
        for j in range(k):
            members = x[assign == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                new[j] = x[rng.integers(0, n)]
        if np.allclose(new, centers):
            centers = new
            break
        centers = new
    return centers


def build_rbfnn(
    input_width: int,
    rng: np.random.Generator,
    train_inputs: np.ndarray | None = None,
    neurons: int = RBF_NEURONS,
    trainable_rbf: bool = True,
) -> Network:
    if train_inputs is not None and len(train_inputs) >= 2:
        centers = kmeans(train_inputs, neurons, rng)
    else:
        centers = rng.normal(0.0, 1.0, (neurons, input_width))
    dists = np.sqrt(((centers[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2))
    pair = dists[np.triu_indices(neurons, k=1)]
    width = float(np.median(pair[pair > 0])) if np.any(pair > 0) else 1.0
    widths = np.full(neurons, max(width, 1e-8))
    return Network([
        BatchNorm(input_width),
        RBF(centers, widths, trainable=trainable_rbf),
        Dense(neurons, HORIZON, rng),
    ])


class Adam:
    def __init__(self, net: Network, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(arr) for _, _, arr, _ in net.parameters()]
        self.v = [np.zeros_like(arr) for _, _, arr, _ in net.parameters()]
        self.t = 0

    def step(self, net: Network):
        c = self.cfg
        self.t += 1
        for slot, (li, name, arr, gattr) in enumerate(net.parameters()):
            g = getattr(net.layers[li], gattr)
            self.m[slot] = c.beta1 * self.m[slot] + (1 - c.beta1) * g
            self.v[slot] = c.beta2 * self.v[slot] + (1 - c.beta2) * g * g
            mhat = self.m[slot] / (1 - c.beta1**self.t)
            vhat = self.v[slot] / (1 - c.beta2**self.t)
            arr -= c.step_size * mhat / (np.sqrt(vhat) + c.eps)


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float


def train_network(
    net: Network,
    X: np.ndarray,
    Y: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> list[EpochRecord]:
    """Adam training with a most-recent validation slice and early stopping.

    Rows of X/Y must be in time order; the most recent
    ``validation_fraction`` of them becomes the validation set.  Training
    stops after ``patience`` epochs without validation improvement and the
    best epoch's parameters (and running statistics) are restored.
    """
    n = len(X)
    n_val = max(1, int(round(cfg.validation_fraction * n)))
    if n - n_val < 1:
        raise InsufficientDataError(f"{n} training rows leave nothing after validation split")
    Xt, Yt = X[: n - n_val], Y[: n - n_val]
    Xv, Yv = X[n - n_val :], Y[n - n_val :]

    opt = Adam(net, cfg)
    best_val = np.inf
    best_state = net.get_state()
    best_bn = net.bn_state()
    since_best = 0
    curve: list[EpochRecord] = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(Xt))
        train_losses = []
        for s in range(0, len(Xt), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            if len(idx) < 2:
                continue  # batch statistics need at least two rows
            pred = net.forward(Xt[idx], training=True, rng=rng)
            loss, grad = mse_loss_and_grad(pred, Yt[idx])
            net.backward(grad)
            opt.step(net)
            train_losses.append(loss)
        val_pred = net.forward(Xv, training=False)
        val_mse, _ = mse_loss_and_grad(val_pred, Yv)
        curve.append(EpochRecord(epoch, float(np.mean(train_losses)) if train_losses else np.nan, val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_state = net.get_state()
            best_bn = net.bn_state()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    net.set_state(best_state)
    net.set_bn_state(best_bn)
    return curve


def build_training_rows(
    train: CleanDataset, counter_id: str, spec: InputSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Input/target matrices from every origin with fully valid context.

    An origin j contributes a row when the trailing 144 hours and the 72
    target hours are all valid for the counter.
    """
    ci = train.counter_index(counter_id)
    values = train.values[ci]
    valid = train.valid[ci]
    H = train.block_hours
    lo = max(train.lo, HISTORY_HOURS - 1)
    hi = min(train.hi, H - 1 - HORIZON)
    if hi < lo:
        raise InsufficientDataError("training interval shorter than history plus horizon")

    cval = np.concatenate([[0], np.cumsum(valid.astype(int))])
    js = np.arange(lo, hi + 1)
    hist_ok = (cval[js + 1] - cval[js + 1 - HISTORY_HOURS]) == HISTORY_HOURS
    tgt_ok = (cval[js + 1 + HORIZON] - cval[js + 1]) == HORIZON
    js = js[hist_ok & tgt_ok]
    if len(js) < 10:
        raise InsufficientDataError(f"only {len(js)} usable training rows, need at least 10")

    past = np.array(spec.past_indices)
    X = values[js[:, None] - past[None, :]]
    if spec.use_weather:
        feats = train.weather.features(FeatureSet.FSM)
        X = np.column_stack([X, feats[js]])
    Y = values[js[:, None] + 1 + np.arange(HORIZON)[None, :]]
    return X, Y


@dataclass
class TrainedNetwork:
    """Fitted network forecaster with its input recipe and training curve."""

    counter_id: str
    arch: str  # "ffnn" | "rbfnn"
    spec: InputSpec
    net: Network
    curve: list[EpochRecord] = field(default_factory=list)

    def predict(
        self,
        history: HourlySeries,
        weather_forecast=None,
        weather_now: WeatherRecord | None = None,
    ) -> ForecastWindow:
        if len(history) < HISTORY_HOURS:
            raise WarmupError(
                f"need {HISTORY_HOURS} trailing hours of history, have {len(history)}"
            )
        last = len(history) - 1
        x = history.values[last - np.array(self.spec.past_indices)]
        if self.spec.use_weather:
            if weather_now is None:
                raise ValueError("this network needs the current hour's weather record")
            x = np.concatenate([x, weather_features(weather_now, FeatureSet.FSM)])
        out = self.net.forward(x.reshape(1, -1), training=False)[0]
        return ForecastWindow(origin=history.end, values=np.maximum(0.0, out))


class NetworkForecaster:
    """Factory for the FFNN or RBFNN forecaster at a fixed seed."""

    def __init__(self, arch: str, cfg: TrainConfig | None = None, spec: InputSpec | None = None,
                 trainable_rbf: bool = True):
        if arch not in ("ffnn", "rbfnn"):
            raise ValueError(f"unknown architecture {arch!r}")
        self.arch = arch
        self.cfg = cfg or TrainConfig()
        self.spec = spec or (FFNN_INPUT if arch == "ffnn" else RBFNN_INPUT)
        self.trainable_rbf = trainable_rbf

    def fit(self, train: CleanDataset, counter_id: str) -> TrainedNetwork:
        X, Y = build_training_rows(train, counter_id, self.spec)
        rng = np.random.default_rng(self.cfg.seed)
        if self.arch == "ffnn":
            net = build_ffnn(self.spec.width, rng)
        else:
            n_fit = len(X) - max(1, int(round(self.cfg.validation_fraction * len(X))))
            net = build_rbfnn(self.spec.width, rng, train_inputs=X[:n_fit],
                              trainable_rbf=self.trainable_rbf)
        curve = train_network(net, X, Y, self.cfg, rng)
        return TrainedNetwork(counter_id=counter_id, arch=self.arch, spec=self.spec,
                              net=net, curve=curve)


def write_training_curve(curve: list[EpochRecord], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_mse", "val_mse"])
        for rec in curve:
            w.writerow([rec.epoch, repr(rec.train_mse), repr(rec.val_mse)])
