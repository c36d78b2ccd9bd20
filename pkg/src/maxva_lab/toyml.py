"""Tiny supervised tasks with exact hand-coded gradients.

A seeded two-blob Gaussian dataset plus two models, logistic regression
and a one-hidden-layer tanh network, give the optimizers a small
non-quadratic surface. Losses are numerically stable binary cross
entropy on logits; gradients are exact and checked against central
finite differences in the test suite.

``ToyProblem`` wraps a (dataset, model, batching) triple in the stacked
interface of :mod:`problems`, so toy training runs flow through the same
harness, diagnostics, and CSV output as the synthetic problems. The
per-run randomness here is the parameter init plus the minibatch order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .harness import ExperimentSpec, RunRecord, run_single
from .optimizers import OptimizerConfig

MODELS = ("logistic", "mlp")


@dataclass(frozen=True)
class BlobDataset:
    """A fixed classification sample: features (n, f), binary labels (n,)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise ValueError("features must be (n, f) with labels (n,)")
        if len(X) == 0:
            raise ValueError("dataset is empty")
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def to_csv(self, path: str | Path) -> None:
        """Write one row per sample: feature columns then the label."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j}" for j in range(self.n_features)] + ["label"])
            for xi, yi in zip(self.features, self.labels):
                writer.writerow([repr(float(v)) for v in xi] + [int(yi)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "BlobDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n_feat = len(header) - 1
            feats, labels = [], []
            for row in reader:
                feats.append([float(v) for v in row[:n_feat]])
                labels.append(float(row[n_feat]))
        return cls(features=np.array(feats), labels=np.array(labels))


def make_blobs(
    n_samples: int = 512,
    n_features: int = 2,
    seed: int = 0,
    separation: float = 4.0,
    spread: float = 1.0,
) -> BlobDataset:
    """Two Gaussian blobs, centers +/- separation/2 on the first axis.

    Bit-exact for fixed arguments. n_samples splits as evenly as possible
    between the classes.
    """
    if n_samples < 2 or n_features < 1:
        raise ValueError("need n_samples >= 2 and n_features >= 1")
    rng = np.random.default_rng(seed)
    n0 = n_samples // 2
    n1 = n_samples - n0
    center = np.zeros(n_features)
    center[0] = separation / 2.0
    X = np.concatenate(
        [
            -center + spread * rng.standard_normal((n0, n_features)),
            center + spread * rng.standard_normal((n1, n_features)),
        ]
    )
    y = np.concatenate([np.zeros(n0), np.ones(n1)])
    perm = rng.permutation(n_samples)
    return BlobDataset(features=X[perm], labels=y[perm])


def _bce_from_logits(z: np.ndarray, y: np.ndarray) -> float:
    # mean of softplus(z) - y * z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_grad(
    params: np.ndarray, features: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean binary cross entropy and its exact gradient.

    params holds the weight vector followed by the bias, length f + 1.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty batch")
    params = np.asarray(params, dtype=np.float64)
    if len(params) != X.shape[1] + 1:
        raise ValueError(f"expected {X.shape[1] + 1} parameters, got {len(params)}")
    w, b = params[:-1], params[-1]
    z = X @ w + b
    residual = (_sigmoid(z) - y) / len(y)
    grad = np.concatenate([X.T @ residual, [residual.sum()]])
    return _bce_from_logits(z, y), grad


@dataclass(frozen=True)
class MLPShape:
    """Flat-vector layout of the one-hidden-layer tanh network."""

    n_features: int
    n_hidden: int

    def __post_init__(self) -> None:
        if self.n_features < 1 or self.n_hidden < 1:
            raise ValueError("n_features and n_hidden must be >= 1")

    @property
    def size(self) -> int:
        return self.n_hidden * self.n_features + self.n_hidden + self.n_hidden + 1

    def unpack(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """Split a flat vector into (W1, b1, w2, b2)."""
        params = np.asarray(params, dtype=np.float64)
        if len(params) != self.size:
            raise ValueError(f"expected {self.size} parameters, got {len(params)}")
        h, f = self.n_hidden, self.n_features
        W1 = params[: h * f].reshape(h, f)
        b1 = params[h * f : h * f + h]
        w2 = params[h * f + h : h * f + 2 * h]
        b2 = float(params[-1])
        return W1, b1, w2, b2

    def pack(self, W1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: float) -> np.ndarray:
        return np.concatenate([np.ravel(W1), b1, w2, [b2]])


def init_mlp_params(shape: MLPShape, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    return scale * rng.standard_normal(shape.size)


def mlp_loss_grad(
    params: np.ndarray, shape: MLPShape, features: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """BCE of the tanh network and its exact backpropagated gradient."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty batch")
    W1, b1, w2, b2 = shape.unpack(params)
    n = len(y)
    a = np.tanh(X @ W1.T + b1)  # (n, hidden)
    z = a @ w2 + b2
    loss = _bce_from_logits(z, y)
    dz = (_sigmoid(z) - y) / n
    grad_w2 = a.T @ dz
    grad_b2 = dz.sum()
    da = np.outer(dz, w2) * (1.0 - a * a)
    grad_W1 = da.T @ X
    grad_b1 = da.sum(axis=0)
    return loss, shape.pack(grad_W1, grad_b1, grad_w2, grad_b2)


def minibatch_indices(
    n: int,
    batch_size: int,
    rng: np.random.Generator,
    n_batches: int,
    growing: bool = False,
):
    """Yield ``n_batches`` index arrays drawn from reshuffled epochs.

    Fixed mode uses size ``batch_size`` throughout; growing mode gives
    batch t size min(t, n). Batches never straddle an epoch refill, they
    just trigger one when the current shuffle runs dry.
    """
    if batch_size < 1 or batch_size > n:
        raise ValueError(f"batch_size must lie in 1..{n}, got {batch_size}")
    pool = rng.permutation(n)
    cursor = 0
    for t in range(1, n_batches + 1):
        size = min(t, n) if growing else batch_size
        if cursor + size > n:
            pool = rng.permutation(n)
            cursor = 0
        yield pool[cursor : cursor + size]
        cursor += size


def minibatch_iter(
    dataset: BlobDataset,
    batch_size: int,
    rng: np.random.Generator,
    epochs: int = 1,
    growing: bool = False,
):
    """Yield (features, labels) batches covering ``epochs`` passes."""
    n = dataset.n_samples
    n_batches = batches_for_epochs(n, batch_size, epochs, growing)
    for idx in minibatch_indices(n, batch_size, rng, n_batches, growing):
        yield dataset.features[idx], dataset.labels[idx]


def batches_for_epochs(n: int, batch_size: int, epochs: int, growing: bool = False) -> int:
    """Number of batches needed to draw at least epochs * n samples."""
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    if not growing:
        return epochs * -(-n // batch_size)
    target = epochs * n
    total = 0
    t = 0
    while total < target:
        t += 1
        total += min(t, n)
    return t


@dataclass(frozen=True)
class ToyProblem:
    """A toy task in the stacked harness interface.

    Noise for one run is the sequence of minibatch index arrays; the
    parameter init is the run's other random draw. Loss reported to the
    harness is the full-dataset loss of the current iterate.
    """

    dataset: BlobDataset
    model: str = "logistic"
    n_hidden: int = 8
    batch_size: int = 32
    growing: bool = False
    init_scale: float = 0.5

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")

    @property
    def shape(self) -> MLPShape:
        return MLPShape(self.dataset.n_features, self.n_hidden)

    @property
    def dim(self) -> int:
        if self.model == "logistic":
            return self.dataset.n_features + 1
        return self.shape.size

    def _loss_grad(self, params: np.ndarray, X: np.ndarray, y: np.ndarray):
        if self.model == "logistic":
            return logistic_loss_grad(params, X, y)
        return mlp_loss_grad(params, self.shape, X, y)

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        return self.init_scale * rng.standard_normal(self.dim)

    def draw_noise(self, rng: np.random.Generator, horizon: int) -> list[np.ndarray]:
        return list(
            minibatch_indices(
                self.dataset.n_samples, self.batch_size, rng, horizon, self.growing
            )
        )

    def grad_stacked(self, theta: np.ndarray, noise_t: list[np.ndarray]) -> np.ndarray:
        out = np.empty_like(theta)
        for k, idx in enumerate(noise_t):
            _, out[k] = self._loss_grad(theta[k], self.dataset.features[idx], self.dataset.labels[idx])
        return out

    def loss_stacked(self, theta: np.ndarray) -> np.ndarray:
        return np.array(
            [self._loss_grad(row, self.dataset.features, self.dataset.labels)[0] for row in theta]
        )


def train(
    dataset: BlobDataset,
    config: OptimizerConfig,
    model: str = "logistic",
    epochs: int = 20,
    batch_size: int = 32,
    seed: int = 0,
    n_hidden: int = 8,
    growing: bool = False,
) -> RunRecord:
    """One seeded training run; returns its harness record.

    The loss series is the full-dataset loss after every step.
    """
    problem = ToyProblem(
        dataset=dataset, model=model, n_hidden=n_hidden,
        batch_size=batch_size, growing=growing,
    )
    horizon = batches_for_epochs(dataset.n_samples, batch_size, epochs, growing)
    spec = ExperimentSpec(
        problem=problem, config=config, horizon=horizon, n_runs=1, master_seed=seed
    )
    return run_single(spec, 0)
