"""Training pipeline for the temperature-change predictors.

Feature screening by rank correlation, mean/variance normalization,
ordinary least squares, a small multilayer perceptron trained with
mini-batch SGD and backpropagation, and grid search over architectures
with k-fold cross-validation. Distinct folds and grid cells own their data
slices and derive their seeds from stable keys, so they could run in
parallel without changing results.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import electrical, thermal
from .core import ChargingEvent
from .electrical import EcmTables
from .errors import InvalidParameterError, TrainingFailureError, UndefinedCorrelationError
from .thermal import FEATURE_NAMES, ThermalModel


@dataclass(frozen=True)
class Dataset:
    """Samples-by-features matrix with a target vector (temperature change, K)."""

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 1 or self.x.shape[0] != self.y.shape[0]:
            raise InvalidParameterError("x must be (n, m) and y (n,)")
        if self.x.shape[1] != len(self.feature_names):
            raise InvalidParameterError("feature_names must match the number of columns")
        if np.any(~np.isfinite(self.x)) or np.any(~np.isfinite(self.y)):
            raise InvalidParameterError("dataset contains non-finite values")

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class MlpArchitecture:
    hidden_layers: int = 2
    neurons_per_layer: int = 10
    learning_rate: float = 0.001
    epochs: int = 500
    batch_size: int = 32

    def __post_init__(self):
        if self.hidden_layers < 1 or self.neurons_per_layer < 1:
            raise InvalidParameterError("need at least one hidden layer and one neuron")
        if self.learning_rate <= 0:
            raise InvalidParameterError("learning rate must be positive")

    def n_parameters(self, n_features: int) -> int:
        sizes = [n_features] + [self.neurons_per_layer] * self.hidden_layers + [1]
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


@dataclass(frozen=True)
class Normalizer:
    means: np.ndarray
    stds: np.ndarray  # population stds; zero-variance columns keep std 0 here

    def safe_stds(self) -> np.ndarray:
        return np.where(self.stds == 0, 1.0, self.stds)


def build_dataset(events: list[ChargingEvent], tables: EcmTables) -> Dataset:
    """One training sample per time step of each discretized event.

    Energy throughput is taken from the measured energy series; the Ohmic
    loss is engineered from the circuit model at the measured state.
    """
    if not events:
        raise InvalidParameterError("empty event corpus")
    xs, ys = [], []
    for ev in events:
        e_n = ev.e[:-1]
        th_n = ev.theta[:-1]
        u, r = electrical.lookup_arrays(tables, e_n, th_n)
        i_bat = electrical.battery_current(u, r, ev.p)
        q_loss = electrical.ohmic_loss(r, i_bat)
        delta_e = np.diff(ev.e)
        xs.append(thermal.feature_matrix(ev.p, q_loss, delta_e, th_n))
        ys.append(np.diff(ev.theta))
    return Dataset(np.vstack(xs), np.concatenate(ys), FEATURE_NAMES)


def _rank(v: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties receiving the average of their positions."""
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v))
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Rank correlation: Pearson correlation of the two rank vectors."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise InvalidParameterError("spearman needs two equal-length vectors of length >= 2")
    rx, ry = _rank(x), _rank(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("zero rank variance")
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


def screen_features(ds: Dataset, threshold: float) -> Dataset:
    """Keep features with |rank correlation to the target| >= threshold.

    Undefined correlations (constant columns) count as 0. Column order is
    preserved.
    """
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameterError(f"threshold must be in [0, 1], got {threshold}")
    keep = []
    for j, name in enumerate(ds.feature_names):
        try:
            rho = spearman(ds.x[:, j], ds.y)
        except UndefinedCorrelationError:
            rho = 0.0
        if abs(rho) >= threshold:
            keep.append(j)
    if not keep:
        raise InvalidParameterError(f"all features screened out at threshold {threshold}")
    return Dataset(ds.x[:, keep], ds.y, tuple(ds.feature_names[j] for j in keep))


def fit_normalizer(ds: Dataset) -> Normalizer:
    if ds.n_samples < 2:
        raise InvalidParameterError("need at least 2 samples to fit a normalizer")
    return Normalizer(ds.x.mean(axis=0), ds.x.std(axis=0))


def apply_normalizer(ds: Dataset, nrm: Normalizer) -> Dataset:
    z = (ds.x - nrm.means) / nrm.safe_stds()
    z[:, nrm.stds == 0] = 0.0
    return Dataset(z, ds.y, ds.feature_names)


def fit_linear(ds: Dataset, normalization: Normalizer | None = None) -> ThermalModel:
    """Ordinary least squares with intercept, via the normal equations.

    Falls back to a small ridge term when the normal matrix is
    near-singular. If the dataset was normalized, pass the normalizer so
    the returned model applies it at prediction time.
    """
    n, m = ds.x.shape
    if n < m + 1:
        raise InvalidParameterError(f"need at least {m + 1} samples for {m} features")
    xd = np.column_stack([ds.x, np.ones(n)])
    a = xd.T @ xd
    b = xd.T @ ds.y
    try:
        if np.linalg.cond(a) > 1e12:
            raise np.linalg.LinAlgError("near-singular normal matrix")
        coef = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        coef = np.linalg.solve(a + 1e-8 * np.eye(m + 1), b)
    w = coef[:m][:, None]
    bias = np.array([coef[m]])
    nrm = normalization or Normalizer(np.zeros(m), np.ones(m))
    return ThermalModel(
        variant=thermal.VARIANT_LINEAR,
        feature_names=ds.feature_names,
        means=nrm.means,
        stds=nrm.safe_stds(),
        layers=((w, bias),),
    )


def _init_layers(arch: MlpArchitecture, n_features: int, rng: np.random.Generator):
    """Xavier-uniform weights, zero biases."""
    sizes = [n_features] + [arch.neurons_per_layer] * arch.hidden_layers + [1]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append([rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)])
    return layers


def mlp_forward(layers, x: np.ndarray):
    """Forward pass; returns predictions (n,) and per-layer activations."""
    acts = [np.atleast_2d(x)]
    h = acts[0]
    for w, b in layers[:-1]:
        h = thermal._sigmoid(h @ w + b)
        acts.append(h)
    w, b = layers[-1]
    out = h @ w + b
    return out[:, 0], acts


def mlp_gradients(layers, x: np.ndarray, y: np.ndarray):
    """Gradients of the mean squared error wrt every weight and bias.

    Also returns the forward predictions so training can track the loss
    without a second pass.
    """
    pred, acts = mlp_forward(layers, x)
    n = len(y)
    delta = (2.0 / n) * (pred - y)[:, None]  # d(mse)/d(out)
    grads = []
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        gw = acts[li].T @ delta
        gb = delta.sum(axis=0)
        grads.append((gw, gb))
        if li > 0:
            a = acts[li]
            delta = (delta @ w.T) * a * (1.0 - a)  # sigmoid derivative
    grads.reverse()
    return grads, pred


def fit_mlp(
    ds: Dataset,
    arch: MlpArchitecture,
    seed: int | np.random.SeedSequence = 0,
    normalization: Normalizer | None = None,
) -> ThermalModel:
    """Mini-batch SGD on the mean squared error; deterministic per seed.

    The dataset is expected to be normalized already; pass the normalizer
    so prediction applies the same transform. Divergence (non-finite loss)
    raises TrainingFailureError with the epoch index.
    """
    rng = np.random.default_rng(seed)
    layers = _init_layers(arch, ds.x.shape[1], rng)
    n = ds.n_samples
    for epoch in range(arch.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, arch.batch_size):
            idx = perm[start : start + arch.batch_size]
            xb, yb = ds.x[idx], ds.y[idx]
            grads, pred = mlp_gradients(layers, xb, yb)
            epoch_loss += float(np.sum((pred - yb) ** 2))
            for (w, b), (gw, gb) in zip(layers, grads):
                w -= arch.learning_rate * gw
                b -= arch.learning_rate * gb
        if not np.isfinite(epoch_loss):
            raise TrainingFailureError(f"training diverged at epoch {epoch}", epoch=epoch)
    m = ds.x.shape[1]
    nrm = normalization or Normalizer(np.zeros(m), np.ones(m))
    return ThermalModel(
        variant=thermal.VARIANT_MLP,
        feature_names=ds.feature_names,
        means=nrm.means,
        stds=nrm.safe_stds(),
        layers=tuple((w.copy(), b.copy()) for w, b in layers),
    )


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, float)
    actual = np.asarray(actual, float)
    if pred.shape != actual.shape or pred.size == 0:
        raise InvalidParameterError("rmse needs equal-length non-empty vectors")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def mae(pred, actual) -> float:
    pred = np.asarray(pred, float)
    actual = np.asarray(actual, float)
    if pred.shape != actual.shape or pred.size == 0:
        raise InvalidParameterError("mae needs equal-length non-empty vectors")
    return float(np.mean(np.abs(pred - actual)))


def default_grid() -> list[MlpArchitecture]:
    """1-3 hidden layers times 5/10/20 neurons, bracketing the usual winner."""
    return [
        MlpArchitecture(hidden_layers=nl, neurons_per_layer=nn)
        for nl in (1, 2, 3)
        for nn in (5, 10, 20)
    ]


def _fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [perm[i::k] for i in range(k)]


# Mean-RMSE differences below max(atol, rtol * best) count as ties and
# resolve toward fewer parameters, then grid order.
TIE_ATOL_K = 1e-3
TIE_RTOL = 0.05


def grid_search_cv(
    ds: Dataset,
    grid: list[MlpArchitecture],
    k: int = 5,
    seed: int = 0,
) -> tuple[MlpArchitecture, list[dict]]:
    """Pick the architecture with the lowest mean validation RMSE.

    The fold partition is deterministic per seed; per-cell training seeds
    derive from (seed, architecture shape, fold), so results do not depend
    on the order of the grid beyond the documented tie-break.
    """
    if k < 2:
        raise InvalidParameterError("need at least 2 folds")
    if not grid:
        raise InvalidParameterError("empty architecture grid")
    if ds.n_samples < k:
        raise InvalidParameterError(f"{ds.n_samples} samples cannot fill {k} folds")
    folds = _fold_indices(ds.n_samples, k, seed)
    table = []
    means = []
    for arch in grid:
        fold_rmses = []
        for fi, val_idx in enumerate(folds):
            train_mask = np.ones(ds.n_samples, dtype=bool)
            train_mask[val_idx] = False
            ds_train = Dataset(ds.x[train_mask], ds.y[train_mask], ds.feature_names)
            ds_val = Dataset(ds.x[val_idx], ds.y[val_idx], ds.feature_names)
            ss = np.random.SeedSequence([seed, arch.hidden_layers, arch.neurons_per_layer, fi])
            model = fit_mlp(ds_train, arch, seed=ss)
            pred, _ = mlp_forward(list(model.layers), ds_val.x)
            r = rmse(pred, ds_val.y)
            fold_rmses.append(r)
            table.append(
                {
                    "hidden_layers": arch.hidden_layers,
                    "neurons": arch.neurons_per_layer,
                    "fold": fi,
                    "rmse_k": r,
                }
            )
        means.append(float(np.mean(fold_rmses)))
    best_mean = min(means)
    tie = max(TIE_ATOL_K, TIE_RTOL * best_mean)
    candidates = [i for i, m in enumerate(means) if m <= best_mean + tie]
    nf = ds.x.shape[1]
    best = min(candidates, key=lambda i: (grid[i].n_parameters(nf), i))
    return grid[best], table


def save_cv_table_csv(table: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hidden_layers", "neurons", "fold", "rmse_k"])
        for row in table:
            w.writerow([row["hidden_layers"], row["neurons"], row["fold"], repr(row["rmse_k"])])
