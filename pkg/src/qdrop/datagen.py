"""Synthetic datasets, train-fitted min-max scaling, and splits.

The three benchmarks are deliberately tiny and noisy so that deep
re-uploading circuits overfit them: a noisy sine, a noisy shifted
modulus, and the two-moons point clouds.  Noise enters as
amplitude * Normal(0, std^2) per sample; x grids are deterministic so
randomness comes only from noise draws and the split.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class RawDataset:
    task: str
    features: np.ndarray  # (n, d)
    targets: np.ndarray   # (n,) real or {0,1}


@dataclass
class PreparedDataset:
    task: str
    features_raw: np.ndarray
    targets_raw: np.ndarray
    features: np.ndarray      # scaled (and clamped, for regression)
    targets: np.ndarray       # scaled for regression, labels otherwise
    train_idx: np.ndarray
    test_idx: np.ndarray
    feature_min: np.ndarray   # per-feature scaler params, fitted on train
    feature_max: np.ndarray
    target_min: Optional[float]
    target_max: Optional[float]
    clamp_count: int = 0

    @property
    def is_classification(self) -> bool:
        return self.task == "moons"

    def train_arrays(self):
        return self.features[self.train_idx], self.targets[self.train_idx]

    def test_arrays(self):
        return self.features[self.test_idx], self.targets[self.test_idx]

    def to_csv(self) -> str:
        d = self.features.shape[1]
        header = ",".join([f"x{i + 1}" for i in range(d)] + ["y", "split"])
        split = np.full(self.features.shape[0], "test", dtype=object)
        split[self.train_idx] = "train"
        buf = io.StringIO()
        buf.write(header + "\n")
        for i in range(self.features.shape[0]):
            cells = [f"{v:.12g}" for v in self.features[i]]
            cells.append(f"{self.targets[i]:.12g}")
            cells.append(split[i])
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def gen_sin(n: int = 20, noise_amplitude: float = 0.4,
            noise_std: float = 0.5, seed: int = 0) -> RawDataset:
    """y = sin(pi x) + amplitude * Normal(0, std^2) on a uniform x grid."""
    if n < 2:
        raise DataError("need at least two samples")
    rng = np.random.default_rng(seed)
    x = np.linspace(-1.0, 1.0, n)
    y = np.sin(np.pi * x) + noise_amplitude * rng.normal(0.0, noise_std, n)
    return RawDataset("sin", x[:, None], y)


def gen_module(n: int = 20, noise_amplitude: float = 0.3,
               noise_std: float = 0.5, seed: int = 0,
               half_width: float = 1.0) -> RawDataset:
    """y = |x| - 1/2 + amplitude * Normal(0, std^2) on a symmetric grid."""
    if n < 2:
        raise DataError("need at least two samples")
    rng = np.random.default_rng(seed)
    x = np.linspace(-half_width, half_width, n)
    y = np.abs(x) - 0.5 + noise_amplitude * rng.normal(0.0, noise_std, n)
    return RawDataset("module", x[:, None], y)


def gen_moons(n: int = 50, noise_amplitude: float = 1.0,
              noise_std: float = 0.2, seed: int = 0) -> RawDataset:
    """Two interleaved half circles with additive Gaussian noise."""
    if n < 2 or n % 2:
        raise DataError("moons needs an even sample count >= 2")
    rng = np.random.default_rng(seed)
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    pts = np.vstack([upper, lower])
    pts = pts + noise_amplitude * rng.normal(0.0, noise_std, pts.shape)
    labels = np.concatenate([np.zeros(half), np.ones(half)])
    return RawDataset("moons", pts, labels)


def generate(task: str, seed: int = 0, **kwargs) -> RawDataset:
    gens = {"sin": gen_sin, "module": gen_module, "moons": gen_moons}
    if task not in gens:
        raise DataError(f"unknown task {task!r}")
    return gens[task](seed=seed, **kwargs)


DEFAULT_TRAIN_FRACTION = {"sin": 0.75, "module": 0.75, "moons": 0.4}


def _minmax_to_unit_interval(values, lo, hi):
    return 2.0 * (values - lo) / (hi - lo) - 1.0


def fit_scale_split(raw: RawDataset, train_fraction: float,
                    seed: int = 0) -> PreparedDataset:
    """Random split, then min-max scale to [-1, 1] fitted on train only.

    Regression targets are scaled with their own train-fitted map; scaled
    regression features are clamped to the arcsin-safe interval [-1, 1]
    (the clamp can only fire on test points) and the event count recorded.
    """
    n = raw.features.shape[0]
    n_train = int(round(train_fraction * n))
    if n_train < 1 or n - n_train < 1:
        raise DataError("split leaves an empty train or test side")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:])

    fmin = raw.features[train_idx].min(axis=0)
    fmax = raw.features[train_idx].max(axis=0)
    if np.any(fmax - fmin == 0):
        raise DataError("degenerate feature: min equals max on train split")
    feats = _minmax_to_unit_interval(raw.features, fmin, fmax)

    clamp_count = 0
    tmin = tmax = None
    if raw.task == "moons":
        targets = raw.targets.copy()
        bound = 2.0  # the embedding divides features by 2
    else:
        tmin = float(raw.targets[train_idx].min())
        tmax = float(raw.targets[train_idx].max())
        if tmax - tmin == 0:
            raise DataError("degenerate target: min equals max on train split")
        targets = _minmax_to_unit_interval(raw.targets, tmin, tmax)
        bound = 1.0
    clamp_count = int(np.count_nonzero(np.abs(feats) > bound))
    feats = np.clip(feats, -bound, bound)

    return PreparedDataset(
        task=raw.task, features_raw=raw.features, targets_raw=raw.targets,
        features=feats, targets=targets, train_idx=train_idx,
        test_idx=test_idx, feature_min=fmin, feature_max=fmax,
        target_min=tmin, target_max=tmax, clamp_count=clamp_count)


def prepare(task: str, data_seed: int = 0, split_seed: int = 1,
            **kwargs) -> PreparedDataset:
    """Generate, split and scale one task dataset with its default sizes."""
    raw = generate(task, seed=data_seed, **kwargs)
    return fit_scale_split(raw, DEFAULT_TRAIN_FRACTION[task], seed=split_seed)


def load_csv(text: str, task: str) -> PreparedDataset:
    """Reload a dataset written by :meth:`PreparedDataset.to_csv`.

    The stored features are already scaled; the scaler parameters are not
    recoverable from the file and are reloaded as the identity map.
    """
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    d = len(header) - 2
    feats, ys, splits = [], [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        feats.append([float(c) for c in cells[:d]])
        ys.append(float(cells[d]))
        splits.append(cells[d + 1])
    feats = np.asarray(feats)
    ys = np.asarray(ys)
    train_idx = np.array([i for i, s in enumerate(splits) if s == "train"])
    test_idx = np.array([i for i, s in enumerate(splits) if s == "test"])
    return PreparedDataset(
        task=task, features_raw=feats, targets_raw=ys, features=feats,
        targets=ys, train_idx=train_idx, test_idx=test_idx,
        feature_min=-np.ones(d), feature_max=np.ones(d),
        target_min=None, target_max=None, clamp_count=0)
