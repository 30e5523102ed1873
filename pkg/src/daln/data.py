"""Synthetic two-moons domains and CSV ingestion.

Randomness comes from :func:`stream`, which derives an independent PCG64
generator per (seed, purpose) pair so that, for example, changing the amount
of data shuffling never perturbs weight initialization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

STREAMS = {"init": 0, "data": 1, "shuffle": 2, "subsample": 3, "probe": 4}


def stream(seed: int, purpose: str) -> np.random.Generator:
    """PCG64 generator for one purpose, split from ``seed`` via SeedSequence."""
    if purpose not in STREAMS:
        raise KeyError(f"unknown random stream {purpose!r}; expected one of {sorted(STREAMS)}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(STREAMS[purpose],))))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None
    domain_tag: str
    class_count: int

    def __post_init__(self):
        f = self.features
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValueError(f"features must be a nonempty 2-D array, got shape {f.shape}")
        if self.domain_tag not in ("source", "target"):
            raise ValueError(f"domain_tag must be 'source' or 'target', got {self.domain_tag!r}")
        if self.labels is not None:
            y = self.labels
            if y.shape != (f.shape[0],):
                raise ValueError(f"expected {f.shape[0]} labels, got shape {y.shape}")
            if y.size and (y.min() < 0 or y.max() >= self.class_count):
                raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_sizes(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("dataset is unlabeled")
        return np.bincount(self.labels, minlength=self.class_count)

    def as_target(self) -> "Dataset":
        return replace(self, domain_tag="target")


def make_moons(n: int = 300, noise_sd: float = 0.1, seed: int = 0, domain_tag: str = "source") -> Dataset:
    """Two interleaved half circles: upper moon is class 0, lower moon class 1."""
    if n <= 0 or n % 2:
        raise ValueError(f"make_moons needs a positive even n, got {n}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be nonnegative, got {noise_sd}")
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    x = np.vstack([upper, lower])
    if noise_sd > 0:
        x = x + stream(seed, "data").normal(scale=noise_sd, size=x.shape)
    y = np.repeat(np.arange(2), half)
    return Dataset(x, y, domain_tag, 2)


def rotation_matrix(degrees: float) -> np.ndarray:
    a = np.deg2rad(degrees)
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def rotate(ds: Dataset, degrees: float, center=None) -> Dataset:
    """Rotate 2-D points counterclockwise about ``center`` (default: their centroid)."""
    if ds.dim != 2:
        raise ValueError(f"rotate needs 2-D points, got dimension {ds.dim}")
    if degrees % 360 == 0:
        return replace(ds, features=ds.features.copy())
    c = ds.features.mean(axis=0) if center is None else np.asarray(center, dtype=np.float64)
    x = (ds.features - c) @ rotation_matrix(degrees).T + c
    return replace(ds, features=x)


def subsample_class(ds: Dataset, class_id: int, keep: int, seed: int) -> Dataset:
    """Keep ``keep`` uniformly chosen members of ``class_id``; other rows untouched, order preserved."""
    if ds.labels is None:
        raise ValueError("subsample_class needs a labeled dataset")
    members = np.flatnonzero(ds.labels == class_id)
    if keep < 0 or keep > members.size:
        raise ValueError(f"cannot keep {keep} of {members.size} samples of class {class_id}")
    chosen = stream(seed, "subsample").choice(members, size=keep, replace=False)
    mask = ds.labels != class_id
    mask[chosen] = True
    return replace(ds, features=ds.features[mask], labels=ds.labels[mask])


def moons_domains(n: int = 300, noise_sd: float = 0.1, rotation_degrees: float = 30.0, seed: int = 0,
                  imbalanced_keep: int | None = None) -> tuple[Dataset, Dataset]:
    """Source moons and a rotated copy as target; optionally thin the target's upper moon."""
    source = make_moons(n, noise_sd, seed)
    target = rotate(source, rotation_degrees).as_target()
    if imbalanced_keep is not None:
        target = subsample_class(target, 0, imbalanced_keep, seed)
    return source, target


def boundary_grid(x_range, y_range, resolution: int) -> np.ndarray:
    """Row-major lattice of ``resolution**2`` points; y varies slowest."""
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, got {resolution}")
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def load_csv(path, has_labels: bool, k: int | None = None, domain_tag: str = "source") -> Dataset:
    """Read comma-separated floats; '#' lines are comments; last column is the label when present."""
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(rec)}")
            try:
                vals = [float(v) for v in rec]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if has_labels:
                lab = vals.pop()
                if lab != int(lab):
                    raise ValueError(f"{path}:{lineno}: label {lab} is not an integer")
                labels.append(int(lab))
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    x = np.array(rows, dtype=np.float64)
    if x.shape[1] == 0:
        raise ValueError(f"{path}: no feature columns")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{path}: non-finite feature values")
    y = None
    if has_labels:
        y = np.array(labels, dtype=np.int64)
        if k is None:
            k = int(y.max()) + 1
        bad = np.flatnonzero((y < 0) | (y >= k))
        if bad.size:
            raise ValueError(f"{path}: label {y[bad[0]]} on data row {bad[0] + 1} outside [0, {k})")
    elif k is None:
        raise ValueError("class count k is required for unlabeled data")
    return Dataset(x, y, domain_tag, int(k))


def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for i, row in enumerate(ds.features):
            rec = [repr(float(v)) for v in row]
            if ds.labels is not None:
                rec.append(str(int(ds.labels[i])))
            w.writerow(rec)
