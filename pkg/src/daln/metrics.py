"""Diagnostics: prediction self-correlation, accuracy, determinacy, diversity,
proxy A-distance and RBF maximum mean discrepancy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import stream

SIMPLEX_TOL = 1e-9
MMD_BANDWIDTH_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class SelfCorrelation:
    """``r = Z.T @ Z`` split into diagonal mass ``i_a`` and off-diagonal mass ``i_e``."""

    r: np.ndarray
    i_a: float
    i_e: float
    batch: int


@dataclass
class MetricsReport:
    epoch: int
    accuracy: float
    per_class_recall: list[float]
    confusion: list[list[int]]
    per_class_correct: list[int]
    determinacy_ratio: float
    l_cls: float = float("nan")
    l_nwd: float = float("nan")
    mmd: float = float("nan")
    a_distance: float = float("nan")
    i_a_src: float = float("nan")
    i_e_src: float = float("nan")
    i_a_tgt: float = float("nan")
    i_e_tgt: float = float("nan")
    extras: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, line: str) -> "MetricsReport":
        return cls(**json.loads(line))


def _check_simplex(z: np.ndarray, what: str = "predictions") -> None:
    if z.ndim != 2:
        raise ValueError(f"{what} must be 2-D, got shape {z.shape}")
    if np.any(z < -SIMPLEX_TOL) or np.any(np.abs(z.sum(axis=1) - 1.0) > SIMPLEX_TOL):
        raise ValueError(f"{what} rows must lie on the probability simplex")


def self_correlation(z) -> SelfCorrelation:
    z = np.asarray(z, dtype=np.float64)
    _check_simplex(z)
    r = z.T @ z
    i_a = float(np.trace(r))
    i_e = float(r.sum() - i_a)
    return SelfCorrelation(r=r, i_a=i_a, i_e=i_e, batch=z.shape[0])


def _labels(labels, n: int, k: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    bad = np.flatnonzero((y < 0) | (y >= k))
    if bad.size:
        raise ValueError(f"label {y[bad[0]]} at index {bad[0]} outside [0, {k})")
    return y.astype(np.int64)


def confusion_and_accuracy(preds, labels):
    """Return ``(confusion, accuracy, per_class_recall)``; confusion rows are true classes.

    Recall of a class with no samples is reported as 0.
    """
    preds = np.asarray(preds, dtype=np.float64)
    n, k = preds.shape
    y = _labels(labels, n, k)
    yhat = preds.argmax(axis=1)  # first maximum wins ties
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, yhat), 1)
    accuracy = float(np.trace(confusion) / n)
    support = confusion.sum(axis=1)
    recall = np.divide(np.diag(confusion), support, out=np.zeros(k), where=support > 0)
    return confusion, accuracy, recall


def determinacy_ratio(preds, labels, low: float = 0.9) -> float:
    """Fraction of correctly classified samples whose winning probability is at least ``low``."""
    preds = np.asarray(preds, dtype=np.float64)
    _check_simplex(preds)
    y = _labels(labels, *preds.shape)
    correct = preds.argmax(axis=1) == y
    if not correct.any():
        return 0.0
    return float(np.mean(preds[correct].max(axis=1) >= low))


def per_class_correct(preds, labels) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    n, k = preds.shape
    y = _labels(labels, n, k)
    hits = preds.argmax(axis=1) == y
    return np.bincount(y[hits], minlength=k)


def _logistic_fit(x, t, iters=500, step=0.1, l2=1e-4):
    w = np.zeros(x.shape[1])
    b = 0.0
    n = x.shape[0]
    for _ in range(iters):
        z = x @ w + b
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        r = p - t
        w -= step * (x.T @ r / n + l2 * w)
        b -= step * r.mean()
    return w, b


def proxy_a_distance(feat_s, feat_t, folds: int = 2, seed: int = 0) -> float:
    """``2 * (1 - 2 * err)`` for a cross-validated logistic domain probe, clipped to [0, 2].

    Features are standardized with the training fold's statistics before
    fitting the probe.
    """
    feat_s = np.asarray(feat_s, dtype=np.float64)
    feat_t = np.asarray(feat_t, dtype=np.float64)
    if len(feat_s) == 0 or len(feat_t) == 0:
        raise ValueError("proxy A-distance needs nonempty feature sets")
    x = np.vstack([feat_s, feat_t])
    t = np.concatenate([np.zeros(len(feat_s)), np.ones(len(feat_t))])
    n = len(x)
    if folds < 2 or n < 2 * folds:
        raise ValueError(f"{n} samples cannot fill {folds} folds of at least two samples")
    order = stream(seed, "probe").permutation(n)
    errors = 0
    for held in np.array_split(order, folds):
        train = np.setdiff1d(order, held, assume_unique=True)
        mu = x[train].mean(axis=0)
        sd = x[train].std(axis=0)
        sd[sd == 0] = 1.0
        w, b = _logistic_fit((x[train] - mu) / sd, t[train])
        pred = ((x[held] - mu) / sd) @ w + b > 0
        errors += int(np.sum(pred != (t[held] == 1)))
    err = errors / n
    return float(np.clip(2.0 * (1.0 - 2.0 * err), 0.0, 2.0))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def default_bandwidths(feat_s, feat_t) -> np.ndarray:
    pooled = np.vstack([feat_s, feat_t])
    d = _sq_dists(pooled, pooled)
    med = float(np.median(d[np.triu_indices(len(pooled), k=1)]))
    if med <= 0:
        med = 1.0
    return med * np.asarray(MMD_BANDWIDTH_FACTORS)


def mmd_rbf(feat_s, feat_t, bandwidths=None, biased: bool = False) -> float:
    """Squared MMD with kernel ``sum_h exp(-|x - y|^2 / h)`` over the bandwidth set.

    The unbiased form excludes i == j pairs within each domain; for equal
    sample sizes it also excludes the paired cross terms, so identical inputs
    give exactly zero.
    """
    xs = np.asarray(feat_s, dtype=np.float64)
    xt = np.asarray(feat_t, dtype=np.float64)
    m, n = len(xs), len(xt)
    if min(m, n) < 2:
        raise ValueError("MMD needs at least two samples per domain")
    hs = default_bandwidths(xs, xt) if bandwidths is None else np.asarray(bandwidths, dtype=np.float64)
    dss, dtt, dst = _sq_dists(xs, xs), _sq_dists(xt, xt), _sq_dists(xs, xt)
    kss = sum(np.exp(-dss / h) for h in hs)
    ktt = sum(np.exp(-dtt / h) for h in hs)
    kst = sum(np.exp(-dst / h) for h in hs)
    if biased:
        return float(kss.mean() + ktt.mean() - 2.0 * kst.mean())
    term_s = (kss.sum() - np.trace(kss)) / (m * (m - 1))
    term_t = (ktt.sum() - np.trace(ktt)) / (n * (n - 1))
    if m == n:
        cross = 2.0 * (kst.sum() - np.trace(kst)) / (m * (m - 1))
    else:
        cross = 2.0 * kst.mean()
    return float(term_s + term_t - cross)
