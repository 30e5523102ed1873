"""Seeded property suites with independent oracles.

Each suite returns a :class:`CheckResult`.  The oracles here deliberately
avoid the code paths they check: gradients are compared with central finite
differences, singular values with a two-sided Jacobi eigensolver applied to
the Gram matrix, and the Lipschitz bounds are evaluated explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import linalg, metrics

FD_STEP = 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


# -- oracles ------------------------------------------------------------------

def finite_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = f(x)
        x[idx] = old - h
        down = f(x)
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def jacobi_eigvalsh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations, ascending."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(np.sqrt(np.sum(a * a)), 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))


def gram_singular_values(z: np.ndarray) -> np.ndarray:
    """Singular values as square roots of the eigenvalues of the smaller Gram matrix, descending."""
    z = np.asarray(z, dtype=np.float64)
    gram = z.T @ z if z.shape[0] >= z.shape[1] else z @ z.T
    return np.sqrt(np.clip(jacobi_eigvalsh(gram), 0, None))[::-1]


def random_simplex(rng: np.random.Generator, b: int, k: int) -> np.ndarray:
    z = rng.exponential(size=(b, k)) ** rng.uniform(0.2, 4.0)
    return z / z.sum(axis=1, keepdims=True)


def random_gapped(rng: np.random.Generator, b: int = 6, k: int = 4, gap: float = 0.1) -> np.ndarray:
    """Random ``b x k`` matrix whose singular values are >= ``gap`` and pairwise >= ``gap`` apart."""
    while True:
        z = rng.normal(size=(b, k))
        s = np.linalg.svd(z, compute_uv=False)
        if s[-1] >= gap and np.all(-np.diff(s) >= gap):
            return z


def tape_gradient(op: Callable[[ad.Node], ad.Node], x: np.ndarray, weights: np.ndarray | None = None):
    """Value and gradient of ``sum(weights * op(x))`` through the tape."""
    tape = ad.Tape()
    xn = tape.variable(x)
    out = op(xn)
    if weights is not None:
        out = ad.hadamard(out, tape.constant(weights))
    loss = ad.sum_all(out)
    tape.backward(loss)
    return loss.item(), xn.grad.copy()


def _projected(op, weights):
    def f(x):
        tape = ad.Tape()
        out = op(tape.constant(x)).value
        return float(np.sum(out * weights)) if weights is not None else float(np.sum(out))
    return f


def op_gradient_error(op, x: np.ndarray, weights: np.ndarray | None = None) -> float:
    _, g = tape_gradient(op, x, weights)
    return relative_error(g, finite_difference(_projected(op, weights), x))


# -- suites -------------------------------------------------------------------

def check_op_gradients(seed: int = 0, trials: int = 5, tol: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    for _ in range(trials):
        b_mat = rng.normal(size=(4, 2))
        labels = rng.integers(0, 4, size=5)
        cases = {
            "matmul": (lambda x, b_mat=b_mat: ad.matmul(x, x.tape.constant(b_mat)), rng.normal(size=(3, 4))),
            "softmax_rows": (ad.softmax_rows, rng.normal(size=(4, 3)) * 2),
            "tanh": (ad.tanh, rng.normal(size=(4, 4))),
            "relu": (ad.relu, rng.choice([-1, 1], size=(4, 4)) * rng.uniform(0.1, 2, size=(4, 4))),
            "sigmoid": (ad.sigmoid, rng.normal(size=(3, 3)) * 3),
            "cross_entropy_rows": (lambda p, labels=labels: ad.cross_entropy_rows(p, labels),
                                   random_simplex(rng, 5, 4) * 0.9 + 0.025),
            "frobenius_norm": (ad.frobenius_norm, rng.normal(size=(5, 4))),
            "nuclear_norm": (ad.nuclear_norm, random_gapped(rng)),
        }
        for name, (op, x) in cases.items():
            w = rng.normal(size=op(ad.Tape().constant(x)).shape)
            err = op_gradient_error(op, x, w)
            worst[name] = max(worst.get(name, 0.0), err)
    failing = [n for n, e in worst.items() if e > tol]
    detail = ", ".join(f"{n}={e:.1e}" for n, e in worst.items())
    return CheckResult("op_gradients", not failing, detail if not failing else f"failing {failing}: {detail}")


def check_svd_gram_oracle(seed: int = 0, trials: int = 50, shape=(7, 4), tol: float = 1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_s = worst_rec = worst_orth = 0.0
    for _ in range(trials):
        z = rng.normal(size=shape)
        res = linalg.svd(z)
        worst_s = max(worst_s, np.max(np.abs(res.s - gram_singular_values(z))))
        worst_rec = max(worst_rec, np.max(np.abs(res.u * res.s @ res.v.T - z)) / max(1.0, np.max(np.abs(z))))
        r = len(res.s)
        worst_orth = max(worst_orth, np.max(np.abs(res.u.T @ res.u - np.eye(r))), np.max(np.abs(res.v.T @ res.v - np.eye(r))))
    ok = worst_s <= tol and worst_rec <= 1e-9 and worst_orth <= 1e-10
    return CheckResult("svd_gram_oracle", ok, f"sv={worst_s:.1e} recon={worst_rec:.1e} orth={worst_orth:.1e}")


def check_nuclear_norm_oracle(seed: int = 0, trials: int = 200) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_val = worst_grad = worst_rec = 0.0
    for _ in range(trials):
        z = random_gapped(rng)
        value, grad = tape_gradient(ad.nuclear_norm, z)
        worst_val = max(worst_val, abs(value - gram_singular_values(z).sum()))
        fd = finite_difference(lambda x: ad.nuclear_norm(ad.Tape().constant(x)).item(), z)
        worst_grad = max(worst_grad, relative_error(grad, fd))
        res = linalg.svd(z)
        worst_rec = max(worst_rec, np.max(np.abs(res.u * res.s @ res.v.T - z)))
    ok = worst_val <= 1e-8 and worst_grad <= 1e-5 and worst_rec <= 1e-9
    return CheckResult("nuclear_norm_oracle", ok, f"value={worst_val:.1e} grad={worst_grad:.1e} recon={worst_rec:.1e}")


def check_linear_lipschitz(seed: int = 0, trials: int = 1000) -> CheckResult:
    """|Wf1 + b - (Wf2 + b)| <= ||W||_2 |f1 - f2| <= ||W||_F |f1 - f2|."""
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(trials):
        k, d = rng.integers(1, 9, size=2)
        w = rng.normal(size=(k, d)) * rng.uniform(0.1, 5)
        bias = rng.normal(size=k)
        f1, f2 = rng.normal(size=(2, d)) * rng.uniform(0.1, 10)
        lhs = np.linalg.norm((w @ f1 + bias) - (w @ f2 + bias))
        dist = np.linalg.norm(f1 - f2)
        spectral = linalg.spectral_norm(w)
        fro = linalg.frobenius(w)
        slack = 1e-12 * max(1.0, fro * dist)
        if not (lhs <= spectral * dist + slack and spectral <= fro + 1e-12 and lhs <= fro * dist + slack):
            violations += 1
    return CheckResult("linear_lipschitz", violations == 0, f"{violations} violations in {trials}")


def softmax_jacobian(o: np.ndarray) -> np.ndarray:
    e = np.exp(o - o.max())
    p = e / e.sum()
    return np.diag(p) - np.outer(p, p)


def check_softmax_lipschitz(seed: int = 0, trials: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(2, 12))
        o = rng.normal(size=k) * rng.choice([0.1, 1.0, 10.0, 100.0])
        j = softmax_jacobian(o)
        # cross-check the analytic Jacobian against the taped backward rule
        tape = ad.Tape()
        x = tape.variable(o.reshape(1, -1))
        p = ad.softmax_rows(x)
        e0 = np.zeros((1, k))
        e0[0, 0] = 1.0
        tape.backward(ad.sum_all(ad.hadamard(p, tape.constant(e0))))
        if np.max(np.abs(x.grad[0] - j[0])) > 1e-12:
            violations += 1
        m = float(np.max(np.abs(j)))
        worst = max(worst, m)
        if m > 1.0:
            violations += 1
    return CheckResult("softmax_lipschitz", violations == 0, f"max |J_ij| = {worst:.4f}, {violations} violations")


def check_correlation_identities(seed: int = 0, trials: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_sum = worst_fro = 0.0
    for _ in range(trials):
        b, k = rng.integers(1, 40), rng.integers(2, 10)
        z = random_simplex(rng, b, k)
        sc = metrics.self_correlation(z)
        worst_sum = max(worst_sum, abs(sc.i_a + sc.i_e - b))
        worst_fro = max(worst_fro, abs(sc.i_a - linalg.frobenius(z) ** 2))
    ok = worst_sum <= 1e-9 and worst_fro <= 1e-9
    return CheckResult("correlation_identities", ok, f"|Ia+Ie-b|={worst_sum:.1e} |Ia-|Z|_F^2|={worst_fro:.1e}")


def check_norm_bounds(seed: int = 0, trials: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(trials):
        b, k = rng.integers(1, 12, size=2)
        z = rng.normal(size=(b, k)) if rng.random() < 0.5 else random_simplex(rng, b, k)
        fro = linalg.frobenius(z)
        nuc = linalg.nuclear(z)
        tol = 1e-12 * max(1.0, nuc)
        if not (fro <= nuc + tol and nuc <= np.sqrt(min(b, k)) * fro + tol):
            violations += 1
    return CheckResult("norm_bounds", violations == 0, f"{violations} violations in {trials}")


SUITES: dict[str, Callable[[], CheckResult]] = {
    "op_gradients": check_op_gradients,
    "svd_gram_oracle": check_svd_gram_oracle,
    "nuclear_norm_oracle": check_nuclear_norm_oracle,
    "linear_lipschitz": check_linear_lipschitz,
    "softmax_lipschitz": check_softmax_lipschitz,
    "correlation_identities": check_correlation_identities,
    "norm_bounds": check_norm_bounds,
}


def run_all() -> list[CheckResult]:
    results = []
    for name, suite in SUITES.items():
        try:
            results.append(suite())
        except Exception as exc:  # a crashing suite is a failing suite
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
