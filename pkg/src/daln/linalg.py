"""Dense SVD (one-sided Jacobi) and matrix norms.

Nothing here knows about the autodiff tape; inputs and outputs are plain
float64 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_SWEEPS = 100
OFF_DIAG_TOL = 1e-12


class NonFiniteInput(FloatingPointError, ValueError):
    pass


class SvdConvergenceError(ArithmeticError):
    def __init__(self, sweeps: int, off_diag: float):
        super().__init__(f"one-sided Jacobi SVD did not converge after {sweeps} sweeps "
                         f"(largest scaled off-diagonal {off_diag:.3e})")
        self.sweeps = sweeps
        self.off_diag = off_diag


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``z = u @ diag(s) @ v.T`` with ``r = min(b, k)``."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def _complete_basis(q: np.ndarray, filled: np.ndarray) -> np.ndarray:
    """Replace the columns of ``q`` not flagged in ``filled`` by orthonormal
    vectors orthogonal to the flagged ones."""
    m = q.shape[0]
    basis = [q[:, j] for j in range(q.shape[1]) if filled[j]]
    candidates = iter(np.eye(m))
    for j in range(q.shape[1]):
        if filled[j]:
            continue
        while True:
            e = next(candidates)
            w = e.copy()
            for _ in range(2):
                for b in basis:
                    w -= (b @ w) * b
            n = np.linalg.norm(w)
            if n > 1e-8:
                break
        w /= n
        q[:, j] = w
        basis.append(w)
    return q


def _jacobi_tall(a: np.ndarray) -> SvdResult:
    """One-sided Jacobi on a matrix with at least as many rows as columns."""
    a = a.copy()
    n = a.shape[1]
    v = np.eye(n)
    # columns below this squared norm are numerically zero and never rotated
    negligible = (np.finfo(float).eps * np.linalg.norm(a)) ** 2
    for sweep in range(1, MAX_SWEEPS + 1):
        worst = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                ai = a[:, i]
                aj = a[:, j]
                alpha = ai @ ai
                beta = aj @ aj
                gamma = ai @ aj
                if gamma == 0.0 or alpha <= negligible or beta <= negligible:
                    continue
                off = abs(gamma) / (np.sqrt(alpha) * np.sqrt(beta))
                if off <= OFF_DIAG_TOL:
                    continue
                worst = max(worst, off)
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_i = c * ai - s * aj
                new_j = s * ai + c * aj
                a[:, i] = new_i
                a[:, j] = new_j
                vi = v[:, i].copy()
                vj = v[:, j]
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if worst == 0.0:
            break
    else:
        raise SvdConvergenceError(MAX_SWEEPS, worst)

    sigma = np.sqrt(np.sum(a * a, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]

    scale = sigma[0] if sigma.size and sigma[0] > 0 else 1.0
    nonzero = sigma > scale * 1e-14
    u = np.zeros_like(a)
    u[:, nonzero] = a[:, nonzero] / sigma[nonzero]
    sigma = np.where(nonzero, sigma, 0.0)
    if not np.all(nonzero):
        u = _complete_basis(u, nonzero)
    return SvdResult(u=u, s=sigma, v=v)


def _fix_signs(res: SvdResult) -> SvdResult:
    u = res.u.copy()
    v = res.v.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        # first index among ties keeps this deterministic
        if col[np.argmax(np.abs(col))] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return SvdResult(u=u, s=res.s, v=v)


def svd(z) -> SvdResult:
    """Thin SVD by one-sided Jacobi rotations.

    Singular values come back sorted nonincreasing; each column of ``u`` has
    its largest-magnitude entry positive.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"svd expects a 2-D array, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("svd input contains non-finite entries")
    b, k = z.shape
    if b >= k:
        res = _jacobi_tall(z)
    else:
        t = _jacobi_tall(z.T)
        res = SvdResult(u=t.v, s=t.s, v=t.u)
    return _fix_signs(res)


def singular_values(z) -> np.ndarray:
    return svd(z).s


def nuclear(z) -> float:
    return float(svd(z).s.sum())


def spectral_norm(w) -> float:
    return float(svd(w).s[0])


def frobenius(w) -> float:
    w = np.asarray(w, dtype=np.float64)
    return float(np.sqrt(np.sum(w * w)))
