"""MMSE channel estimation, estimate covariance and normalized MSE."""

from __future__ import annotations

from typing import Iterable

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "COND_LIMIT",
    "SingularMatrixError",
    "HermitianSolver",
    "mmse_estimate",
    "error_covariance",
    "normalized_mse",
]

COND_LIMIT = 1e12


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is singular or its condition number exceeds :data:`COND_LIMIT`."""


class HermitianSolver:
    """Bunch-Kaufman (LDL^H) factorization of a Hermitian, possibly indefinite matrix.

    The condition number is estimated from the factorization in the
    1-norm and checked against ``cond_limit`` up front, so a
    near-singular covariance estimate is rejected before it is used.
    """

    def __init__(self, a: np.ndarray, cond_limit: float = COND_LIMIT):
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        self.n = a.shape[0]
        anorm = np.max(np.sum(np.abs(a), axis=0), initial=0.0)
        if not np.isfinite(anorm):
            raise SingularMatrixError("matrix has non-finite entries")
        if anorm == 0.0:
            raise SingularMatrixError("zero matrix")
        ldu, ipiv, info = lapack.zhetrf(a, lower=1)
        if info > 0:
            raise SingularMatrixError("exactly singular matrix")
        rcond, info = lapack.zhecon(ldu, ipiv, anorm, lower=1)
        if info != 0 or rcond * cond_limit < 1.0:
            raise SingularMatrixError(f"condition number ~{1.0 / max(rcond, 1e-300):.3g}")
        self._ldu, self._ipiv = ldu, ipiv
        self.rcond = float(rcond)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        x, info = lapack.zhetrs(self._ldu, self._ipiv, b.reshape(self.n, -1), lower=1)
        if info != 0:
            raise SingularMatrixError(f"zhetrs failed (info={info})")
        return x.reshape(b.shape)


def _solver(q) -> HermitianSolver:
    return q if isinstance(q, HermitianSolver) else HermitianSolver(q)


def mmse_estimate(r_hat: np.ndarray, q_hat, y: np.ndarray) -> np.ndarray:
    """``R_hat Q_hat^{-1} y`` by a linear solve.

    ``q_hat`` may be a matrix or an existing :class:`HermitianSolver`;
    ``y`` may hold several snapshots as columns.
    """
    return np.asarray(r_hat) @ _solver(q_hat).solve(y)


def error_covariance(r: np.ndarray, q) -> np.ndarray:
    """Covariance of the MMSE estimate, ``Phi = R Q^{-1} R``, made exactly Hermitian."""
    r = np.asarray(r, dtype=complex)
    phi = r @ _solver(q).solve(r)
    return 0.5 * (phi + phi.conj().T)


def normalized_mse(pairs: Iterable[tuple[np.ndarray, np.ndarray]],
                   r_true: np.ndarray) -> float:
    """Mean of ``||g - g_hat||^2`` over ``(g, g_hat)`` pairs, divided by ``tr(R)``."""
    errs = [np.vdot(g - gh, g - gh).real for g, gh in pairs]
    if not errs:
        raise ValueError("need at least one (g, g_hat) pair")
    return float(np.mean(errs) / np.trace(r_true).real)
