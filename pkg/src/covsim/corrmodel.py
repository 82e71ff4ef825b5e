"""Exponential-correlation covariance model and the aggregate pilot matrix Q."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import AntennaLayout

__all__ = [
    "PSD_TOL",
    "CorrelationParams",
    "exp_correlation_matrix",
    "kronecker_covariance",
    "layout_covariance",
    "build_q",
    "is_hermitian",
    "is_psd",
]

PSD_TOL = 1e-10


@dataclass(frozen=True)
class CorrelationParams:
    """Correlation factors and angles of arrival of one BS-UE link."""

    r_h: float
    r_v: float
    theta_h: float
    theta_v: float

    def __post_init__(self):
        for name in ("r_h", "r_v"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name}={r} outside [0, 1]")


def _check_factor(r: float) -> None:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"correlation factor {r} outside [0, 1]")


def _exp_entries(d: np.ndarray, r: float, theta: float) -> np.ndarray:
    # 0**0 == 1 keeps the diagonal at one when r == 0.
    return np.power(float(r), np.abs(d)) * np.exp(1j * d * theta)


def exp_correlation_matrix(n: int, r: float, theta: float) -> np.ndarray:
    """Toeplitz matrix with entry ``(m, k) = r**|k-m| * exp(j (k-m) theta)``."""
    if n < 1:
        raise ValueError("dimension must be positive")
    _check_factor(r)
    idx = np.arange(n)
    return _exp_entries(idx[None, :] - idx[:, None], r, theta)


def kronecker_covariance(r_v: np.ndarray, r_h: np.ndarray) -> np.ndarray:
    """Combine elevation (M x M) and azimuth (N x N) covariances.

    With antennas numbered ``p = x * M + y`` the row index is the fast one,
    so the product is taken as ``r_h (x) r_v``: entry ``(p, q)`` equals
    ``r_h[x_p, x_q] * r_v[y_p, y_q]``.
    """
    r_v = np.atleast_2d(np.asarray(r_v, dtype=complex))
    r_h = np.atleast_2d(np.asarray(r_h, dtype=complex))
    return np.kron(r_h, r_v)


def layout_covariance(layout: AntennaLayout, params: CorrelationParams) -> np.ndarray:
    """Model covariance of a link for any lattice layout.

    Entry ``(p, q)`` is ``r_h**|dx| e^{j dx theta_h} * r_v**|dy| e^{j dy theta_v}``
    with ``(dx, dy) = coord(q) - coord(p)``. For ULA/UPA this equals
    :func:`kronecker_covariance` of the two exponential factors.
    """
    if layout.is_grid:
        r_v = exp_correlation_matrix(layout.m_rows, params.r_v, params.theta_v)
        r_h = exp_correlation_matrix(layout.n_cols, params.r_h, params.theta_h)
        return kronecker_covariance(r_v, r_h)
    pos = layout.positions()
    dx = pos[None, :, 0] - pos[:, None, 0]
    dy = pos[None, :, 1] - pos[:, None, 1]
    return (_exp_entries(dx, params.r_h, params.theta_h)
            * _exp_entries(dy, params.r_v, params.theta_v))


def build_q(r_list: Sequence[np.ndarray], snr_weights: Sequence[float],
            noise_scale: float) -> np.ndarray:
    """``sum_k w_k R_k + noise_scale * I``.

    For the observation normalized by the serving-link SNR, the weights are
    ``rho_lk / rho_ll`` and ``noise_scale`` is ``1 / rho_ll``.
    """
    if len(r_list) == 0 or len(r_list) != len(snr_weights):
        raise ValueError("need one weight per covariance matrix")
    n = np.shape(r_list[0])[0]
    q = np.zeros((n, n), dtype=complex)
    for r, w in zip(r_list, snr_weights):
        r = np.asarray(r)
        if r.shape != (n, n):
            raise ValueError(f"dimension mismatch: {r.shape} vs {(n, n)}")
        if w <= 0:
            raise ValueError("SNR weights must be positive")
        q += w * r
    q[np.diag_indices(n)] += noise_scale
    return q


def is_hermitian(a: np.ndarray, tol: float = 0.0) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_psd(a: np.ndarray, tol: float = PSD_TOL) -> bool:
    """Smallest eigenvalue >= -tol * largest |eigenvalue|."""
    ev = np.linalg.eigvalsh(a)
    scale = max(np.max(np.abs(ev)), 1.0e-300)
    return bool(ev[0] >= -tol * scale)
