"""Correlated channel draws, two-slot pilot observations and sample covariances.

All randomness comes from an explicit :class:`numpy.random.Generator`.

The harness does not materialize ``N_p`` snapshots per trial. It draws the
sample covariance directly with :func:`wishart_sample`, which has exactly
the distribution of ``Y Y^H / N_p`` for i.i.d. ``CN(0, Q)`` columns at
``O(N_t^3)`` cost instead of ``O(N_t^2 N_p)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corrmodel import PSD_TOL

__all__ = [
    "PilotObservation",
    "complex_normal",
    "psd_sqrt",
    "draw_channel",
    "observe_uplink",
    "sample_q",
    "sample_r",
    "wishart_sample",
]


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples, ``E|z|^2 = 1``."""
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return (z[0] + 1j * z[1]) * np.sqrt(0.5)


def psd_sqrt(r: np.ndarray) -> np.ndarray:
    """Factor ``A`` with ``A A^H = r`` for a Hermitian PSD ``r``.

    Cholesky when ``r`` is positive definite, otherwise a spectral square
    root with round-off negatives clipped. Raises ``ValueError`` when ``r``
    has an eigenvalue below ``-1e-10`` times its largest one.
    """
    r = np.asarray(r, dtype=complex)
    try:
        return np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        pass
    ev, vec = np.linalg.eigh(r)
    scale = np.max(np.abs(ev), initial=0.0)
    if scale > 0 and ev[0] < -PSD_TOL * scale:
        raise ValueError(f"matrix is not PSD (min eigenvalue {ev[0]:.3g})")
    return vec * np.sqrt(np.clip(ev, 0.0, None))


def draw_channel(r: np.ndarray, rng: np.random.Generator, size: int | None = None,
                 sqrt: np.ndarray | None = None) -> np.ndarray:
    """Draw ``g ~ CN(0, r)``; with ``size`` return an ``(n, size)`` matrix of draws.

    Pass a precomputed ``sqrt`` (from :func:`psd_sqrt`) to skip the factorization.
    """
    a = psd_sqrt(r) if sqrt is None else sqrt
    n = a.shape[0]
    if size is None:
        return a @ complex_normal(rng, n)
    return a @ complex_normal(rng, (n, size))


@dataclass(frozen=True)
class PilotObservation:
    """Pilot snapshots of one BS, normalized by the serving-link SNR.

    ``y_all`` holds slot-1 columns (every UE transmits), ``y_neighbors``
    slot-2 columns (the serving UE is silent).
    """

    y_all: np.ndarray
    y_neighbors: np.ndarray

    def __post_init__(self):
        if self.y_all.ndim != 2 or self.y_all.shape != self.y_neighbors.shape:
            raise ValueError("both slots must be N_t x N_p matrices of equal shape")
        if self.y_all.shape[1] < 1:
            raise ValueError("need at least one pilot snapshot")

    @property
    def n_p(self) -> int:
        return self.y_all.shape[1]


def observe_uplink(r_list: Sequence[np.ndarray], snr_ul: Sequence[float], n_p: int,
                   rng: np.random.Generator, serving: int = 0,
                   sqrt_list: Sequence[np.ndarray] | None = None) -> PilotObservation:
    """Simulate both pilot slots at one BS.

    ``r_list[k]`` is the covariance of UE ``k``'s channel to this BS and
    ``snr_ul[k]`` the linear UL SNR; ``serving`` picks the BS's own UE.
    Every column gets fresh fading and noise. Columns are
    ``sum_k sqrt(rho_k / rho_serving) g_k + n / sqrt(rho_serving)``, and
    slot 2 omits the serving UE.
    """
    if n_p < 1:
        raise ValueError("n_p must be >= 1")
    rho = np.asarray(snr_ul, dtype=float)
    if len(r_list) != len(rho):
        raise ValueError("need one SNR per link")
    sqrts = [psd_sqrt(r) for r in r_list] if sqrt_list is None else sqrt_list
    n_t = sqrts[0].shape[0]
    amp = np.sqrt(rho / rho[serving])
    noise_amp = 1.0 / np.sqrt(rho[serving])

    def slot(include_serving: bool) -> np.ndarray:
        y = noise_amp * complex_normal(rng, (n_t, n_p))
        for k, a in enumerate(sqrts):
            if k == serving and not include_serving:
                continue
            y += amp[k] * (a @ complex_normal(rng, (n_t, n_p)))
        return y

    y_all = slot(True)
    return PilotObservation(y_all, slot(False))


def _gram(y: np.ndarray) -> np.ndarray:
    s = y @ y.conj().T / y.shape[1]
    # The product is Hermitian up to round-off; make it exact.
    return 0.5 * (s + s.conj().T)


def sample_q(obs: PilotObservation) -> np.ndarray:
    """``Y Y^H / N_p`` over slot-1 snapshots."""
    return _gram(obs.y_all)


def sample_r(obs: PilotObservation) -> np.ndarray:
    """Slot-1 sample covariance minus the slot-2 one; Hermitian, maybe indefinite."""
    return sample_q(obs) - _gram(obs.y_neighbors)


def wishart_sample(sqrt_q: np.ndarray, n_p: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a sample covariance of ``n_p`` i.i.d. ``CN(0, Q)`` snapshots.

    ``sqrt_q`` is any factor with ``sqrt_q sqrt_q^H = Q``. For ``n_p >= N_t``
    the complex Bartlett decomposition is used: ``W = T T^H`` with ``T``
    lower triangular, ``|T_ii|^2 ~ Gamma(n_p - i, 1)`` and ``CN(0, 1)``
    entries below the diagonal. Smaller ``n_p`` (a singular Wishart)
    falls back to explicit snapshots, which are cheaper there anyway.
    """
    n_t = sqrt_q.shape[0]
    if n_p < 1:
        raise ValueError("n_p must be >= 1")
    if n_p < n_t:
        b = sqrt_q @ complex_normal(rng, (n_t, n_p))
    else:
        t = np.tril(complex_normal(rng, (n_t, n_t)), -1)
        t[np.diag_indices(n_t)] = np.sqrt(rng.gamma(n_p - np.arange(n_t)))
        b = sqrt_q @ t
    s = b @ b.conj().T / n_p
    return 0.5 * (s + s.conj().T)
