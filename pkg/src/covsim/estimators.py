"""Covariance post-processing: viaQ shrinkage and layout-aware (ALA) averaging.

The ALA estimators replace every entry of a sample covariance by the mean
of all entries whose antenna pairs have the same displacement. The
operation is an orthogonal projection onto translation-invariant matrices:
linear, idempotent, trace- and Hermitian-preserving, and ``O(N_t^2)``.
"""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from .geometry import AntennaLayout, ClassPartition, LayoutError, pair_partition
from .sampling import PilotObservation, sample_q, sample_r

__all__ = [
    "EstimatorKind",
    "viaq",
    "optimal_kappa",
    "kappa_terms",
    "kappa_from_terms",
    "ala_ula",
    "ala_upa",
    "ala_generic",
    "ala",
    "class_average",
    "estimate_pair",
]


class EstimatorKind(str, enum.Enum):
    IDEAL = "ideal"
    SAMPLE = "sample"
    VIAQ = "viaq"
    ALA = "ala"

    @classmethod
    def parse(cls, value: "str | EstimatorKind") -> "EstimatorKind":
        try:
            return cls(str(getattr(value, "value", value)).lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown estimator {value!r}; choose from {choices}") from None


def _square(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    return x


def viaq(q_sample: np.ndarray, kappa: float) -> np.ndarray:
    """Shrink toward the diagonal: ``(1 - kappa) Q + kappa diag(Q)``."""
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa={kappa} outside [0, 1]")
    q = _square(q_sample)
    out = (1.0 - kappa) * q
    idx = np.diag_indices(q.shape[0])
    out[idx] = q[idx]
    return out


def _offdiag(x: np.ndarray) -> np.ndarray:
    out = np.array(x, dtype=complex)
    np.fill_diagonal(out, 0.0)
    return out


def optimal_kappa(q_sample_trials: Sequence[np.ndarray], q_true: np.ndarray) -> float:
    """Frobenius-optimal shrinkage weight, averaged over sample matrices.

    ``viaq(S, k) - Q = (S - Q) - k * offdiag(S)``, so the mean squared
    Frobenius error is quadratic in ``k`` and minimized at
    ``sum Re<S - Q, offdiag(S)> / sum ||offdiag(S)||^2``, clamped to [0, 1].
    Requires the true matrix, so it serves as an oracle-tuned baseline.
    """
    num, den = kappa_terms(q_sample_trials, q_true)
    return kappa_from_terms(num, den)


def kappa_terms(q_sample_trials: Sequence[np.ndarray], q_true: np.ndarray) -> tuple[float, float]:
    """Accumulated numerator and denominator of :func:`optimal_kappa`.

    Sums from several batches can be added before calling
    :func:`kappa_from_terms` to pool them into one weight.
    """
    if len(q_sample_trials) == 0:
        raise ValueError("need at least one sample matrix")
    num = den = 0.0
    for s in q_sample_trials:
        o = _offdiag(s)
        num += np.vdot(o, np.asarray(s) - q_true).real
        den += np.vdot(o, o).real
    return float(num), float(den)


def kappa_from_terms(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0
    return float(np.clip(num / den, 0.0, 1.0))


def class_average(x: np.ndarray, part: ClassPartition) -> np.ndarray:
    """Replace each entry by the mean of its class; one pass over the matrix."""
    x = _square(x)
    if x.shape != part.labels.shape:
        raise LayoutError(f"matrix {x.shape} does not match layout {part.labels.shape}")
    lab = part.labels.ravel()
    flat = x.ravel()
    n = part.n_classes
    sums = np.bincount(lab, weights=flat.real, minlength=n).astype(complex)
    if np.iscomplexobj(x):
        sums += 1j * np.bincount(lab, weights=flat.imag, minlength=n)
    return (sums / part.counts)[part.labels]


def ala_ula(q_sample: np.ndarray) -> np.ndarray:
    """Average along each diagonal; the output is Toeplitz."""
    q = _square(q_sample)
    return class_average(q, pair_partition(AntennaLayout.ula(q.shape[0])))


def ala_upa(q_sample: np.ndarray, layout: AntennaLayout) -> np.ndarray:
    """Average over pairs with equal 2-D displacement on a column-major panel."""
    if not layout.is_grid:
        raise LayoutError("ala_upa needs a ULA/UPA layout")
    return class_average(q_sample, pair_partition(layout))


def ala_generic(q_sample: np.ndarray, coords: Sequence[Sequence[int]]) -> np.ndarray:
    """Class averaging for arbitrary lattice coordinates (``coords[p]`` = antenna p)."""
    return class_average(q_sample, pair_partition(AntennaLayout.generic(coords)))


def ala(q_sample: np.ndarray, layout: AntennaLayout) -> np.ndarray:
    """Dispatch to the ALA estimator matching ``layout``."""
    return class_average(q_sample, pair_partition(layout))


def estimate_pair(obs, kind: EstimatorKind, layout: AntennaLayout | None = None,
                  truth: tuple[np.ndarray, np.ndarray] | None = None,
                  kappa: tuple[float, float] | None = None):
    """Apply one estimator to both sample matrices; returns ``(R_hat, Q_hat)``.

    ``obs`` is a :class:`~covsim.sampling.PilotObservation` or an already
    computed ``(R_sample, Q_sample)`` pair. ``truth`` is ``(R, Q)`` and is
    required for ``IDEAL``. ``kappa`` is the ``(kappa_R, kappa_Q)`` pair for
    ``VIAQ``, fitted beforehand with :func:`optimal_kappa`. ``ALA`` needs
    ``layout``.
    """
    kind = EstimatorKind.parse(kind)
    if kind is EstimatorKind.IDEAL:
        if truth is None:
            raise ValueError("the ideal estimator needs the true matrices")
        return truth
    if isinstance(obs, PilotObservation):
        r_sample, q_sample = sample_r(obs), sample_q(obs)
    else:
        r_sample, q_sample = obs
    if kind is EstimatorKind.SAMPLE:
        return r_sample, q_sample
    if kind is EstimatorKind.VIAQ:
        if kappa is None:
            raise ValueError("viaQ needs fitted (kappa_R, kappa_Q)")
        return viaq(r_sample, kappa[0]), viaq(q_sample, kappa[1])
    if layout is None:
        raise ValueError("ALA needs the antenna layout")
    part = pair_partition(layout)
    return class_average(r_sample, part), class_average(q_sample, part)
