"""Leakage-aware downlink precoding and the channel-hardening SINR bound.

For UE ``k`` served by BS ``k`` the bound is::

    gamma_k = rho_kk |E[g_kk^H w_k]|^2
              / (1 + rho_kk var[g_kk^H w_k] + sum_{l != k} rho_lk E|g_lk^H w_l|^2)

with expectations replaced by sample means over Monte-Carlo trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mmse import HermitianSolver, SingularMatrixError

__all__ = [
    "SinrReport",
    "precoder",
    "leakage_objective",
    "hardening_sinr",
    "hardening_sinr_jackknife",
    "sinr_monte_carlo",
    "spectral_efficiency",
]


def precoder(g_hat: np.ndarray, r_list: Sequence[np.ndarray],
             phi_list: Sequence[np.ndarray]) -> np.ndarray:
    """Unit-norm ``(g g^H + sum_k (R_k - Phi_k) + I)^{-1} g``.

    Raises :class:`SingularMatrixError` for a zero estimate or an
    ill-conditioned system.
    """
    g = np.asarray(g_hat, dtype=complex).ravel()
    norm_g = np.linalg.norm(g)
    if norm_g == 0.0 or not np.isfinite(norm_g):
        raise SingularMatrixError("zero channel estimate has no precoding direction")
    a = np.outer(g, g.conj())
    for r, phi in zip(r_list, phi_list, strict=True):
        a += r - phi
    a[np.diag_indices_from(a)] += 1.0
    w = HermitianSolver(a).solve(g)
    norm_w = np.linalg.norm(w)
    if norm_w == 0.0 or not np.isfinite(norm_w):
        raise SingularMatrixError("degenerate precoder")
    return w / norm_w


def leakage_objective(w: np.ndarray, alpha: complex, g_hat: np.ndarray,
                      r_list: Sequence[np.ndarray], phi_list: Sequence[np.ndarray]) -> float:
    """Conditional detection-error-plus-leakage cost of ``(w, alpha)`` in closed form.

    Uses ``E[g g^H | g_hat] = g_hat g_hat^H + (R - Phi)`` for the served
    link and the error covariances for the leakage links. With
    unit-power symbols and noise the cost is
    ``|alpha|^2 (w^H A w + ||w||^2) - 2 Re(alpha g_hat^H w) + 1``, where ``A``
    is the precoder matrix minus the identity. The noise term is written
    as ``||w||^2`` rather than 1, which agrees on the unit sphere and makes
    the unconstrained minimizer over ``w`` point along :func:`precoder`.
    """
    w = np.asarray(w, dtype=complex).ravel()
    g = np.asarray(g_hat, dtype=complex).ravel()
    a = np.outer(g, g.conj())
    for r, phi in zip(r_list, phi_list, strict=True):
        a += r - phi
    quad = np.vdot(w, a @ w).real + np.vdot(w, w).real
    return float(abs(alpha) ** 2 * quad - 2.0 * (alpha * np.vdot(g, w)).real + 1.0)


@dataclass(frozen=True)
class SinrReport:
    signal_power: float
    noise_term: float
    variance_term: float
    interference_term: float
    gamma: float
    se: float
    trials: int = 0
    failures: int = 0


def spectral_efficiency(report_or_gamma) -> float:
    """``log2(1 + gamma)`` for a :class:`SinrReport` or a bare SINR value."""
    gamma = getattr(report_or_gamma, "gamma", report_or_gamma)
    if gamma < 0:
        raise ValueError("SINR must be non-negative")
    return float(np.log2(1.0 + gamma))


def _sinr_terms(mean_a, second_a, mean_leak, n, rho_serv, rho_int):
    # var with Bessel correction; mean_leak[..., l] = E|g_lk^H w_l|^2.
    var = (second_a - np.abs(mean_a) ** 2) * (n / (n - 1))
    sig = rho_serv * np.abs(mean_a) ** 2
    var_term = rho_serv * np.maximum(var, 0.0)
    intf = np.sum(rho_int * mean_leak, axis=-1)
    return sig, var_term, intf


def hardening_sinr(desired: np.ndarray, leak_power: np.ndarray,
                   rho_serving: float, rho_interf: np.ndarray,
                   failures: int = 0) -> SinrReport:
    """SINR bound for one UE from per-trial samples.

    ``desired[t] = g_kk^H w_k`` and ``leak_power[t, l] = |g_lk^H w_l|^2``
    (column ``l`` for each interfering BS, weighted by ``rho_interf[l]``).
    """
    a = np.asarray(desired)
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least two trials")
    leak = np.asarray(leak_power, dtype=float).reshape(n, -1)
    sig, var_term, intf = _sinr_terms(a.mean(), np.mean(np.abs(a) ** 2), leak.mean(axis=0),
                                      n, rho_serving, np.asarray(rho_interf, dtype=float))
    gamma = sig / (1.0 + var_term + intf)
    return SinrReport(float(sig), 1.0, float(var_term), float(intf), float(gamma),
                      spectral_efficiency(gamma), n, failures)


def hardening_sinr_jackknife(desired: np.ndarray, leak_power: np.ndarray,
                             rho_serving, rho_interf) -> tuple[np.ndarray, np.ndarray]:
    """Spectral efficiency of every UE with all trials and with each trial left out.

    ``desired`` is ``(n, K)``, ``leak_power`` is ``(n, K, L')`` and
    ``rho_serving``/``rho_interf`` broadcast against ``(K,)``/``(K, L')``.
    Returns ``(se_full, se_loo)`` with shapes ``(K,)`` and ``(n, K)``. The
    leave-one-out values feed jackknife standard errors of any smooth
    function of the per-UE spectral efficiencies.
    """
    a = np.asarray(desired)
    p = np.asarray(leak_power, dtype=float)
    n = a.shape[0]
    if n < 3:
        raise ValueError("jackknife needs at least three trials")
    rho_serving = np.asarray(rho_serving, dtype=float)
    rho_interf = np.asarray(rho_interf, dtype=float)
    s1, s2, sp = a.sum(0), (np.abs(a) ** 2).sum(0), p.sum(0)

    def se(mean_a, second_a, mean_leak, m):
        sig, var_term, intf = _sinr_terms(mean_a, second_a, mean_leak, m,
                                          rho_serving, rho_interf)
        return np.log2(1.0 + sig / (1.0 + var_term + intf))

    full = se(s1 / n, s2 / n, sp / n, n)
    loo = se((s1 - a) / (n - 1), (s2 - np.abs(a) ** 2) / (n - 1), (sp - p) / (n - 1), n - 1)
    return full, loo


def sinr_monte_carlo(trial_fn, n_trials: int, rho_dl: np.ndarray) -> list[SinrReport]:
    """Hardening-bound SINR of every UE from ``n_trials`` calls of ``trial_fn``.

    ``trial_fn(t)`` returns ``(desired, cross)`` for trial ``t``:
    ``desired[k] = g_kk^H w_k`` and ``cross[l, k] = g_lk^H w_l`` (the
    diagonal is ignored), or raises :class:`SingularMatrixError`, in which
    case the trial is dropped and counted as a failure. ``rho_dl[l, k]``
    is the DL SNR from BS ``l`` to UE ``k``.
    """
    if n_trials < 2:
        raise ValueError("need at least two trials")
    rho = np.asarray(rho_dl, dtype=float)
    n_ue = rho.shape[0]
    desired, cross, failures = [], [], 0
    for t in range(n_trials):
        try:
            d, c = trial_fn(t)
        except SingularMatrixError:
            failures += 1
            continue
        desired.append(d)
        cross.append(np.abs(c) ** 2)
    if len(desired) < 2:
        raise SingularMatrixError(f"only {len(desired)} of {n_trials} trials succeeded")
    desired = np.array(desired)
    cross = np.array(cross)
    reports = []
    for k in range(n_ue):
        others = [l for l in range(n_ue) if l != k]
        reports.append(hardening_sinr(desired[:, k], cross[:, others, k], rho[k, k],
                                      rho[others, k], failures))
    return reports
