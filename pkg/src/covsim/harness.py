"""Monte-Carlo experiment runner: MSE sweeps, SE sweeps and the viaQ weight table.

Randomness is organized in independent streams keyed by
``(seed, purpose, drop, trial, cell)``: angles of arrival depend on the
drop only, so every estimator, antenna count and pilot count sees the
same network geometry and the same fading (common random numbers).
Trials are order-independent, which lets them run on a thread pool
without changing results.
"""

from __future__ import annotations

import csv
import io
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .downlink import hardening_sinr_jackknife, precoder
from .estimators import EstimatorKind, estimate_pair, kappa_from_terms, kappa_terms
from .geometry import AntennaLayout, LayoutError
from .mmse import HermitianSolver, SingularMatrixError, error_covariance
from .sampling import complex_normal, psd_sqrt, wishart_sample
from .scenario import NetworkScenario, ScenarioParams, build_seven_cell, draw_aoas

__all__ = [
    "EXPERIMENTS",
    "CSV_COLUMNS",
    "ConfigError",
    "RunConfig",
    "Row",
    "TrialResult",
    "MsePoint",
    "SePoint",
    "stream",
    "simulate_mse_point",
    "simulate_se_point",
    "run_mse_sweep",
    "run_se_sweep",
    "run_kappa_table",
    "run_experiment",
    "emit_csv",
    "read_csv",
]

EXPERIMENTS = ("mse-sweep", "se-sweep", "kappa-table")
CSV_COLUMNS = ("experiment", "layout", "nt", "np", "estimator", "metric", "value",
               "stderr", "trials", "failures", "seed")

NT_GRID = (2, 4, 8, 16, 32, 64, 128, 256)
NP_GRID = (100, 250, 500, 1000, 3000, 6000)

_AOA, _CAL, _COV, _SNAP = 1, 2, 3, 4


class ConfigError(ValueError):
    """Invalid run configuration."""


def stream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    """Independent generator for one ``(seed, purpose, keys...)`` combination."""
    return np.random.default_rng(np.random.SeedSequence([seed, purpose, *keys]))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "mse-sweep": dict(nt=(128,), np_grid=NP_GRID, estimators=("ideal", "viaq", "ala")),
    "se-sweep": dict(nt=NT_GRID, np_grid=(3000,), estimators=("ideal", "viaq", "ala")),
    "kappa-table": dict(nt=NT_GRID, np_grid=(3000,), estimators=("viaq",)),
}

_RUN_KEYS = {"layout", "layouts", "nt", "m", "np", "estimators", "trials", "drops",
             "seed", "kappa_calibration", "threads", "out", "experiment"}


def _int_list(value, name: str) -> tuple[int, ...]:
    vals = value if isinstance(value, (list, tuple)) else [value]
    out = []
    for v in vals:
        if isinstance(v, bool) or int(v) != v or int(v) < 1:
            raise ConfigError(f"{name} entries must be positive integers, got {v!r}")
        out.append(int(v))
    if not out:
        raise ConfigError(f"{name} grid is empty")
    return tuple(out)


@dataclass
class RunConfig:
    """Everything needed to reproduce one experiment run."""

    experiment: str
    layouts: tuple[dict, ...] = ({"kind": "ula"}, {"kind": "upa"})
    nt: tuple[int, ...] = ()
    np_grid: tuple[int, ...] = ()
    estimators: tuple[EstimatorKind, ...] = ()
    trials: int = 500
    drops: int = 10
    seed: int = 0
    kappa_calibration: int = 20
    threads: int = 1
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        dflt = _DEFAULTS[self.experiment]
        self.nt = _int_list(self.nt or dflt["nt"], "nt")
        self.np_grid = _int_list(self.np_grid or dflt["np_grid"], "np")
        try:
            self.estimators = tuple(EstimatorKind.parse(e)
                                    for e in (self.estimators or dflt["estimators"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.estimators:
            raise ConfigError("estimator list is empty")
        if not self.layouts:
            raise ConfigError("layout list is empty")
        if self.trials < 2:
            raise ConfigError("trials must be >= 2")
        if self.experiment == "se-sweep" and self.trials < 3:
            raise ConfigError("se-sweep needs >= 3 trials for jackknife errors")
        if self.drops < 1:
            raise ConfigError("drops must be >= 1")
        if self.kappa_calibration < 1:
            raise ConfigError("kappa_calibration must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        self.seed = int(self.seed)
        try:
            list(self.iter_layouts())
        except (LayoutError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad layout: {exc}") from None

    @classmethod
    def from_dict(cls, experiment: str, cfg: dict | None = None, **overrides) -> "RunConfig":
        """Build from a JSON-style dict; keyword overrides win over ``cfg``.

        Layout may be given as ``"layout": {"kind": "upa", "nt": 128, "m": 8}``,
        as a list of such dicts under ``"layouts"``, or as a kind string
        with top-level ``"nt"`` and ``"m"``.
        """
        cfg = dict(cfg or {})
        cfg.update({k: v for k, v in overrides.items() if v is not None})
        if cfg.get("experiment", experiment) != experiment:
            raise ConfigError(f"config is for {cfg['experiment']!r}, not {experiment!r}")
        scen_keys = set(ScenarioParams.__dataclass_fields__)
        unknown = set(cfg) - _RUN_KEYS - scen_keys
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

        raw_layouts = cfg.get("layouts", cfg.get("layout"))
        if raw_layouts is None:
            raw_layouts = [{"kind": "ula"}, {"kind": "upa"}]
        if isinstance(raw_layouts, (str, dict)):
            raw_layouts = [raw_layouts]
        layouts = []
        for spec in raw_layouts:
            spec = {"kind": spec} if isinstance(spec, str) else dict(spec)
            if "m" in cfg and "m" not in spec:
                spec["m"] = cfg["m"]
            layouts.append(spec)

        nt = cfg.get("nt", ())
        estimators = cfg.get("estimators", ())
        if isinstance(estimators, str):
            estimators = [e.strip() for e in estimators.split(",") if e.strip()]
        try:
            scenario = ScenarioParams.from_config(cfg)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario settings: {exc}") from None
        try:
            return cls(experiment=experiment, layouts=tuple(layouts),
                       nt=nt if nt == () else _int_list(nt, "nt"),
                       np_grid=() if cfg.get("np") is None else _int_list(cfg["np"], "np"),
                       estimators=tuple(estimators), trials=int(cfg.get("trials", 500)),
                       drops=int(cfg.get("drops", 10)), seed=cfg.get("seed", 0),
                       kappa_calibration=int(cfg.get("kappa_calibration", 20)),
                       threads=int(cfg.get("threads", 1)), scenario=scenario,
                       out=cfg.get("out"))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def iter_layouts(self) -> Iterable[AntennaLayout]:
        """Every layout of the sweep.

        A spec with its own ``"nt"`` (or a generic coordinate list) yields one
        layout; other specs are crossed with the ``nt`` grid.
        """
        for spec in self.layouts:
            if "nt" in spec or str(spec.get("kind", "ula")).lower() == "generic":
                yield AntennaLayout.from_config(spec)
                continue
            for nt in self.nt:
                yield AntennaLayout.from_config(spec, n_t=nt)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    experiment: str
    layout: str
    nt: int
    np: int
    estimator: str
    metric: str
    value: float
    stderr: float
    trials: int
    failures: int
    seed: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one estimator in one Monte-Carlo trial."""

    estimator: EstimatorKind
    nt: int
    np: int
    drop: int
    trial: int
    values: dict[str, Any]
    failed: bool = False


def _map(fn: Callable[[int], Any], n: int, threads: int) -> list:
    if threads <= 1:
        return [fn(t) for t in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _sort_key(r: TrialResult):
    return (r.drop, r.trial)


# ---------------------------------------------------------------------------
# per-drop preparation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _Cell:
    """True statistics of one BS in one drop, plus everything reusable across trials."""

    r: np.ndarray
    q: np.ndarray
    sqrt_q: np.ndarray
    sqrt_qn: np.ndarray
    noise: float
    int_weight: float
    kappa: tuple[float, float] | None = None
    kappa_terms: tuple[tuple[float, float], tuple[float, float]] | None = None
    ideal_solver: HermitianSolver | None = None
    ideal_lists: tuple[list, list] | None = None


def _calibrate(cell: _Cell, n_p: int, count: int, rng: np.random.Generator):
    """Fit viaQ weights for R and Q on a batch independent of the trials."""
    s_q, s_r = [], []
    for _ in range(count):
        sq = wishart_sample(cell.sqrt_q, n_p, rng)
        s_q.append(sq)
        s_r.append(sq - wishart_sample(cell.sqrt_qn, n_p, rng))
    t_r = kappa_terms(s_r, cell.r)
    t_q = kappa_terms(s_q, cell.q)
    return (kappa_from_terms(*t_r), kappa_from_terms(*t_q)), (t_r, t_q)


def _precoder_lists(r_hat: np.ndarray, q_hat: np.ndarray, solver: HermitianSolver,
                    y: np.ndarray, cell: _Cell):
    """Channel estimate and the (R, Phi) lists for the precoder of one BS.

    The BS only learns its own link (``R_hat``) and the aggregate
    ``Q_hat``. The other UEs enter as one aggregate link with covariance
    ``(Q_hat - R_hat - noise I) / w`` in channel units, where ``w`` is the
    mean interfering UL weight, and estimate covariance ``w R_int Q^-1 R_int``.
    """
    n = r_hat.shape[0]
    if cell.int_weight > 0:
        r_int = q_hat - r_hat
        r_int[np.diag_indices(n)] -= cell.noise
        r_int /= cell.int_weight
        x = solver.solve(np.column_stack([y, r_hat, r_int]))
    else:
        r_int = None
        x = solver.solve(np.column_stack([y, r_hat]))
    g_hat = r_hat @ x[:, 0]
    phi = r_hat @ x[:, 1:n + 1]
    r_list, phi_list = [r_hat], [0.5 * (phi + phi.conj().T)]
    if r_int is not None:
        phi_i = cell.int_weight * (r_int @ x[:, n + 1:])
        r_list.append(r_int)
        phi_list.append(0.5 * (phi_i + phi_i.conj().T))
    return g_hat, r_list, phi_list


def _ideal_lists(scn: NetworkScenario, l: int, solver: HermitianSolver):
    """Per-link ``(R_lk, Phi_lk)`` lists for a BS that knows every true covariance.

    ``Phi_lk = w_k R_lk Q^-1 R_lk`` is the covariance of the MMSE estimate
    of ``g_lk`` from the normalized observation, with ``w_k`` its UL weight.
    """
    w = scn.ul_weights(l)
    r_list, phi_list = [], []
    for k in range(scn.l_cells):
        r = scn.covariance(l, k)
        phi = w[k] * (r @ solver.solve(r))
        r_list.append(r)
        phi_list.append(0.5 * (phi + phi.conj().T))
    return r_list, phi_list


def _make_cell(scn: NetworkScenario, l: int) -> _Cell:
    w = scn.ul_weights(l)
    others = [k for k in range(scn.l_cells) if k != l]
    return _Cell(r=scn.covariance(l, l), q=scn.q_matrix(l),
                 sqrt_q=psd_sqrt(scn.q_matrix(l)), sqrt_qn=psd_sqrt(scn.q_neighbors(l)),
                 noise=scn.noise_scale(l),
                 int_weight=float(np.mean(w[others])) if others else 0.0)


def _prepare_cells(scn: NetworkScenario, cells: Sequence[int], cfg: RunConfig, drop: int,
                   n_p: int, downlink: bool) -> dict[int, _Cell]:
    need_kappa = EstimatorKind.VIAQ in cfg.estimators
    out = {}
    for l in cells:
        cell = _make_cell(scn, l)
        if need_kappa:
            cell.kappa, cell.kappa_terms = _calibrate(
                cell, n_p, cfg.kappa_calibration, stream(cfg.seed, _CAL, drop, l))
        if EstimatorKind.IDEAL in cfg.estimators:
            cell.ideal_solver = HermitianSolver(cell.q)
            if downlink:
                cell.ideal_lists = _ideal_lists(scn, l, cell.ideal_solver)
        out[l] = cell
    return out


class _Drop:
    """One drop: scenario, per-link square roots and per-cell statistics."""

    def __init__(self, cfg: RunConfig, layout: AntennaLayout, n_p: int, drop: int,
                 cells: Sequence[int], downlink: bool):
        self.cfg, self.layout, self.n_p, self.drop = cfg, layout, n_p, drop
        aoas = draw_aoas(stream(cfg.seed, _AOA, drop), cfg.scenario.cells)
        self.scn = build_seven_cell(layout, cfg.scenario, aoas=aoas, seed=cfg.seed)
        L = self.scn.l_cells
        self.chan_sqrt = {(l, k): psd_sqrt(self.scn.covariance(l, k))
                          for l in cells for k in range(L)}
        self.cells = _prepare_cells(self.scn, cells, cfg, drop, n_p, downlink)
        self.needs_samples = any(e is not EstimatorKind.IDEAL for e in cfg.estimators)

    def observe(self, l: int, g_row: Sequence[np.ndarray], rng: np.random.Generator):
        """Normalized estimation snapshot at BS ``l`` from its channels ``g_row[k]``."""
        w = self.scn.ul_weights(l)
        y = np.sqrt(self.scn.noise_scale(l)) * complex_normal(rng, self.layout.n_t)
        for k, g in enumerate(g_row):
            y += np.sqrt(w[k]) * g
        return y

    def samples(self, l: int, trial: int):
        if not self.needs_samples:
            return None
        cell = self.cells[l]
        rng = stream(self.cfg.seed, _COV, self.drop, trial, l)
        s_q = wishart_sample(cell.sqrt_q, self.n_p, rng)
        s_r = s_q - wishart_sample(cell.sqrt_qn, self.n_p, rng)
        return s_r, s_q

    def estimate(self, kind: EstimatorKind, l: int, samples):
        """``(R_hat, Q_hat, solver)`` for one BS; raises SingularMatrixError."""
        cell = self.cells[l]
        if kind is EstimatorKind.IDEAL:
            return cell.r, cell.q, cell.ideal_solver
        r_hat, q_hat = estimate_pair(samples, kind, self.layout, kappa=cell.kappa)
        return r_hat, q_hat, HermitianSolver(q_hat)


# ---------------------------------------------------------------------------
# channel-estimation MSE
# ---------------------------------------------------------------------------

@dataclass
class MsePoint:
    """Per-trial normalized MSE of every estimator at one (layout, N_t, N_p)."""

    layout: AntennaLayout
    n_p: int
    config: RunConfig
    results: list[TrialResult]
    oracle: list[float]          # closed-form ideal MSE per drop
    kappas: list[tuple[float, float] | None]

    def values(self, kind) -> np.ndarray:
        kind = EstimatorKind.parse(kind)
        return np.array([r.values["mse"] for r in self.results
                         if r.estimator is kind and not r.failed])

    def failures(self, kind) -> int:
        kind = EstimatorKind.parse(kind)
        return sum(r.failed for r in self.results if r.estimator is kind)

    def summary(self, kind) -> tuple[float, float, int]:
        """Mean, standard error and number of successful trials."""
        v = self.values(kind)
        if len(v) == 0:
            return float("nan"), float("nan"), 0
        se = float(np.std(v, ddof=1) / np.sqrt(len(v))) if len(v) > 1 else float("nan")
        return float(np.mean(v)), se, len(v)

    def paired_gap(self, a, b) -> tuple[float, float]:
        """Mean of ``mse_a - mse_b`` over trials where both succeeded, and its standard error."""
        ka, kb = EstimatorKind.parse(a), EstimatorKind.parse(b)
        va = {_sort_key(r): r.values["mse"] for r in self.results
              if r.estimator is ka and not r.failed}
        vb = {_sort_key(r): r.values["mse"] for r in self.results
              if r.estimator is kb and not r.failed}
        d = np.array([va[k] - vb[k] for k in sorted(va.keys() & vb.keys())])
        return float(d.mean()), float(d.std(ddof=1) / np.sqrt(len(d)))

    def rows(self) -> list[Row]:
        cfg = self.config
        out = []
        for kind in cfg.estimators:
            mean, se, n = self.summary(kind)
            out.append(Row("mse-sweep", self.layout.label, self.layout.n_t, self.n_p,
                           kind.value, "mse", mean, se, n, self.failures(kind), cfg.seed))
        if EstimatorKind.IDEAL in cfg.estimators:
            o = np.array(self.oracle)
            se = float(o.std(ddof=1) / np.sqrt(len(o))) if len(o) > 1 else 0.0
            out.append(Row("mse-sweep", self.layout.label, self.layout.n_t, self.n_p,
                           "ideal", "mse_oracle", float(o.mean()), se, len(o), 0, cfg.seed))
        return out


def simulate_mse_point(cfg: RunConfig, layout: AntennaLayout, n_p: int) -> MsePoint:
    """Center-cell channel-estimation MSE for every configured estimator."""
    results, oracle, kappas = [], [], []
    for drop in range(cfg.drops):
        d = _Drop(cfg, layout, n_p, drop, cells=[0], downlink=False)
        cell = d.cells[0]
        tr_r = np.trace(cell.r).real
        phi = error_covariance(cell.r, cell.ideal_solver or cell.q)
        oracle.append(float(np.trace(cell.r - phi).real / tr_r))
        kappas.append(cell.kappa)
        L = d.scn.l_cells

        def trial(t: int, d=d, cell=cell, tr_r=tr_r) -> list[TrialResult]:
            samples = d.samples(0, t)
            rng = stream(cfg.seed, _SNAP, d.drop, t)
            g = [d.chan_sqrt[(0, k)] @ complex_normal(rng, layout.n_t) for k in range(L)]
            y = d.observe(0, g, rng)
            out = []
            for kind in cfg.estimators:
                try:
                    r_hat, _, solver = d.estimate(kind, 0, samples)
                    err = g[0] - r_hat @ solver.solve(y)
                    out.append(TrialResult(kind, layout.n_t, n_p, d.drop, t,
                                           {"mse": float(np.vdot(err, err).real / tr_r)}))
                except SingularMatrixError:
                    out.append(TrialResult(kind, layout.n_t, n_p, d.drop, t, {}, failed=True))
            return out

        for recs in _map(trial, cfg.trials, cfg.threads):
            results.extend(recs)
    results.sort(key=_sort_key)
    return MsePoint(layout, n_p, cfg, results, oracle, kappas)


# ---------------------------------------------------------------------------
# downlink spectral efficiency
# ---------------------------------------------------------------------------

@dataclass
class SePoint:
    """Per-drop downlink samples of every estimator at one (layout, N_t, N_p).

    ``samples[kind][drop]`` is ``(trial_ids, desired, leak)`` over the
    successful trials: ``desired[t, k] = g_kk^H w_k`` and
    ``leak[t, k, j] = |g_lk^H w_l|^2`` for the ``j``-th interfering BS ``l``.
    """

    layout: AntennaLayout
    n_p: int
    config: RunConfig
    rho_serving: np.ndarray
    rho_interf: np.ndarray
    samples: dict[EstimatorKind, list[tuple[np.ndarray, np.ndarray, np.ndarray]]]
    failures: dict[EstimatorKind, int]

    def _drop_stats(self, kind, drop, keep=None):
        ids, desired, leak = self.samples[kind][drop]
        if keep is not None:
            sel = np.isin(ids, keep)
            desired, leak = desired[sel], leak[sel]
        full, loo = hardening_sinr_jackknife(desired, leak, self.rho_serving, self.rho_interf)
        return full, loo

    @staticmethod
    def _metric(full, loo, metric):
        if metric == "se_center":
            return full[0], loo[:, 0]
        if metric == "se_avg":
            return full.mean(), loo.mean(axis=1)
        raise ValueError(f"unknown metric {metric!r}")

    @staticmethod
    def _jk_var(loo_vals):
        n = len(loo_vals)
        return (n - 1) / n * np.sum((loo_vals - loo_vals.mean()) ** 2)

    def summary(self, kind, metric: str = "se_center") -> tuple[float, float]:
        """Mean over drops and the Monte-Carlo standard error given the drops."""
        kind = EstimatorKind.parse(kind)
        vals, var = [], 0.0
        for drop in range(len(self.samples[kind])):
            v, loo = self._metric(*self._drop_stats(kind, drop), metric)
            vals.append(v)
            var += self._jk_var(loo)
        D = len(vals)
        return float(np.mean(vals)), float(np.sqrt(var) / D)

    def per_drop(self, kind, metric: str = "se_center") -> np.ndarray:
        kind = EstimatorKind.parse(kind)
        return np.array([self._metric(*self._drop_stats(kind, d), metric)[0]
                         for d in range(len(self.samples[kind]))])

    def paired_gap(self, a, b, metric: str = "se_center") -> tuple[float, float]:
        """``SE_a - SE_b`` and its jackknife standard error over shared trials."""
        ka, kb = EstimatorKind.parse(a), EstimatorKind.parse(b)
        gaps, var = [], 0.0
        for drop in range(len(self.samples[ka])):
            keep = np.intersect1d(self.samples[ka][drop][0], self.samples[kb][drop][0])
            va, la = self._metric(*self._drop_stats(ka, drop, keep), metric)
            vb, lb = self._metric(*self._drop_stats(kb, drop, keep), metric)
            gaps.append(va - vb)
            var += self._jk_var(la - lb)
        D = len(gaps)
        return float(np.mean(gaps)), float(np.sqrt(var) / D)

    def trials(self, kind) -> int:
        return int(sum(len(s[0]) for s in self.samples[EstimatorKind.parse(kind)]))

    def rows(self) -> list[Row]:
        cfg, out = self.config, []
        for kind in cfg.estimators:
            for metric in ("se_center", "se_avg"):
                mean, se = self.summary(kind, metric)
                out.append(Row("se-sweep", self.layout.label, self.layout.n_t, self.n_p,
                               kind.value, metric, mean, se, self.trials(kind),
                               self.failures[kind], cfg.seed))
        return out


def simulate_se_point(cfg: RunConfig, layout: AntennaLayout, n_p: int) -> SePoint:
    """Downlink hardening-bound samples for every configured estimator."""
    L = cfg.scenario.cells
    samples = {k: [] for k in cfg.estimators}
    failures = {k: 0 for k in cfg.estimators}
    rho_dl = None
    for drop in range(cfg.drops):
        d = _Drop(cfg, layout, n_p, drop, cells=range(L), downlink=True)
        rho_dl = d.scn.snr_dl

        def trial(t: int, d=d):
            rng = stream(cfg.seed, _SNAP, d.drop, t)
            g = [[d.chan_sqrt[(l, k)] @ complex_normal(rng, layout.n_t) for k in range(L)]
                 for l in range(L)]
            ys = [d.observe(l, g[l], rng) for l in range(L)]
            samp = [d.samples(l, t) for l in range(L)]
            out = {}
            for kind in cfg.estimators:
                try:
                    w = []
                    for l in range(L):
                        cell = d.cells[l]
                        if kind is EstimatorKind.IDEAL:
                            g_hat = cell.r @ cell.ideal_solver.solve(ys[l])
                            r_list, phi_list = cell.ideal_lists
                        else:
                            r_hat, q_hat, solver = d.estimate(kind, l, samp[l])
                            g_hat, r_list, phi_list = _precoder_lists(
                                r_hat, q_hat, solver, ys[l], cell)
                        w.append(precoder(g_hat, r_list, phi_list))
                    cross = np.array([[np.vdot(g[l][k], w[l]) for k in range(L)]
                                      for l in range(L)])
                    out[kind] = cross
                except SingularMatrixError:
                    out[kind] = None
            return out

        recs = _map(trial, cfg.trials, cfg.threads)
        others = [[l for l in range(L) if l != k] for k in range(L)]
        for kind in cfg.estimators:
            ids = np.array([t for t, r in enumerate(recs) if r[kind] is not None], dtype=int)
            failures[kind] += cfg.trials - len(ids)
            if len(ids) < 3:
                raise SingularMatrixError(
                    f"{kind.value}: only {len(ids)} successful trials in drop {drop}")
            cross = np.array([recs[t][kind] for t in ids])          # (n, l, k)
            desired = np.stack([cross[:, k, k] for k in range(L)], axis=1)
            leak = np.stack([np.abs(cross[:, others[k], k]) ** 2 for k in range(L)], axis=1)
            samples[kind].append((ids, desired, leak))
    others = [[l for l in range(L) if l != k] for k in range(L)]
    rho_serving = np.diag(rho_dl).copy()
    rho_interf = np.array([rho_dl[others[k], k] for k in range(L)])
    return SePoint(layout, n_p, cfg, rho_serving, rho_interf, samples, failures)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _progress(log, experiment: str, layout: AntennaLayout, n_p: int, t0: float):
    if log is not None:
        print(f"[{experiment}] {layout.label} nt={layout.n_t} np={n_p}: "
              f"{time.perf_counter() - t0:.1f} s", file=log, flush=True)


def run_mse_sweep(cfg: RunConfig, log=sys.stderr) -> list[Row]:
    rows = []
    for layout in cfg.iter_layouts():
        for n_p in cfg.np_grid:
            t0 = time.perf_counter()
            rows.extend(simulate_mse_point(cfg, layout, n_p).rows())
            _progress(log, "mse-sweep", layout, n_p, t0)
    return rows


def run_se_sweep(cfg: RunConfig, log=sys.stderr) -> list[Row]:
    rows = []
    for layout in cfg.iter_layouts():
        for n_p in cfg.np_grid:
            t0 = time.perf_counter()
            rows.extend(simulate_se_point(cfg, layout, n_p).rows())
            _progress(log, "se-sweep", layout, n_p, t0)
    return rows


def kappa_point(cfg: RunConfig, layout: AntennaLayout, n_p: int) -> dict[str, tuple]:
    """Pooled viaQ weights of the center cell: ``{metric: (kappa, stderr, per_drop)}``."""
    terms = {"kappa_r": [0.0, 0.0], "kappa_q": [0.0, 0.0]}
    per_drop = {"kappa_r": [], "kappa_q": []}
    params = cfg.scenario
    for drop in range(cfg.drops):
        aoas = draw_aoas(stream(cfg.seed, _AOA, drop), params.cells)
        cell = _make_cell(build_seven_cell(layout, params, aoas=aoas, seed=cfg.seed), 0)
        (k_r, k_q), (t_r, t_q) = _calibrate(cell, n_p, cfg.kappa_calibration,
                                            stream(cfg.seed, _CAL, drop, 0))
        for name, k, t in (("kappa_r", k_r, t_r), ("kappa_q", k_q, t_q)):
            per_drop[name].append(k)
            terms[name][0] += t[0]
            terms[name][1] += t[1]
    out = {}
    for name in ("kappa_q", "kappa_r"):
        k = np.array(per_drop[name])
        se = float(k.std(ddof=1) / np.sqrt(len(k))) if len(k) > 1 else 0.0
        out[name] = (kappa_from_terms(*terms[name]), se, k)
    return out


def run_kappa_table(cfg: RunConfig, log=sys.stderr) -> list[Row]:
    rows = []
    for layout in cfg.iter_layouts():
        for n_p in cfg.np_grid:
            t0 = time.perf_counter()
            for metric, (k, se, _) in kappa_point(cfg, layout, n_p).items():
                rows.append(Row("kappa-table", layout.label, layout.n_t, n_p, "viaq", metric,
                                k, se, cfg.drops * cfg.kappa_calibration, 0, cfg.seed))
            _progress(log, "kappa-table", layout, n_p, t0)
    return rows


_RUNNERS = {"mse-sweep": run_mse_sweep, "se-sweep": run_se_sweep,
            "kappa-table": run_kappa_table}


def run_experiment(cfg: RunConfig, log=sys.stderr) -> list[Row]:
    return _RUNNERS[cfg.experiment](cfg, log=log)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(rows: Iterable[Row], path) -> None:
    """Write rows with a header; ``path`` may be a filename or a text stream."""
    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in r.as_tuple()])

    if isinstance(path, io.TextIOBase) or hasattr(path, "write"):
        write(path)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write(fh)


def read_csv(path) -> list[Row]:
    types = {f.name: f.type for f in fields(Row)}
    conv = {"int": int, "float": float, "str": str}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [Row(**{k: conv[types[k]](v) for k, v in rec.items()}) for rec in reader]
