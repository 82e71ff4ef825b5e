"""Seven-cell evaluation scenario: SNR tables, angles of arrival, link covariances."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .corrmodel import CorrelationParams, build_q, layout_covariance
from .geometry import AntennaLayout

__all__ = [
    "ScenarioParams",
    "NetworkScenario",
    "db_to_linear",
    "linear_to_db",
    "draw_aoas",
    "build_seven_cell",
]


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(lin):
    return 10.0 * np.log10(np.asarray(lin, dtype=float))


@dataclass(frozen=True)
class ScenarioParams:
    """Settings of the evaluation network (defaults reproduce the reference setup).

    ``dl_distance_ratio`` is the interfering-BS-to-UE distance in units of
    the serving distance: one value for every interfering link, or one
    per interfering BS (``cells - 1`` values, in ascending BS order).
    """

    cells: int = 7
    snr_ul_serving_db: float = -7.0
    snr_ul_cross_db: float = -8.6
    snr_dl_serving_db: float = 13.0
    dl_distance_ratio: float | tuple[float, ...] = 2.0
    path_loss_exponent: float = 2.0
    r_h: float = 0.5
    r_v: float = 0.65

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError("need at least one cell")
        if not (0.0 <= self.r_h <= 1.0 and 0.0 <= self.r_v <= 1.0):
            raise ValueError("correlation factors must lie in [0, 1]")
        ratios = np.atleast_1d(np.asarray(self.dl_distance_ratio, dtype=float))
        if ratios.size not in (1, self.cells - 1) and self.cells > 1:
            raise ValueError(f"dl_distance_ratio needs 1 or {self.cells - 1} values")
        if np.any(ratios <= 0):
            raise ValueError("distance ratios must be positive")

    @classmethod
    def from_config(cls, cfg: dict) -> "ScenarioParams":
        kw = {}
        for name in cls.__dataclass_fields__:
            if name in cfg:
                val = cfg[name]
                kw[name] = tuple(val) if isinstance(val, list) else val
        return cls(**kw)

    def snr_ul_db(self) -> np.ndarray:
        t = np.full((self.cells, self.cells), self.snr_ul_cross_db)
        np.fill_diagonal(t, self.snr_ul_serving_db)
        return t

    def snr_dl_db(self) -> np.ndarray:
        """``[l, k]`` = DL SNR from BS ``l`` to UE ``k``, scaled by distance."""
        L = self.cells
        ratios = np.broadcast_to(np.atleast_1d(np.asarray(self.dl_distance_ratio, float)),
                                 (max(L - 1, 1),))
        t = np.full((L, L), self.snr_dl_serving_db)
        for k in range(L):
            others = [l for l in range(L) if l != k]
            t[others, k] -= 10.0 * self.path_loss_exponent * np.log10(ratios[:len(others)])
        return t


def draw_aoas(rng: np.random.Generator, cells: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth ~ U(-pi, pi) and elevation ~ U(-pi/2, pi/2), one per (BS, UE) link."""
    theta_h = rng.uniform(-np.pi, np.pi, size=(cells, cells))
    theta_v = rng.uniform(-np.pi / 2, np.pi / 2, size=(cells, cells))
    return theta_h, theta_v


@dataclass(frozen=True, eq=False)
class NetworkScenario:
    """One drop of the network: layout, SNR tables and per-link statistics.

    Index convention: ``[l, k]`` is the link between BS ``l`` and UE ``k``;
    UE ``l`` is served by BS ``l`` and cell 0 is the center cell.
    """

    layout: AntennaLayout
    params: ScenarioParams
    theta_h: np.ndarray
    theta_v: np.ndarray
    seed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def l_cells(self) -> int:
        return self.params.cells

    @cached_property
    def snr_ul(self) -> np.ndarray:
        return db_to_linear(self.params.snr_ul_db())

    @cached_property
    def snr_dl(self) -> np.ndarray:
        return db_to_linear(self.params.snr_dl_db())

    def link(self, l: int, k: int) -> CorrelationParams:
        return CorrelationParams(self.params.r_h, self.params.r_v,
                                 float(self.theta_h[l, k]), float(self.theta_v[l, k]))

    def covariance(self, l: int, k: int) -> np.ndarray:
        key = ("R", l, k)
        if key not in self._cache:
            r = layout_covariance(self.layout, self.link(l, k))
            r.setflags(write=False)
            self._cache[key] = r
        return self._cache[key]

    def ul_weights(self, l: int) -> np.ndarray:
        """``rho_lk / rho_ll`` for the observation normalized at BS ``l``."""
        return self.snr_ul[l] / self.snr_ul[l, l]

    def noise_scale(self, l: int) -> float:
        return float(1.0 / self.snr_ul[l, l])

    def q_matrix(self, l: int) -> np.ndarray:
        """Second moment of BS ``l``'s normalized slot-1 observation."""
        key = ("Q", l)
        if key not in self._cache:
            r_list = [self.covariance(l, k) for k in range(self.l_cells)]
            q = build_q(r_list, self.ul_weights(l), self.noise_scale(l))
            q.setflags(write=False)
            self._cache[key] = q
        return self._cache[key]

    def q_neighbors(self, l: int) -> np.ndarray:
        """Second moment of the slot-2 observation (serving UE silent)."""
        key = ("Qn", l)
        if key not in self._cache:
            q = self.q_matrix(l) - self.covariance(l, l)
            q.setflags(write=False)
            self._cache[key] = q
        return self._cache[key]


def build_seven_cell(layout: AntennaLayout, params: ScenarioParams | None = None,
                     rng: np.random.Generator | None = None,
                     aoas: tuple[np.ndarray, np.ndarray] | None = None,
                     seed: int | None = None) -> NetworkScenario:
    """Assemble a drop, drawing angles of arrival from ``rng`` unless ``aoas`` is given."""
    params = params or ScenarioParams()
    if aoas is None:
        if rng is None:
            raise ValueError("need an rng or explicit angles of arrival")
        aoas = draw_aoas(rng, params.cells)
    theta_h, theta_v = (np.array(a, dtype=float) for a in aoas)
    shape = (params.cells, params.cells)
    if theta_h.shape != shape or theta_v.shape != shape:
        raise ValueError(f"angle tables must be {shape}")
    for a in (theta_h, theta_v):
        a.setflags(write=False)
    return NetworkScenario(layout, params, theta_h, theta_v, seed)
