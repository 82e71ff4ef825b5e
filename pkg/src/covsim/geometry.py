"""Antenna array layouts and translation-equivalence classes of antenna pairs.

Antennas of a planar panel with ``M`` rows and ``N`` columns are numbered
column by column, so antenna ``p`` sits at column ``x = p // M`` and row
``y = p % M`` and ``p = x * M + y``. A uniform linear array is the ``M = 1``
special case.

Two ordered pairs ``(p, q)`` and ``(p', q')`` belong to the same class when
``coord(q) - coord(p) == coord(q') - coord(p')``. Covariance entries of a
translation-invariant channel are equal inside a class, which is what the
layout-aware estimators in :mod:`covsim.estimators` exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "LayoutError",
    "AntennaLayout",
    "AntennaCoord",
    "PairClass",
    "ClassPartition",
    "index_to_coord",
    "coord_to_index",
    "equivalence_classes",
    "pair_partition",
    "default_rows",
]

ULA = "ula"
UPA = "upa"
GENERIC = "generic"


class LayoutError(ValueError):
    """Invalid layout description or out-of-range antenna index/coordinate."""


class AntennaCoord(NamedTuple):
    x: int  # column
    y: int  # row


@dataclass(frozen=True)
class AntennaLayout:
    """Geometry of an antenna array.

    Use the :meth:`ula`, :meth:`upa` and :meth:`generic` constructors rather
    than calling the class directly.
    """

    kind: str
    n_t: int
    m_rows: int = 1
    n_cols: int = 1
    coords: tuple[tuple[int, int], ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (ULA, UPA, GENERIC):
            raise LayoutError(f"unknown layout kind {self.kind!r}")
        if self.n_t < 1:
            raise LayoutError("a layout needs at least one antenna")
        if self.kind == GENERIC:
            if self.coords is None or len(self.coords) != self.n_t:
                raise LayoutError("generic layout needs one coordinate per antenna")
            if len(set(self.coords)) != len(self.coords):
                raise LayoutError("generic layout has duplicate coordinates")
        elif self.m_rows * self.n_cols != self.n_t:
            raise LayoutError(
                f"{self.m_rows} rows x {self.n_cols} columns != {self.n_t} antennas")
        if self.kind == ULA and self.m_rows != 1:
            raise LayoutError("a ULA has exactly one row")

    @classmethod
    def ula(cls, n_t: int) -> "AntennaLayout":
        return cls(ULA, n_t, 1, n_t)

    @classmethod
    def upa(cls, m_rows: int, n_cols: int) -> "AntennaLayout":
        if m_rows < 1 or n_cols < 1:
            raise LayoutError("panel dimensions must be positive")
        return cls(UPA, m_rows * n_cols, m_rows, n_cols)

    @classmethod
    def generic(cls, coords: Sequence[Sequence[int]]) -> "AntennaLayout":
        pts = []
        for c in coords:
            x, y = (c[0], c[1]) if len(c) == 2 else (c[0], 0)
            if int(x) != x or int(y) != y:
                raise LayoutError(f"coordinate {tuple(c)} is not a lattice point")
            pts.append((int(x), int(y)))
        return cls(GENERIC, len(pts), coords=tuple(pts))

    @classmethod
    def from_config(cls, spec: dict, n_t: int | None = None) -> "AntennaLayout":
        """Build a layout from ``{"kind": ..., "nt": ..., "m": ...}``.

        ``n_t`` overrides the ``"nt"`` key, which is how sweeps reuse one
        layout description across antenna counts. A UPA without ``"m"``
        gets the most square panel (see :func:`default_rows`).
        """
        kind = str(spec.get("kind", ULA)).lower()
        if kind == GENERIC:
            return cls.generic(spec["coords"])
        nt = int(n_t if n_t is not None else spec["nt"])
        if kind == ULA:
            return cls.ula(nt)
        if kind == UPA:
            m = spec.get("m")
            m = default_rows(nt) if m is None else int(m)
            if m < 1 or nt % m:
                raise LayoutError(f"{nt} antennas cannot be arranged in {m} rows")
            return cls.upa(m, nt // m)
        raise LayoutError(f"unknown layout kind {kind!r}")

    @property
    def is_grid(self) -> bool:
        return self.kind in (ULA, UPA)

    @property
    def label(self) -> str:
        if self.kind == UPA:
            return f"upa{self.m_rows}x{self.n_cols}"
        return self.kind

    def positions(self) -> np.ndarray:
        """Integer ``(n_t, 2)`` array of ``(x, y)`` positions in index order."""
        if self.kind == GENERIC:
            return np.array(self.coords, dtype=np.int64).reshape(self.n_t, 2)
        p = np.arange(self.n_t)
        return np.column_stack([p // self.m_rows, p % self.m_rows])


def default_rows(n_t: int) -> int:
    """Largest divisor of ``n_t`` not exceeding its square root.

    Gives 1x2, 2x2, 2x4, 4x4, 4x8, 8x8, 8x16 and 16x16 panels for powers
    of two.
    """
    for m in range(math.isqrt(n_t), 0, -1):
        if n_t % m == 0:
            return m
    return 1


def _require_grid(layout: AntennaLayout) -> None:
    if not layout.is_grid:
        raise LayoutError("index arithmetic is defined for ULA/UPA layouts only")


def index_to_coord(p: int, layout: AntennaLayout) -> AntennaCoord:
    _require_grid(layout)
    if not 0 <= p < layout.n_t:
        raise LayoutError(f"antenna index {p} outside [0, {layout.n_t})")
    return AntennaCoord(p // layout.m_rows, p % layout.m_rows)


def coord_to_index(c: Sequence[int], layout: AntennaLayout) -> int:
    _require_grid(layout)
    x, y = c
    if not (0 <= x < layout.n_cols and 0 <= y < layout.m_rows):
        raise LayoutError(
            f"coordinate ({x}, {y}) outside {layout.m_rows}x{layout.n_cols} panel")
    return x * layout.m_rows + y


@dataclass(frozen=True)
class PairClass:
    """All ordered antenna pairs sharing one displacement ``(dx, dy)``."""

    displacement: tuple[int, int]
    members: tuple[tuple[int, int], ...]

    @property
    def cardinality(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class ClassPartition:
    """Dense form of the pair partition, used by the estimators.

    ``labels[p, q]`` is the class id of the ordered pair ``(p, q)``,
    ``counts[c]`` the size of class ``c`` and ``displacements[c]`` its
    ``(dx, dy)``. Arrays are read-only so a cached partition can be shared
    between threads.
    """

    labels: np.ndarray
    counts: np.ndarray
    displacements: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.counts)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=64)
def pair_partition(layout: AntennaLayout) -> ClassPartition:
    """Label every ordered pair with its displacement class (cached)."""
    pos = layout.positions()
    dx = pos[None, :, 0] - pos[:, None, 0]
    dy = pos[None, :, 1] - pos[:, None, 1]
    if layout.is_grid:
        m, n = layout.m_rows, layout.n_cols
        labels = (dx + n - 1) * (2 * m - 1) + (dy + m - 1)
        counts = np.bincount(labels.ravel(), minlength=(2 * n - 1) * (2 * m - 1))
        gx, gy = np.divmod(np.arange(len(counts)), 2 * m - 1)
        disp = np.column_stack([gx - (n - 1), gy - (m - 1)])
    else:
        pairs = np.stack([dx.ravel(), dy.ravel()], axis=1)
        disp, inv = np.unique(pairs, axis=0, return_inverse=True)
        labels = inv.reshape(dx.shape)
        counts = np.bincount(labels.ravel(), minlength=len(disp))
    return ClassPartition(_freeze(np.ascontiguousarray(labels)), _freeze(counts),
                          _freeze(disp))


@lru_cache(maxsize=16)
def equivalence_classes(layout: AntennaLayout) -> tuple[PairClass, ...]:
    """Enumerate translation-equivalence classes, sorted by displacement."""
    part = pair_partition(layout)
    order = np.argsort(part.labels, axis=None, kind="stable")
    p_idx, q_idx = np.divmod(order, layout.n_t)
    bounds = np.concatenate([[0], np.cumsum(part.counts)])
    classes = []
    for c in range(part.n_classes):
        sl = slice(bounds[c], bounds[c + 1])
        members = tuple(zip(p_idx[sl].tolist(), q_idx[sl].tolist()))
        classes.append(PairClass(tuple(int(v) for v in part.displacements[c]), members))
    classes.sort(key=lambda pc: pc.displacement)
    return tuple(classes)
