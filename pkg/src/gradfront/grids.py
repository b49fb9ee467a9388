"""Uniform grids, sampled fields and the rotation to front-adapted coordinates.

Laboratory coordinates are ``(x, y)`` (space, trait).  The rotated frame
``(X, Y)`` has ``X`` along the optimal-trait line ``y = B x`` and ``Y``
orthogonal to it::

    X = (x + B y) / sqrt(1 + B^2)
    Y = (y - B x) / sqrt(1 + B^2)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import WindowTooNarrow

DEFAULT_TRUNCATION_TOL = 1e-10


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("grid bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError("grid needs at least 3 points")
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def from_spacing(cls, lo: float, hi: float, h: float) -> "Grid1D":
        """Grid on [lo, hi] whose spacing is ``h`` (hi is rounded onto the lattice)."""
        n = int(round((hi - lo) / h)) + 1
        return cls(lo, lo + (n - 1) * h, n)

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.lo + self.h * np.arange(self.n_points)

    def shifted(self, offset: float) -> "Grid1D":
        return Grid1D(self.lo + offset, self.hi + offset, self.n_points)


@dataclass(frozen=True)
class Grid2D:
    gx: Grid1D
    gy: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.gx.n_points, self.gy.n_points)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, Y)`` arrays indexed ``[i_X, j_Y]``."""
        return np.meshgrid(self.gx.points, self.gy.points, indexing="ij")


@dataclass(frozen=True)
class ScalarField2D:
    """Density ``v(t, X, Y)`` sampled on a :class:`Grid2D`, indexed ``[i_X, j_Y]``."""

    grid: Grid2D
    values: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.time_stamp < 0:
            raise ValueError("time_stamp must be >= 0")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def is_density(self) -> bool:
        return bool(np.all(self.values >= 0.0))

    def with_values(self, values: np.ndarray, time_stamp: float | None = None) -> "ScalarField2D":
        t = self.time_stamp if time_stamp is None else time_stamp
        return ScalarField2D(self.grid, values, t)


@dataclass(frozen=True)
class Rotation:
    B: float
    norm: float = field(init=False)

    def __post_init__(self):
        if not (self.B > 0 or self.B == 0):
            raise ValueError("gradient slope B must be non-negative")
        object.__setattr__(self, "norm", math.sqrt(1.0 + self.B * self.B))


def to_XY(x, y, rot: Rotation):
    """Laboratory ``(x, y)`` to rotated ``(X, Y)``; works on scalars and arrays."""
    return (x + rot.B * y) / rot.norm, (y - rot.B * x) / rot.norm


def to_xy(X, Y, rot: Rotation):
    """Inverse of :func:`to_XY`."""
    return (X - rot.B * Y) / rot.norm, (rot.B * X + Y) / rot.norm


def lab_line_samples(field: ScalarField2D, rot: Rotation, xs) -> np.ndarray:
    """Samples of ``v`` along the laboratory vertical lines through each ``x``.

    Row ``k`` holds ``v(norm * xs[k] + B * s_j, s_j)`` for every trait node
    ``s_j`` of the window.  Sampling at the ``Y`` nodes makes bilinear
    interpolation reduce to linear interpolation along ``X``.  Points left or
    right of the window take the edge value (zero-flux extension).
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    gx, gy = field.grid.gx, field.grid.gy
    s = gy.points
    Xq = rot.norm * xs[:, None] + rot.B * s[None, :]
    pos = np.clip((Xq - gx.lo) / gx.h, 0.0, gx.n_points - 1.0)
    i0 = np.minimum(pos.astype(np.intp), gx.n_points - 2)
    w = pos - i0
    j = np.broadcast_to(np.arange(gy.n_points), Xq.shape)
    v = field.values
    return (1.0 - w) * v[i0, j] + w * v[i0 + 1, j]


def trait_mass_profile(field: ScalarField2D, rot: Rotation, xs, tol: float = DEFAULT_TRUNCATION_TOL) -> np.ndarray:
    """Trait-integrated mass ``N(x) = norm * int v(norm x + B s, s) ds`` for each ``x``.

    Raises :class:`WindowTooNarrow` when the integrand at either edge of the
    trait window exceeds ``tol`` times the field maximum.
    """
    samples = lab_line_samples(field, rot, xs)
    vmax = float(np.max(np.abs(field.values))) if field.values.size else 0.0
    if vmax > 0.0:
        edge = max(np.max(np.abs(samples[:, 0])), np.max(np.abs(samples[:, -1])))
        if edge > tol * vmax:
            raise WindowTooNarrow(
                f"integrand at trait-window edge is {edge:.3e} (>{tol:.1e} x max {vmax:.3e})"
            )
    mass = rot.norm * np.trapezoid(samples, dx=field.grid.gy.h, axis=1)
    return np.maximum(mass, 0.0) if field.is_density else mass


def trait_mass(field: ScalarField2D, rot: Rotation, x: float, tol: float = DEFAULT_TRUNCATION_TOL) -> float:
    """Total population at laboratory position ``x`` (trapezoid rule)."""
    return float(trait_mass_profile(field, rot, [x], tol)[0])


def lab_x_range(grid: Grid2D, rot: Rotation) -> tuple[float, float]:
    """Laboratory ``x`` interval whose vertical lines stay inside the window."""
    lo = (grid.gx.lo - rot.B * grid.gy.lo) / rot.norm
    hi = (grid.gx.hi - rot.B * grid.gy.hi) / rot.norm
    if not lo < hi:
        raise WindowTooNarrow("window too short in X for its trait width")
    return lo, hi
