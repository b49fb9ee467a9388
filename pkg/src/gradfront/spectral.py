"""Principal eigenpairs of ``-d^2/dY^2 - r~(Y)``.

The operator is discretised with the 3-point Laplacian on a uniform grid
with zero Dirichlet values at ``Y = +-R``.  The smallest eigenvalue of the
resulting symmetric tridiagonal matrix is isolated by Sturm-sequence
bisection and its eigenvector by shifted inverse iteration.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solveh_banded

from .errors import (
    ConvergenceFailure,
    NoConvergence,
    NonPositiveEigenfunction,
    NotApplicable,
    NotInvading,
)
from .growth import GrowthProfile, rotated_growth


@dataclass
class EigenPair:
    """Eigenvalue and sup-normalised positive eigenfunction sampled on ``Y``.

    ``exact`` (closed-form pairs only) evaluates the eigenfunction anywhere.
    ``ladder`` records ``(R, lambda_R)`` for pairs obtained by domain doubling.
    """

    lam: float
    Y: np.ndarray
    gamma: np.ndarray
    domain: str
    R: float
    grid_h: float
    residual: float = 0.0
    exact: Optional[Callable] = field(default=None, repr=False)
    ladder: list = field(default_factory=list)

    def evaluate(self, Y):
        Y = np.asarray(Y, dtype=float)
        if self.exact is not None:
            return self.exact(Y)
        return np.interp(Y, self.Y, self.gamma, left=0.0, right=0.0)

    def mass(self) -> float:
        return float(np.trapezoid(self.gamma, self.Y))


def _smallest_eigenvalue(diag, off2, lo, hi, max_iter=250) -> float:
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _count_below(diag, off2, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _count_below(diag, off2, x) -> int:
    """Number of eigenvalues below ``x`` (Sturm sequence / LDL^T inertia)."""
    # a zero pivot is nudged negative by a tiny amount on the operator's scale
    tiny = 1e-14 * math.sqrt(off2) if off2 > 0 else 1e-300
    q = diag[0] - x
    if q == 0.0:
        q = -tiny
    cnt = 1 if q < 0.0 else 0
    for d in diag[1:]:
        q = d - x - off2 / q
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            cnt += 1
    return cnt


def dirichlet_eig(profile: GrowthProfile, B: float, R: float, h: float) -> EigenPair:
    """Principal Dirichlet eigenpair on ``(-R, R)`` with ``r~(Y) = r(sqrt(1+B^2) Y)``."""
    if not R > 0:
        raise ValueError("R must be positive")
    if not (0 < h <= R / 50.0 * (1 + 1e-12)):
        raise ValueError(f"need 0 < h <= R/50, got h={h}, R={R}")
    n = int(round(2.0 * R / h)) + 1
    Y = np.linspace(-R, R, n)
    h = Y[1] - Y[0]
    rt = np.asarray(rotated_growth(profile, B)(Y), dtype=float)
    inner = rt[1:-1]
    inv_h2 = 1.0 / (h * h)
    diag = 2.0 * inv_h2 - inner
    off = -inv_h2
    # bracket depends only on max r~, which sits on every nested grid
    top = float(np.max(inner))
    lo, hi = -top - 1.0, 4.0 * inv_h2 - top + 1.0
    lam = _smallest_eigenvalue(diag.tolist(), float(off * off), float(lo), float(hi))

    # inverse iteration, shift just below lam keeps T - sigma I positive definite
    sigma = lam - 1e-9 * max(1.0, abs(lam))
    ab = np.empty((2, diag.size))
    ab[0, 0] = 0.0
    ab[0, 1:] = off
    ab[1] = diag - sigma
    vec = np.ones(diag.size)
    try:
        for _ in range(4):
            vec = solveh_banded(ab, vec)
            vec /= np.max(np.abs(vec))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"inverse iteration failed: {exc}") from exc
    if not np.all(np.isfinite(vec)):
        raise ConvergenceFailure("inverse iteration produced non-finite values")
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    if np.min(vec) < 0.0:
        raise NonPositiveEigenfunction(f"principal eigenvector has min {np.min(vec):.3e}")
    gamma = np.concatenate(([0.0], vec / np.max(vec), [0.0]))
    lap = (gamma[2:] - 2.0 * gamma[1:-1] + gamma[:-2]) * inv_h2
    res = float(np.max(np.abs(-lap - inner * gamma[1:-1] - lam * gamma[1:-1])))
    return EigenPair(lam, Y, gamma, "interval", float(R), float(h), res)


def generalized_eig(profile: GrowthProfile, B: float, tol: float = 1e-4, h: float = 0.01,
                    R0: float = 2.0, R_cap: float = 64.0) -> EigenPair:
    """Whole-line principal eigenpair as the limit of Dirichlet problems on doubling domains."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    R = R0
    prev = dirichlet_eig(profile, B, R, h)
    ladder = [(R, prev.lam)]
    while True:
        R *= 2.0
        if R > R_cap:
            raise NoConvergence(f"eigenvalue not settled within |dlambda| < {tol} by R = {R_cap}")
        cur = dirichlet_eig(profile, B, R, h)
        ladder.append((R, cur.lam))
        if abs(cur.lam - prev.lam) < tol:
            cur.domain = "whole_line"
            cur.ladder = ladder
            return cur
        prev = cur


def harmonic_closed_form(A: float, B: float, R: Optional[float] = None, h: Optional[float] = None) -> EigenPair:
    """Exact pair for ``r(z) = 1 - A z^2``: ``lambda0 = sqrt(A(1+B^2)) - 1``, Gaussian ``Gamma0``."""
    if not A > 0 or B < 0:
        raise ValueError("need A > 0 and B >= 0")
    omega = math.sqrt(A * (1.0 + B * B))
    lam = omega - 1.0

    def gamma(Y):
        return np.exp(-0.5 * omega * np.asarray(Y, dtype=float) ** 2)

    if R is None:
        R = math.sqrt(2.0 * 27.7 / omega)  # Gamma0(R) ~ 1e-12
    if h is None:
        h = R / 500.0
    Y = np.linspace(-R, R, int(round(2 * R / h)) + 1)
    return EigenPair(lam, Y, gamma(Y), "whole_line", float(R), float(Y[1] - Y[0]), 0.0, exact=gamma)


def critical_speed(lambda0: float, B: float) -> float:
    """``c* = 2 sqrt(-lambda0 / (1 + B^2))``."""
    if lambda0 >= 0:
        raise NotInvading(f"no invasion for lambda0 = {lambda0} >= 0")
    return 2.0 * math.sqrt(-lambda0 / (1.0 + B * B))


@dataclass
class DecayReport:
    slope: float
    kappa_min: float
    passed: bool
    n_points: int


def decay_certificate(pair: EigenPair, kappa_min: float = 0.1) -> DecayReport:
    """Fit ``log Gamma`` against ``|Y|`` on the outer third of the domain."""
    if pair.domain != "whole_line":
        raise NotApplicable("decay certificate needs a whole-line eigenpair")
    Y, g = pair.Y, pair.gamma
    sel = (np.abs(Y) >= 2.0 * pair.R / 3.0) & (g > 0)
    if np.count_nonzero(sel) < 3:
        raise NotApplicable("too few positive samples in the outer third")
    slope = float(np.polyfit(np.abs(Y[sel]), np.log(g[sel]), 1)[0])
    return DecayReport(slope, kappa_min, slope <= -kappa_min, int(np.count_nonzero(sel)))


def eigen_summary(pair: EigenPair) -> dict:
    return {"lambda": pair.lam, "R": pair.R, "h": pair.grid_h, "residual": pair.residual}


def write_eigen(pair: EigenPair, csv_path, json_path=None) -> None:
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["Y", "gamma"])
        for y, g in zip(pair.Y, pair.gamma):
            w.writerow([repr(float(y)), repr(float(g))])
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(eigen_summary(pair), fh, indent=2)
