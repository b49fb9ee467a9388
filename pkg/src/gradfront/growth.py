"""Growth profiles, competition kernels, initial-data tails and builders.

Tail families follow their asymptotic formula exactly on ``[xi0, inf)`` and
join the left plateau through a monotone C1 cubic on ``[xi0 - 1, xi0]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import GridMismatch, LevelOutOfRange, Unsupported
from .grids import Grid2D, Rotation, ScalarField2D, to_xy

CONFINEMENT_DELTAS = (0.5, 1.0, 2.0)

# ---------------------------------------------------------------- growth ----


@dataclass(frozen=True)
class GrowthProfile:
    """Growth rate ``r(z)`` as a function of the distance ``z = y - B x`` to the optimum.

    ``quadratic`` is ``1 - A z**2``.  ``tabulated`` interpolates ``(z, r)``
    samples linearly; beyond the table the outermost segment is continued when
    it decreases outward, otherwise the end value is held.
    """

    kind: str
    A: float = 0.0
    z: Optional[tuple] = None
    r: Optional[tuple] = None
    require_confining: bool = True

    def __post_init__(self):
        if self.kind == "quadratic":
            if not self.A > 0:
                raise ValueError("A must be positive")
        elif self.kind == "tabulated":
            if self.z is None or self.r is None or len(self.z) != len(self.r) or len(self.z) < 2:
                raise ValueError("tabulated profile needs >= 2 matching (z, r) samples")
            z = np.asarray(self.z, dtype=float)
            if np.any(np.diff(z) <= 0):
                raise ValueError("tabulated z must be strictly increasing")
            object.__setattr__(self, "z", tuple(map(float, self.z)))
            object.__setattr__(self, "r", tuple(map(float, self.r)))
            if self.require_confining and not self.confinement_radii():
                raise ValueError("tabulated profile is not confining on the probe ladder")
        else:
            raise ValueError(f"unknown growth kind {self.kind!r}")

    @classmethod
    def quadratic(cls, A: float) -> "GrowthProfile":
        return cls("quadratic", A=A)

    @classmethod
    def tabulated(cls, z, r, require_confining: bool = True) -> "GrowthProfile":
        return cls("tabulated", z=tuple(z), r=tuple(r), require_confining=require_confining)

    @property
    def r_max(self) -> float:
        if self.kind == "quadratic":
            return 1.0
        return max(self.r)

    def __call__(self, z):
        return eval_growth(self, z)

    def r_min(self, lo: float, hi: float, n: int = 2001) -> float:
        """Minimum of ``r`` over ``[lo, hi]`` (dense sampling)."""
        return float(np.min(self(np.linspace(lo, hi, n))))

    def confinement_radii(self) -> dict:
        """``{delta: R}`` with ``r <= -delta`` on the probed ``|z| >= R``; empty if any delta fails."""
        if self.kind == "quadratic":
            return {d: math.sqrt((1.0 + d) / self.A) for d in CONFINEMENT_DELTAS}
        extent = max(abs(self.z[0]), abs(self.z[-1]))
        probe = np.linspace(0.0, 10.0 * extent, 4001)
        worst = np.maximum(self(probe), self(-probe))
        # tail_max[k] = max of r over |z| >= probe[k]
        tail_max = np.maximum.accumulate(worst[::-1])[::-1]
        radii = {}
        for d in CONFINEMENT_DELTAS:
            ok = np.nonzero(tail_max <= -d)[0]
            if ok.size == 0 or ok[0] == probe.size - 1:
                return {}
            radii[d] = float(probe[ok[0]])
        return radii


def eval_growth(profile: GrowthProfile, z):
    z = np.asarray(z, dtype=float)
    if profile.kind == "quadratic":
        out = 1.0 - profile.A * z * z
    else:
        zt = np.asarray(profile.z)
        rt = np.asarray(profile.r)
        out = np.interp(z, zt, rt)
        lo_slope = (rt[1] - rt[0]) / (zt[1] - zt[0])
        hi_slope = (rt[-1] - rt[-2]) / (zt[-1] - zt[-2])
        left = z < zt[0]
        right = z > zt[-1]
        if lo_slope > 0:
            out = np.where(left, rt[0] + lo_slope * (z - zt[0]), out)
        if hi_slope < 0:
            out = np.where(right, rt[-1] + hi_slope * (z - zt[-1]), out)
    return float(out) if out.ndim == 0 else out


def load_growth_csv(path) -> GrowthProfile:
    """Tabulated profile from a two-column CSV with a header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r and any(c.strip() for c in r)]
    try:
        [float(c) for c in header]
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: header row required (got numeric first row)")
    if len(header) != 2:
        raise ValueError(f"{path}: expected two columns, got {len(header)}")
    z, r = zip(*[(float(a), float(b)) for a, b in body])
    return GrowthProfile.tabulated(z, r)


def rotated_growth(profile: GrowthProfile, B: float) -> Callable:
    """``r~(Y) = r(sqrt(1 + B^2) Y)``."""
    norm = math.sqrt(1.0 + B * B)
    return lambda Y: eval_growth(profile, norm * np.asarray(Y, dtype=float))


# ---------------------------------------------------------------- kernel ----


@dataclass(frozen=True)
class CompetitionKernel:
    """Competition kernel ``K(t, x, y, y')``.

    ``constant_one`` is ``K = 1``.  ``bounded`` wraps a vectorised evaluator
    with declared bounds ``k_minus <= K <= k_plus``.
    """

    kind: str = "constant_one"
    k_minus: float = 1.0
    k_plus: float = 1.0
    evaluator: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "constant_one":
            object.__setattr__(self, "k_minus", 1.0)
            object.__setattr__(self, "k_plus", 1.0)
        elif self.kind == "bounded":
            if not (0 < self.k_minus <= self.k_plus):
                raise ValueError("need 0 < k_minus <= k_plus")
            if self.evaluator is None:
                raise ValueError("bounded kernel needs an evaluator")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    def __call__(self, t, x, y, y_prime):
        if self.kind == "constant_one":
            return np.ones(np.broadcast(x, y, y_prime).shape)
        return np.asarray(self.evaluator(t, x, y, y_prime), dtype=float)

    def spot_check(self, n: int = 1000, seed: int = 0, scale: float = 50.0) -> bool:
        """Evaluate on random arguments and check the declared bounds."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.0, scale, n)
        x, y, yp = (rng.uniform(-scale, scale, n) for _ in range(3))
        k = self(t, x, y, yp)
        return bool(np.all(k >= self.k_minus) and np.all(k <= self.k_plus))


# ------------------------------------------------------------------ tails ----

HEAVY_KINDS = ("light_heavy", "algebraic", "logarithmic")
FORMULA_KINDS = HEAVY_KINDS + ("exponential",)
TAIL_KINDS = FORMULA_KINDS + ("compact", "constant")

_DEFAULT_X0 = {"exponential": 0.0, "light_heavy": 1.0, "algebraic": 1.0, "logarithmic": 2.0}
_XI0_STEP = 1.0 / 64.0


@dataclass(frozen=True)
class TailFamily:
    """Front-like initial profile ``w(X)``: plateau on the left, a tail on the right.

    Parameters by kind (``C`` defaults to 1):

    * ``exponential``: ``C exp(-lam X)``
    * ``light_heavy``: ``C exp(-b X**a)``, ``0 < a < 1``
    * ``algebraic``: ``C X**(-a)``
    * ``logarithmic``: ``C (ln X)**(-a)``, ``x0 > 1``
    * ``compact``: plateau, stepping down to 0 on ``[support_hi - 1, support_hi]``
    * ``constant``: ``level`` everywhere
    """

    kind: str
    C: float = 1.0
    a: float = 1.0
    b: float = 1.0
    lam: float = 1.0
    x0: Optional[float] = None
    support_hi: float = 0.0
    level: float = 1.0
    plateau: float = 1.0
    xi0: float = field(init=False, default=math.nan)

    def __post_init__(self):
        k = self.kind
        if k not in TAIL_KINDS:
            raise ValueError(f"unknown tail kind {k!r}")
        if k == "constant":
            if not self.level > 0:
                raise ValueError("constant level must be positive")
            object.__setattr__(self, "plateau", float(self.level))
            return
        if not self.plateau > 0:
            raise ValueError("plateau must be positive")
        if k == "compact":
            object.__setattr__(self, "xi0", float(self.support_hi))
            return
        if not self.C > 0:
            raise ValueError("C must be positive")
        if k == "exponential" and not self.lam > 0:
            raise ValueError("lam must be positive")
        if k == "light_heavy" and not (self.b > 0 and 0 < self.a < 1):
            raise ValueError("light_heavy needs b > 0 and 0 < a < 1")
        if k in ("algebraic", "logarithmic") and not self.a > 0:
            raise ValueError("a must be positive")
        x0 = _DEFAULT_X0[k] if self.x0 is None else float(self.x0)
        if k == "logarithmic" and not x0 > 1:
            raise ValueError("logarithmic tail needs x0 > 1")
        if k in ("light_heavy", "algebraic") and not x0 > 0:
            raise ValueError("x0 must be positive")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xi0", self._find_xi0(x0))

    def _find_xi0(self, start: float) -> float:
        # first lattice point right of start where the cubic join is monotone
        xi = start
        for _ in range(1_000_000):
            f, d1, _ = self.formula(xi)
            gap = self.plateau - f
            if gap > 0 and -d1 <= 3.0 * gap:
                return xi
            xi += _XI0_STEP
        raise ValueError("could not place the plateau blend")

    # formula and its first two derivatives on [xi0, inf)
    def formula(self, X):
        X = np.asarray(X, dtype=float)
        C, a, b = self.C, self.a, self.b
        if self.kind == "exponential":
            f = C * np.exp(-self.lam * X)
            return f, -self.lam * f, self.lam ** 2 * f
        if self.kind == "light_heavy":
            f = C * np.exp(-b * X ** a)
            g = a * b * X ** (a - 1.0)
            return f, -g * f, f * (g * g - a * b * (a - 1.0) * X ** (a - 2.0))
        if self.kind == "algebraic":
            f = C * X ** (-a)
            return f, -a * f / X, a * (a + 1.0) * f / (X * X)
        if self.kind == "logarithmic":
            L = np.log(X)
            f = C * L ** (-a)
            d1 = -a * f / (L * X)
            d2 = a * f * ((a + 1.0) / L + 1.0) / L / X / X
            return f, d1, d2
        raise Unsupported(f"{self.kind} tail has no formula")

    def curvature_ratio(self, X):
        """``w''(X) / w(X)`` on the formula range, evaluated without forming ``w``."""
        X = np.asarray(X, dtype=float)
        a, b = self.a, self.b
        if self.kind == "exponential":
            return np.full(X.shape, self.lam ** 2)
        if self.kind == "light_heavy":
            g = a * b * X ** (a - 1.0)
            return g * g - a * b * (a - 1.0) * X ** (a - 2.0)
        if self.kind == "algebraic":
            return a * (a + 1.0) / (X * X)
        if self.kind == "logarithmic":
            L = np.log(X)
            return a * ((a + 1.0) / L + 1.0) / (L * X * X)
        raise Unsupported(f"{self.kind} tail has no formula")

    def log_formula(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == "exponential":
            return math.log(self.C) - self.lam * X
        if self.kind == "light_heavy":
            return math.log(self.C) - self.b * X ** self.a
        if self.kind == "algebraic":
            return math.log(self.C) - self.a * np.log(X)
        if self.kind == "logarithmic":
            return math.log(self.C) - self.a * np.log(np.log(X))
        raise Unsupported(f"{self.kind} tail has no formula")

    def _blend_nodes(self):
        if self.kind == "compact":
            return 0.0, 0.0
        f, d1, _ = self.formula(self.xi0)
        return float(f), float(d1)

    def _blend(self, s):
        # cubic Hermite on s in [0, 1]: (plateau, slope 0) -> (f, f')
        fb, m1 = self._blend_nodes()
        s2, s3 = s * s, s * s * s
        return (2 * s3 - 3 * s2 + 1) * self.plateau + (3 * s2 - 2 * s3) * fb + (s3 - s2) * m1

    def __call__(self, X):
        return eval_tail(self, X)


def eval_tail(f: TailFamily, X):
    X = np.asarray(X, dtype=float)
    if f.kind == "constant":
        out = np.full(X.shape, f.level)
    else:
        out = np.full(X.shape, f.plateau)
        s = X - (f.xi0 - 1.0)
        mid = (s > 0) & (s < 1)
        out[mid] = f._blend(s[mid])
        right = X >= f.xi0
        if f.kind == "compact":
            out[right] = 0.0
        else:
            out[right] = f.formula(X[right])[0]
    return float(out) if out.ndim == 0 else out


def log_tail(f: TailFamily, X):
    """``ln w(X)`` without underflow far in the tail."""
    X = np.asarray(X, dtype=float)
    if f.kind in FORMULA_KINDS:
        right = X >= f.xi0
        out = np.empty(X.shape)
        out[right] = f.log_formula(X[right])
        with np.errstate(divide="ignore"):
            out[~right] = np.log(eval_tail(f, X[~right]))
    else:
        with np.errstate(divide="ignore"):
            out = np.log(np.asarray(eval_tail(f, X), dtype=float))
    return float(out) if out.ndim == 0 else out


def _check_level(f: TailFamily, level: float):
    if f.kind in ("compact", "constant"):
        raise Unsupported(f"tail_inverse is not defined for {f.kind} tails")
    if not (0.0 < level < f.plateau):
        raise LevelOutOfRange(f"level {level!r} outside (0, {f.plateau})")


def _blend_inverse(f: TailFamily, level: float) -> float:
    s = brentq(lambda s: f._blend(s) - level, 0.0, 1.0, xtol=1e-15, rtol=1e-15, maxiter=200)
    return f.xi0 - 1.0 + s


def _formula_inverse(f: TailFamily, level: float) -> float:
    q = math.log(f.C) - math.log(level)  # ln(C / level) > 0 in the formula range
    if f.kind == "exponential":
        return q / f.lam
    if f.kind == "light_heavy":
        return (q / f.b) ** (1.0 / f.a)
    if f.kind == "algebraic":
        return math.exp(q / f.a)
    return math.exp(math.exp(q / f.a))  # logarithmic; OverflowError past ~e^709


def tail_inverse(f: TailFamily, level: float) -> tuple[float, float]:
    """Preimage ``{X : w(X) = level}`` as ``(x_min, x_max)``.

    The tails are nonincreasing and strictly decreasing right of the plateau,
    so both ends coincide.  Levels far enough in a logarithmic tail overflow
    a float; use :func:`log_tail_inverse` there.
    """
    _check_level(f, level)
    if level < float(f.formula(f.xi0)[0]):
        x = _formula_inverse(f, level)
    else:
        x = _blend_inverse(f, level)
    return x, x


def log_tail_inverse(f: TailFamily, log_level: float) -> float:
    """``ln`` of the preimage point for level ``exp(log_level)``; stays finite when the point overflows."""
    level = math.exp(log_level)
    if level > 0 and level >= float(f.formula(f.xi0)[0]):
        x = tail_inverse(f, level)[0]
        return math.log(x) if x > 0 else -math.inf
    if f.kind in ("compact", "constant"):
        raise Unsupported(f"tail_inverse is not defined for {f.kind} tails")
    if not log_level < math.log(f.plateau):
        raise LevelOutOfRange(f"level exp({log_level}) outside (0, {f.plateau})")
    q = math.log(f.C) - log_level
    if f.kind == "exponential":
        return math.log(q / f.lam)
    if f.kind == "light_heavy":
        return math.log(q / f.b) / f.a
    if f.kind == "algebraic":
        return q / f.a
    return math.exp(q / f.a)


@dataclass
class QReport:
    passed: bool
    xs: np.ndarray
    ratios: np.ndarray
    kind: str

    @property
    def limit_estimate(self) -> float:
        return float(self.ratios[-1])


def check_condition_Q(f: TailFamily, n_points: int = 24, span: float = 1e4, tol: float = 1e-3) -> QReport:
    """Probe ``w''/w -> 0`` on a geometric ladder right of ``xi0``."""
    if f.kind not in FORMULA_KINDS:
        raise Unsupported(f"condition (Q) probe needs a formula tail, got {f.kind}")
    start = 2.0 * max(f.xi0, 1.0)
    xs = start * np.geomspace(1.0, span, n_points)
    ratios = f.curvature_ratio(xs)
    mags = np.abs(ratios)
    tail = mags[n_points // 2:]
    passed = bool(np.all(np.isfinite(mags)) and mags[-1] < tol and np.all(np.diff(tail) <= 1e-15))
    return QReport(passed, xs, ratios, f.kind)


def ordering_onset(f: TailFamily, rate_a: float, rate_b: float, gamma_a: float, gamma_b: float,
                   shift: float, t_ladder) -> Optional[float]:
    """Earliest ladder time from which ``min w^-1(Ga e^{-a t}) + shift <= min w^-1(Gb e^{-b t})`` holds.

    Times where a level is not below the plateau are skipped.  Returns None if
    the inequality fails at the last ladder time.
    """
    if not 0 < rate_a < rate_b:
        raise ValueError("need 0 < rate_a < rate_b")
    ok = []
    for t in t_ladder:
        la = math.log(gamma_a) - rate_a * t
        lb = math.log(gamma_b) - rate_b * t
        if la >= math.log(f.plateau) or lb >= math.log(f.plateau):
            ok.append((t, False))
            continue
        ok.append((t, _shifted_le(log_tail_inverse(f, la), log_tail_inverse(f, lb), shift)))
    onset = None
    for t, good in reversed(ok):
        if not good:
            break
        onset = t
    return onset


def _shifted_le(lxa: float, lxb: float, shift: float) -> bool:
    """``exp(lxa) + shift <= exp(lxb)`` decided in log space (the points may overflow a float)."""
    if shift == 0:
        return lxa <= lxb
    if shift > 0:
        return lxb >= float(np.logaddexp(lxa, math.log(shift)))
    gap = math.log(-shift)
    if lxa <= gap:
        return True
    return lxb >= lxa + math.log1p(-math.exp(gap - lxa))


# ---------------------------------------------------------- initial data ----


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial density as a tail profile times a trait profile.

    ``along_X``: ``v0(X, Y) = tail(X) * profile(Y)``.
    ``along_x``: ``n0(x, y) = tail(x) * profile``, with the indicator taken in
    the laboratory trait ``y`` and the eigen profile in ``Y``.
    """

    tail: TailFamily
    orientation: str = "along_X"
    y_profile: str = "indicator"
    sigma_minus: float = -1.0
    sigma_plus: float = 1.0

    def __post_init__(self):
        if self.orientation not in ("along_X", "along_x"):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.y_profile not in ("indicator", "eigen_profile"):
            raise ValueError(f"unknown y_profile {self.y_profile!r}")
        if not self.sigma_minus < self.sigma_plus:
            raise ValueError("need sigma_minus < sigma_plus")


def _indicator(values, lo, hi):
    eps = 1e-12 * max(1.0, abs(lo), abs(hi))
    return ((values >= lo - eps) & (values <= hi + eps)).astype(float)


def build_initial_field(spec: InitialDataSpec, grid: Grid2D, rot: Rotation, eig=None) -> ScalarField2D:
    if spec.y_profile == "eigen_profile" and eig is None:
        raise ValueError("eigen_profile needs an EigenPair")
    X, Y = grid.mesh()
    if spec.y_profile == "indicator":
        width = spec.sigma_plus - spec.sigma_minus
        if spec.orientation == "along_X":
            nodes = int(np.count_nonzero(_indicator(grid.gy.points, spec.sigma_minus, spec.sigma_plus)))
        else:
            nodes = int(math.floor(width / max(grid.gx.h, grid.gy.h))) + 1
        if nodes < 4:
            raise GridMismatch(f"indicator [{spec.sigma_minus}, {spec.sigma_plus}] spans only {nodes} grid points")
    if spec.orientation == "along_X":
        base = eval_tail(spec.tail, X)
        if spec.y_profile == "indicator":
            prof = _indicator(Y, spec.sigma_minus, spec.sigma_plus)
        else:
            prof = eig.evaluate(Y)
    else:
        x, y = to_xy(X, Y, rot)
        base = eval_tail(spec.tail, x)
        if spec.y_profile == "indicator":
            prof = _indicator(y, spec.sigma_minus, spec.sigma_plus)
        else:
            prof = eig.evaluate(Y)
    return ScalarField2D(grid, np.maximum(base * prof, 0.0), 0.0)
