"""Time integration of the nonlocal space-trait model in rotated coordinates.

The density ``v(t, X, Y)`` solves::

    v_t = v_XX + v_YY + (r~(Y) - I[v]) v,    I[v] = int K n(t, x, y') dy'

where the integral runs along the laboratory vertical line through the
point.  Each step is a Strang splitting ``R(dt/2) D(dt) R(dt/2)``:

* ``D``: Peaceman-Rachford ADI (Crank-Nicolson in each direction), with the
  first ``startup_steps`` steps replaced by backward-Euler half steps to damp
  the high-frequency content of discontinuous data;
* ``R``: pointwise exponential update ``v exp(tau (r~ - I[v*]))`` with
  ``I`` evaluated at an exponential midpoint predictor ``v*``.

Boundary conditions: zero-flux in ``X`` (the window ends sit on the plateau
or in the far tail) and ``v = 0`` at the trait edges ``Y = Y_lo, Y_hi``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded, solveh_banded
from scipy.special import erf, erfc

from .errors import Blowup, PreconditionFailed, WindowTooNarrow
from .grids import (
    DEFAULT_TRUNCATION_TOL,
    Grid1D,
    Grid2D,
    Rotation,
    ScalarField2D,
    lab_x_range,
    trait_mass_profile,
)
from .growth import CompetitionKernel, GrowthProfile, rotated_growth

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GrowthScenario:
    """Growth profile, competition kernel and gradient slope of one model instance."""

    profile: GrowthProfile
    B: float
    kernel: CompetitionKernel = field(default_factory=CompetitionKernel)
    nonlocal_competition: bool = True

    @property
    def rot(self) -> Rotation:
        return Rotation(self.B)

    def r_tilde(self, Y):
        return rotated_growth(self.profile, self.B)(Y)

    def linear(self) -> "GrowthScenario":
        """Same model without competition (the linear comparison problem)."""
        return replace(self, nonlocal_competition=False)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    window: Grid2D
    window_policy: str = "fixed"
    translate_threshold: Optional[float] = None
    quadrature_tol: float = DEFAULT_TRUNCATION_TOL
    output_stride: int = 1
    startup_steps: int = 2
    keep_fields: bool = False
    trigger_fraction: float = 0.7
    shift_fraction: float = 0.25
    truncate_initial: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.window_policy not in ("fixed", "translate"):
            raise ValueError(f"unknown window policy {self.window_policy!r}")
        if self.window_policy == "translate" and not (self.translate_threshold and self.translate_threshold > 0):
            raise ValueError("translate policy needs a positive threshold")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ValueError("output_stride must be a positive integer")

    @property
    def y_half_width(self) -> float:
        return max(abs(self.window.gy.lo), abs(self.window.gy.hi))

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9))

    def advisories(self, eig=None) -> list[str]:
        """Soft checks: explicit-part step margin and trait-window width."""
        notes = []
        h = min(self.window.gx.h, self.window.gy.h)
        if self.dt > 0.25 * h * h:
            notes.append(f"dt={self.dt} exceeds h^2/4={0.25 * h * h:.3g} (advisory; diffusion is implicit)")
        if eig is not None:
            edge = float(np.max(eig.evaluate(np.array([self.window.gy.lo, self.window.gy.hi]))))
            if edge >= self.quadrature_tol:
                notes.append(f"Gamma0 at trait-window edge is {edge:.2e} >= quadrature_tol")
        return notes


def default_dt(h: float, r_max: float, k_plus: float, N_inf: float) -> float:
    return min(0.25 * h * h, 0.1 / (r_max + k_plus * N_inf))


@dataclass
class TailBounds:
    N_inf: float
    C_tail: float
    kappa: float

    @classmethod
    def from_initial(cls, v0: ScalarField2D, scenario: GrowthScenario, kappa: float = 1.0) -> "TailBounds":
        """``N_inf = max(sup_x N0, r_max / k_minus)``; ``C_tail`` is the least constant with
        ``v0 <= C_tail exp(-kappa |y - Bx|)`` on the grid."""
        rot = scenario.rot
        xs = _lab_grid(v0.grid, rot)
        mass0 = float(np.max(trait_mass_profile(v0, rot, xs, tol=math.inf)))
        n_inf = max(mass0, scenario.profile.r_max / scenario.kernel.k_minus)
        _, Y = v0.grid.mesh()
        c = float(np.max(v0.values * np.exp(kappa * rot.norm * np.abs(Y))))
        return cls(n_inf, max(c, 1e-300), kappa)


@dataclass
class Diagnostics:
    steps: int = 0
    clamped_total: int = 0
    clamp_fraction_max: float = 0.0
    min_value: float = 0.0
    max_value: float = 0.0
    mass_max: float = 0.0
    outer_tail_ratio_max: float = 0.0
    translations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "clamped_total": self.clamped_total,
            "clamp_fraction_max": self.clamp_fraction_max,
            "min_value": self.min_value,
            "max_value": self.max_value,
            "mass_max": self.mass_max,
            "outer_tail_ratio_max": self.outer_tail_ratio_max,
            "translations": [dict(t) for t in self.translations],
        }


@dataclass
class SimulationState:
    field: ScalarField2D
    t: float = 0.0
    window_offset_X: float = 0.0
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


# ------------------------------------------------------------ samplers ----


def _lab_grid(grid: Grid2D, rot: Rotation) -> np.ndarray:
    lo, hi = lab_x_range(grid, rot)
    h = grid.gx.h / rot.norm
    n = int(math.floor((hi - lo) / h + 1e-9)) + 1
    return lo + h * np.arange(n)


class _LineSampler:
    """Precomputed linear-interpolation stencil for the line integrals.

    ``aux_x`` covers every laboratory ``x`` met by a window point; ``I`` at the
    grid points is interpolated back from the per-line masses.
    """

    def __init__(self, grid: Grid2D, rot: Rotation):
        gx, gy = grid.gx, grid.gy
        self.grid, self.rot = grid, rot
        s = gy.points
        h_aux = gx.h / rot.norm
        x_lo = (gx.lo - rot.B * gy.hi) / rot.norm
        x_hi = (gx.hi - rot.B * gy.lo) / rot.norm
        n_aux = int(math.ceil((x_hi - x_lo) / h_aux - 1e-9)) + 1
        self.aux_x = x_lo + h_aux * np.arange(n_aux)
        self.h_aux = h_aux
        # gather stencil for v along each aux line
        Xq = rot.norm * self.aux_x[:, None] + rot.B * s[None, :]
        pos = np.clip((Xq - gx.lo) / gx.h, 0.0, gx.n_points - 1.0)
        i0 = np.minimum(pos.astype(np.intp), gx.n_points - 2)
        self.line_w = pos - i0
        j = np.broadcast_to(np.arange(gy.n_points), Xq.shape)
        self.line_flat0 = np.ravel_multi_index((i0, j), grid.shape)
        self.line_flat1 = self.line_flat0 + gy.n_points
        # scatter stencil from aux lines back to grid points
        X, Y = grid.mesh()
        xg = (X - rot.B * Y) / rot.norm
        self.x_mesh = xg
        self.y_mesh = (rot.B * X + Y) / rot.norm
        p = np.clip((xg - x_lo) / h_aux, 0.0, n_aux - 1.0)
        k0 = np.minimum(p.astype(np.intp), n_aux - 2)
        self.back_k0, self.back_w = k0, p - k0

    def line_values(self, v: np.ndarray) -> np.ndarray:
        flat = v.ravel()
        return (1.0 - self.line_w) * flat[self.line_flat0] + self.line_w * flat[self.line_flat1]

    def line_mass(self, v: np.ndarray) -> np.ndarray:
        return self.rot.norm * np.trapezoid(self.line_values(v), dx=self.grid.gy.h, axis=1)

    def to_grid(self, per_line: np.ndarray) -> np.ndarray:
        k0, w = self.back_k0, self.back_w
        return (1.0 - w) * per_line[k0] + w * per_line[k0 + 1]

    def integral(self, v: np.ndarray, kernel: CompetitionKernel, t: float, chunk: int = 4096) -> np.ndarray:
        if kernel.kind == "constant_one":
            return self.to_grid(self.line_mass(v))
        lines = self.line_values(v)
        s = self.grid.gy.points
        out = np.empty(v.size)
        xf, yf = self.x_mesh.ravel(), self.y_mesh.ravel()
        k0f, wf = self.back_k0.ravel(), self.back_w.ravel()
        for a in range(0, v.size, chunk):
            b = min(a + chunk, v.size)
            vals = (1.0 - wf[a:b, None]) * lines[k0f[a:b]] + wf[a:b, None] * lines[k0f[a:b] + 1]
            x = xf[a:b, None]
            yp = self.rot.B * x + self.rot.norm * s[None, :]
            kv = kernel(t, x, yf[a:b, None], yp) * vals
            out[a:b] = self.rot.norm * np.trapezoid(kv, dx=self.grid.gy.h, axis=1)
        return out.reshape(v.shape)


def nonlocal_term(field: ScalarField2D, kernel: CompetitionKernel, rot: Rotation,
                  tol: float = DEFAULT_TRUNCATION_TOL) -> ScalarField2D:
    """``I[v](X, Y) = int K(t, x, y, y') n(t, x, y') dy'`` at every grid point."""
    sampler = _LineSampler(field.grid, rot)
    lines = sampler.line_values(field.values)
    vmax = float(np.max(np.abs(field.values)))
    if vmax > 0 and max(np.max(np.abs(lines[:, 0])), np.max(np.abs(lines[:, -1]))) > tol * vmax:
        raise WindowTooNarrow("field not negligible at the trait-window edge")
    return field.with_values(sampler.integral(field.values, kernel, field.time_stamp))


# ------------------------------------------------------------ stepping ----


def _neumann_banded(n: int, c: float) -> np.ndarray:
    """Banded ``I - c * D2`` with reflecting ends (for solve_banded)."""
    ab = np.zeros((3, n))
    ab[0, 1:] = -c
    ab[1, :] = 1.0 + 2.0 * c
    ab[2, :-1] = -c
    ab[0, 1] = -2.0 * c
    ab[2, -2] = -2.0 * c
    return ab


def _dirichlet_banded(n: int, c: float) -> np.ndarray:
    """Upper-form SPD banded ``I - c * D2`` on interior nodes (for solveh_banded)."""
    ab = np.empty((2, n))
    ab[0, 0] = 0.0
    ab[0, 1:] = -c
    ab[1, :] = 1.0 + 2.0 * c
    return ab


def _d2x(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    out[1:-1] = v[2:] - 2.0 * v[1:-1] + v[:-2]
    out[0] = 2.0 * (v[1] - v[0])
    out[-1] = 2.0 * (v[-2] - v[-1])
    return out


def _d2y(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    out[:, 1:-1] = v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]
    return out


class Stepper:
    """Reusable integrator for one (scenario, config) pair."""

    def __init__(self, scenario: GrowthScenario, config: SolverConfig):
        self.scenario, self.config = scenario, config
        self.rot = scenario.rot
        self._setup(config.window)

    def _setup(self, grid: Grid2D):
        self.grid = grid
        dt = self.config.dt
        nx, ny = grid.shape
        cx = 0.5 * dt / grid.gx.h ** 2
        cy = 0.5 * dt / grid.gy.h ** 2
        self.cx, self.cy = cx, cy
        self.ax_cn = _neumann_banded(nx, cx)
        self.ay_cn = _dirichlet_banded(ny - 2, cy)
        self.ax_be, self.ay_be = self.ax_cn, self.ay_cn  # half-step backward Euler uses the same c
        self.r_row = np.asarray(self.scenario.r_tilde(grid.gy.points), dtype=float)[None, :]
        self.sampler = _LineSampler(grid, self.rot)
        self.lab_x = _lab_grid(grid, self.rot)

    # -- pieces
    def competition(self, v: np.ndarray, t: float) -> np.ndarray:
        if not self.scenario.nonlocal_competition:
            return 0.0
        return self.sampler.integral(v, self.scenario.kernel, t)

    def react(self, v: np.ndarray, t: float, tau: float) -> np.ndarray:
        g0 = self.r_row - self.competition(v, t)
        if not self.scenario.nonlocal_competition:
            return v * np.exp(tau * g0)
        mid = v * np.exp(0.5 * tau * g0)
        g1 = self.r_row - self.competition(mid, t + 0.5 * tau)
        return v * np.exp(tau * g1)

    def _solve_x(self, rhs):
        return solve_banded((1, 1), self.ax_cn, rhs, check_finite=False)

    def _solve_y(self, rhs):
        out = np.zeros_like(rhs)
        out[:, 1:-1] = solveh_banded(self.ay_cn, rhs[:, 1:-1].T, check_finite=False).T
        return out

    def diffuse(self, v: np.ndarray, startup: bool) -> np.ndarray:
        if startup:
            for _ in range(2):
                v = self._solve_y(self._solve_x(v))
            return v
        half = self._solve_x(v + self.cy * _d2y(v))
        return self._solve_y(half + self.cx * _d2x(half))

    def advance(self, v: np.ndarray, t: float, step_index: int) -> np.ndarray:
        dt = self.config.dt
        v = self.react(v, t, 0.5 * dt)
        v = self.diffuse(v, step_index < self.config.startup_steps)
        v[:, 0] = 0.0
        v[:, -1] = 0.0
        return self.react(v, t + 0.5 * dt, 0.5 * dt)

    def lab_mass(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(x, N(t, x))`` on the laboratory grid lying fully inside the window."""
        per_line = self.sampler.line_mass(v)
        return self.lab_x, np.interp(self.lab_x, self.sampler.aux_x, per_line)

    def column_front(self, v: np.ndarray, mu: float) -> Optional[float]:
        col = self.rot.norm * np.trapezoid(v, dx=self.grid.gy.h, axis=1)
        above = np.nonzero(col >= mu)[0]
        if above.size == 0:
            return None
        return float(self.grid.gx.points[above[-1]])

    def translate(self, state: SimulationState, v: np.ndarray) -> np.ndarray:
        gx = self.grid.gx
        k = max(1, int(round(self.config.shift_fraction * (gx.n_points - 1))))
        col = np.trapezoid(v, dx=self.grid.gy.h, axis=1)
        ref = col[k]
        dev = float(np.max(np.abs(col[:k] - ref)) / ref) if ref > 0 else math.inf
        if dev > 1e-3:
            log.warning("window translation at t=%.3f drops columns %.2e away from the plateau", state.t, dev)
        out = np.zeros_like(v)
        out[:-k] = v[k:]
        shift = k * gx.h
        self._setup(Grid2D(gx.shifted(shift), self.grid.gy))
        state.window_offset_X += shift
        state.diagnostics.translations.append({"t": state.t, "offset_X": state.window_offset_X, "dropped_deviation": dev})
        return out


def blowup_threshold(v0: ScalarField2D, bounds: TailBounds, rot: Rotation) -> float:
    """``1e3 * N_inf / w`` with ``w`` the effective trait width of the initial data."""
    vmax = float(np.max(v0.values))
    if vmax <= 0:
        return math.inf
    xs = _lab_grid(v0.grid, rot)
    width = float(np.max(trait_mass_profile(v0, rot, xs, tol=math.inf))) / vmax
    return 1e3 * bounds.N_inf / max(width, v0.grid.gy.h)


def step(state: SimulationState, scenario: GrowthScenario, config: SolverConfig,
         stepper: Optional[Stepper] = None, threshold: float = math.inf) -> SimulationState:
    """Advance one time step; returns a new state (the input is not modified)."""
    st = stepper or Stepper(scenario, replace(config, window=state.field.grid))
    diag = replace(state.diagnostics, translations=list(state.diagnostics.translations))
    v = st.advance(np.array(state.field.values), state.t, diag.steps)
    neg = v < 0.0
    n_neg = int(np.count_nonzero(neg))
    diag.min_value = min(diag.min_value, float(np.min(v)))
    if n_neg:
        v[neg] = 0.0
    diag.clamped_total += n_neg
    diag.clamp_fraction_max = max(diag.clamp_fraction_max, n_neg / v.size)
    vmax = float(np.max(v))
    if not math.isfinite(vmax) or vmax > threshold:
        raise Blowup(f"max value {vmax:.3e} exceeds {threshold:.3e} at t={state.t + config.dt:.4f}")
    diag.max_value = max(diag.max_value, vmax)
    diag.steps += 1
    t = round(state.t + config.dt, 12)
    return SimulationState(ScalarField2D(st.grid, v, t), t, state.window_offset_X, diag)


@dataclass
class Snapshot:
    t: float
    x: np.ndarray
    N: np.ndarray
    sup_norm: float
    offset_X: float
    field: Optional[ScalarField2D] = None


@dataclass
class SimulationResult:
    snapshots: list
    final: SimulationState
    bounds: TailBounds

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def sup_norms(self) -> np.ndarray:
        return np.array([s.sup_norm for s in self.snapshots])


def simulate(v0: ScalarField2D, scenario: GrowthScenario, config: SolverConfig,
             blowup_check: bool = True) -> SimulationResult:
    """Integrate from ``v0`` to ``config.t_end``, recording a snapshot every ``output_stride`` steps."""
    if not v0.is_density:
        raise ValueError("initial density must be non-negative")
    if v0.grid != config.window:
        raise ValueError("initial field grid must equal the solver window")
    rot = scenario.rot
    edge = max(np.max(v0.values[:, 0]), np.max(v0.values[:, -1]))
    vmax0 = float(np.max(v0.values))
    if vmax0 > 0 and edge > config.quadrature_tol * vmax0 and not config.truncate_initial:
        raise WindowTooNarrow(f"initial data is {edge:.2e} at the trait-window edge")
    bounds = TailBounds.from_initial(v0, scenario)
    threshold = blowup_threshold(v0, bounds, rot) if blowup_check else math.inf
    stepper = Stepper(scenario, config)
    vals = np.array(v0.values)
    vals[:, 0] = vals[:, -1] = 0.0
    state = SimulationState(v0.with_values(vals))
    state.diagnostics.max_value = vmax0
    snaps = [_snapshot(stepper, state, config)]
    _track(state.diagnostics, snaps[-1], state.field)
    for k in range(config.n_steps):
        state = step(state, scenario, config, stepper, threshold)
        if config.window_policy == "translate":
            front = stepper.column_front(state.field.values, config.translate_threshold)
            gx = stepper.grid.gx
            if front is not None and front > gx.lo + config.trigger_fraction * (gx.hi - gx.lo):
                moved = stepper.translate(state, np.array(state.field.values))
                state.field = ScalarField2D(stepper.grid, moved, state.t)
        if (k + 1) % config.output_stride == 0 or k + 1 == config.n_steps:
            snaps.append(_snapshot(stepper, state, config))
            _track(state.diagnostics, snaps[-1], state.field)
    return SimulationResult(snaps, state, bounds)


def _snapshot(stepper: Stepper, state: SimulationState, config: SolverConfig) -> Snapshot:
    x, N = stepper.lab_mass(state.field.values)
    return Snapshot(state.t, x, N, float(np.max(state.field.values)), state.window_offset_X,
                    state.field if config.keep_fields else None)


def _track(diag: Diagnostics, snap: Snapshot, fld: ScalarField2D):
    diag.mass_max = max(diag.mass_max, float(np.max(snap.N)))
    v = fld.values
    vmax = float(np.max(v))
    if vmax > 0:
        ny = v.shape[1]
        k = max(1, int(round(0.2 * ny)))
        outer = max(float(np.max(v[:, :k])), float(np.max(v[:, -k:])))
        diag.outer_tail_ratio_max = max(diag.outer_tail_ratio_max, outer / vmax)


# ------------------------------------------------------ 1D references ----


@dataclass
class Trajectory:
    x: np.ndarray
    times: np.ndarray
    u: np.ndarray  # shape (n_times, n_x)
    clipped: int = 0

    @property
    def sup_norms(self) -> np.ndarray:
        return np.max(self.u, axis=1)


def solve_fisher_kpp_1d(u0, Lambda: float, logistic: bool, t_end: float, dt: float, h: float,
                        x0: float = 0.0, output_stride: int = 1, startup_steps: int = 2) -> Trajectory:
    """``u_t = u_xx + Lambda u (1 - u)`` (or ``+ Lambda u``) with zero-flux ends.

    Crank-Nicolson diffusion inside a Strang splitting; the reaction substeps
    use the exact pointwise flow.  In logistic mode values are kept in [0, 1].
    """
    if not Lambda > 0:
        raise ValueError("Lambda must be positive")
    u = np.array(u0, dtype=float)
    if logistic and (np.min(u) < 0 or np.max(u) > 1):
        raise ValueError("logistic data must lie in [0, 1]")
    n = u.size
    x = x0 + h * np.arange(n)
    c = 0.5 * dt / (h * h)
    ab = _neumann_banded(n, c)
    half = 0.5 * dt
    grow = math.exp(Lambda * half)

    def react(u):
        if logistic:
            return u * grow / (1.0 - u + u * grow)
        return u * grow

    n_steps = int(math.ceil(t_end / dt - 1e-9))
    times, frames, clipped = [0.0], [u.copy()], 0
    for k in range(n_steps):
        u = react(u)
        if k < startup_steps:
            for _ in range(2):
                u = solve_banded((1, 1), ab, u, check_finite=False)
        else:
            u = solve_banded((1, 1), ab, u + c * _d2x(u), check_finite=False)
        u = react(u)
        if logistic:
            bad = (u < 0) | (u > 1)
            clipped += int(np.count_nonzero(bad))
            np.clip(u, 0.0, 1.0, out=u)
        if (k + 1) % output_stride == 0 or k + 1 == n_steps:
            times.append((k + 1) * dt)
            frames.append(u.copy())
    return Trajectory(x, np.array(times), np.array(frames), clipped)


def heat_indicator_profile(sigma_minus: float, sigma_plus: float, t: float, y):
    """Heat flow of ``1[sigma-, sigma+]`` at time ``t``, via error functions."""
    if not t > 0:
        raise ValueError("t must be positive")
    y = np.asarray(y, dtype=float)
    s = 2.0 * math.sqrt(t)
    a = (y - sigma_minus) / s
    b = (y - sigma_plus) / s
    right = 0.5 * (erfc(b) - erfc(a))
    left = 0.5 * (erfc(-a) - erfc(-b))
    mid = 0.5 * (erf(a) - erf(b))
    out = np.where(b > 0, right, np.where(a < 0, left, mid))
    return float(out) if out.ndim == 0 else out


@dataclass
class SupersolutionReport:
    passed: bool
    max_excess: float
    n_snapshots: int
    failures: list
    comparison_passed: Optional[bool] = None
    comparison_max_excess: float = 0.0


def _excess(v, bound):
    return float(np.max(v - bound - (1e-6 + 1e-3 * bound)))


def linear_supersolution_check(fields, eig, k: float, lambda0: Optional[float] = None,
                               linear_fields=None) -> SupersolutionReport:
    """Check ``v(t) <= k Gamma0(Y) exp(-lambda0 t)`` on every stored snapshot.

    ``fields`` are :class:`ScalarField2D` snapshots (first one is the initial
    data).  With ``linear_fields`` (same times, same windows) also check that
    the competitive solution stays below the linear one.
    """
    fields = list(fields)
    lam = eig.lam if lambda0 is None else lambda0
    if not fields:
        return SupersolutionReport(True, -math.inf, 0, [])
    f0 = fields[0]
    _, Y0 = f0.grid.mesh()
    g0 = eig.evaluate(Y0)
    if np.any(f0.values > k * g0 * (1 + 1e-12) + 1e-300):
        raise PreconditionFailed("initial data exceeds k * Gamma0")
    worst, failures = -math.inf, []
    for f in fields:
        _, Y = f.grid.mesh()
        bound = k * eig.evaluate(Y) * math.exp(-lam * f.time_stamp)
        e = _excess(f.values, bound)
        worst = max(worst, e)
        if e > 0:
            failures.append(f.time_stamp)
    rep = SupersolutionReport(not failures, worst, len(fields), failures)
    if linear_fields is not None:
        cmp_worst = -math.inf
        for f, g in zip(fields, linear_fields):
            if abs(f.time_stamp - g.time_stamp) > 1e-9 or f.grid != g.grid:
                raise ValueError("comparison snapshots must share times and windows")
            cmp_worst = max(cmp_worst, _excess(f.values, g.values))
        rep.comparison_passed = cmp_worst <= 0
        rep.comparison_max_excess = cmp_worst
    return rep
