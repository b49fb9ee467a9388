"""Scenario documents: flat ``dotted.key = value`` lines.

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
Every key, its type and default is listed in :data:`SCHEMA`; :func:`render`
writes a document that :func:`parse_scenario` reads back to an equal object.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional

import numpy as np

from .errors import SchemaError
from .grids import Grid1D, Grid2D
from .growth import (
    TAIL_KINDS,
    CompetitionKernel,
    GrowthProfile,
    InitialDataSpec,
    TailFamily,
    load_growth_csv,
)


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


def _floats(s: str) -> tuple:
    items = [p.strip() for p in s.split(",") if p.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(_float(p) for p in items)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _text(s: str) -> str:
    if not s:
        raise ValueError("must not be empty")
    return s


# key -> (parser, default); None defaults mean "derived at run time"
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "name": (_text, "scenario"),
    "B": (_float, 1.0),
    "growth.kind": (_choice("quadratic", "tabulated"), "quadratic"),
    "growth.A": (_float, 0.25),
    "growth.csv": (_text, None),
    "kernel.kind": (_choice("constant_one", "constant", "gaussian"), "constant_one"),
    "kernel.k_minus": (_float, 1.0),
    "kernel.k_plus": (_float, 1.0),
    "kernel.length": (_float, 1.0),
    "initial.tail.kind": (_choice(*TAIL_KINDS), "compact"),
    "initial.tail.C": (_float, 1.0),
    "initial.tail.a": (_float, 1.0),
    "initial.tail.b": (_float, 1.0),
    "initial.tail.lam": (_float, 1.0),
    "initial.tail.x0": (_float, None),
    "initial.tail.support_hi": (_float, 0.0),
    "initial.tail.level": (_float, 1.0),
    "initial.tail.plateau": (_float, 1.0),
    "initial.orientation": (_choice("along_X", "along_x"), "along_X"),
    "initial.profile": (_choice("indicator", "eigen_profile"), "indicator"),
    "initial.sigma_minus": (_float, -1.0),
    "initial.sigma_plus": (_float, 1.0),
    "solver.dt": (_float, None),
    "solver.t_end": (_float, 10.0),
    "solver.X_lo": (_float, -20.0),
    "solver.X_hi": (_float, 20.0),
    "solver.hX": (_float, 0.1),
    "solver.Y_half_width": (_float, 9.0),
    "solver.hY": (_float, 0.1),
    "solver.window_policy": (_choice("fixed", "translate"), "fixed"),
    "solver.translate_threshold": (_float, None),
    "solver.quadrature_tol": (_float, 1e-10),
    "solver.output_stride": (_int, 10),
    "solver.startup_steps": (_int, 2),
    "solver.keep_fields": (_bool, False),
    "solver.allow_initial_truncation": (_bool, False),
    "analysis.mu": (_floats, (0.05,)),
    "analysis.mu_scale": (_choice("plateau", "absolute"), "plateau"),
    "analysis.eps_fraction": (_float, 0.25),
    "analysis.eps": (_float, None),
    "analysis.gamma": (_float, None),
    "analysis.Gamma": (_float, None),
    "analysis.R": (_float, None),
    "analysis.eig_h": (_float, 0.01),
    "analysis.eig_tol": (_float, 1e-4),
    "analysis.fit_window": (_floats, None),
    "analysis.front": (_choice("min", "max"), "min"),
    "analysis.envelope_times": (_floats, (10.0, 15.0, 20.0, 25.0, 30.0)),
    "output.dir": (_text, None),
}


def _attr(key: str) -> str:
    return key.replace(".", "_")


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; one attribute per schema key (dots become underscores)."""

    name: str = "scenario"
    B: float = 1.0
    growth_kind: str = "quadratic"
    growth_A: float = 0.25
    growth_csv: Optional[str] = None
    kernel_kind: str = "constant_one"
    kernel_k_minus: float = 1.0
    kernel_k_plus: float = 1.0
    kernel_length: float = 1.0
    initial_tail_kind: str = "compact"
    initial_tail_C: float = 1.0
    initial_tail_a: float = 1.0
    initial_tail_b: float = 1.0
    initial_tail_lam: float = 1.0
    initial_tail_x0: Optional[float] = None
    initial_tail_support_hi: float = 0.0
    initial_tail_level: float = 1.0
    initial_tail_plateau: float = 1.0
    initial_orientation: str = "along_X"
    initial_profile: str = "indicator"
    initial_sigma_minus: float = -1.0
    initial_sigma_plus: float = 1.0
    solver_dt: Optional[float] = None
    solver_t_end: float = 10.0
    solver_X_lo: float = -20.0
    solver_X_hi: float = 20.0
    solver_hX: float = 0.1
    solver_Y_half_width: float = 9.0
    solver_hY: float = 0.1
    solver_window_policy: str = "fixed"
    solver_translate_threshold: Optional[float] = None
    solver_quadrature_tol: float = 1e-10
    solver_output_stride: int = 10
    solver_startup_steps: int = 2
    solver_keep_fields: bool = False
    solver_allow_initial_truncation: bool = False
    analysis_mu: tuple = (0.05,)
    analysis_mu_scale: str = "plateau"
    analysis_eps_fraction: float = 0.25
    analysis_eps: Optional[float] = None
    analysis_gamma: Optional[float] = None
    analysis_Gamma: Optional[float] = None
    analysis_R: Optional[float] = None
    analysis_eig_h: float = 0.01
    analysis_eig_tol: float = 1e-4
    analysis_fit_window: Optional[tuple] = None
    analysis_front: str = "min"
    analysis_envelope_times: tuple = (10.0, 15.0, 20.0, 25.0, 30.0)
    output_dir: Optional[str] = None

    def get(self, key: str):
        return getattr(self, _attr(key))

    def with_values(self, **dotted) -> "Scenario":
        """Copy with ``{"growth.A": 1.0, ...}``-style overrides, revalidated."""
        doc = render(replace(self, **{_attr(k): v for k, v in dotted.items()}))
        return parse_scenario(doc)

    @property
    def envelope_gamma(self) -> float:
        """Upper-envelope constant; defaults to the tail constant ``C``."""
        return self.analysis_gamma if self.analysis_gamma is not None else self.initial_tail_C

    @property
    def envelope_Gamma(self) -> float:
        """Lower-envelope constant; defaults to the tail constant ``C``."""
        return self.analysis_Gamma if self.analysis_Gamma is not None else self.initial_tail_C

    # ---- builders
    def growth_profile(self) -> GrowthProfile:
        if self.growth_kind == "quadratic":
            return GrowthProfile.quadratic(self.growth_A)
        return load_growth_csv(self.growth_csv)

    def kernel(self) -> CompetitionKernel:
        if self.kernel_kind == "constant_one":
            return CompetitionKernel()
        km, kp = self.kernel_k_minus, self.kernel_k_plus
        if self.kernel_kind == "constant":
            return CompetitionKernel("bounded", km, km, _ConstantK(km))
        return CompetitionKernel("bounded", km, kp, _GaussianK(km, kp, self.kernel_length))

    def tail(self) -> TailFamily:
        return TailFamily(self.initial_tail_kind, C=self.initial_tail_C, a=self.initial_tail_a,
                          b=self.initial_tail_b, lam=self.initial_tail_lam, x0=self.initial_tail_x0,
                          support_hi=self.initial_tail_support_hi, level=self.initial_tail_level,
                          plateau=self.initial_tail_plateau)

    def initial_spec(self) -> InitialDataSpec:
        return InitialDataSpec(self.tail(), self.initial_orientation, self.initial_profile,
                               self.initial_sigma_minus, self.initial_sigma_plus)

    def window(self) -> Grid2D:
        W = self.solver_Y_half_width
        return Grid2D(Grid1D.from_spacing(self.solver_X_lo, self.solver_X_hi, self.solver_hX),
                      Grid1D.from_spacing(-W, W, self.solver_hY))


class _ConstantK:
    def __init__(self, k):
        self.k = k

    def __call__(self, t, x, y, yp):
        return np.full(np.broadcast(x, y, yp).shape, self.k)


class _GaussianK:
    def __init__(self, km, kp, ell):
        self.km, self.kp, self.ell = km, kp, ell

    def __call__(self, t, x, y, yp):
        d = (np.asarray(y) - np.asarray(yp)) / self.ell
        return self.km + (self.kp - self.km) * np.exp(-d * d)


def _validate(sc: Scenario, line_of: dict) -> list:
    errs = []

    def bad(key, msg):
        errs.append((line_of.get(key, 0), msg))

    if sc.growth_kind == "quadratic" and not sc.growth_A > 0:
        bad("growth.A", "A must be positive")
    if sc.growth_kind == "tabulated":
        if sc.growth_csv is None:
            bad("growth.kind", "tabulated growth needs growth.csv")
        else:
            try:
                load_growth_csv(sc.growth_csv)
            except (OSError, ValueError) as exc:
                bad("growth.csv", f"growth table: {exc}")
    if not sc.B >= 0:
        bad("B", "B must be non-negative")
    if sc.kernel_kind != "constant_one" and not 0 < sc.kernel_k_minus:
        bad("kernel.k_minus", "k_minus must be positive")
    if sc.kernel_kind == "gaussian":
        if not sc.kernel_k_plus >= sc.kernel_k_minus:
            bad("kernel.k_plus", "k_plus must be >= k_minus")
        if not sc.kernel_length > 0:
            bad("kernel.length", "length must be positive")
    try:
        sc.tail()
    except ValueError as exc:
        bad("initial.tail.kind", f"tail: {exc}")
    if not sc.initial_sigma_minus < sc.initial_sigma_plus:
        bad("initial.sigma_plus", "sigma_minus must be < sigma_plus")
    for key in ("solver.t_end", "solver.hX", "solver.hY", "solver.Y_half_width", "solver.quadrature_tol",
                "analysis.eig_h", "analysis.eig_tol", "analysis.eps_fraction"):
        if not sc.get(key) > 0:
            bad(key, f"{key.split('.')[-1]} must be positive")
    for key in ("solver.dt", "analysis.eps", "analysis.gamma", "analysis.Gamma", "analysis.R",
                "solver.translate_threshold"):
        v = sc.get(key)
        if v is not None and not v > 0:
            bad(key, f"{key.split('.')[-1]} must be positive")
    if not sc.solver_X_lo < sc.solver_X_hi:
        bad("solver.X_hi", "X_lo must be < X_hi")
    if sc.solver_output_stride < 1:
        bad("solver.output_stride", "output_stride must be >= 1")
    if sc.solver_startup_steps < 0:
        bad("solver.startup_steps", "startup_steps must be >= 0")
    if sc.solver_window_policy == "translate" and sc.solver_translate_threshold is None:
        bad("solver.window_policy", "translate policy needs solver.translate_threshold")
    if any(not m > 0 for m in sc.analysis_mu):
        bad("analysis.mu", "mu values must be positive")
    fw = sc.analysis_fit_window
    if fw is not None and (len(fw) != 2 or not 0 <= fw[0] < fw[1]):
        bad("analysis.fit_window", "fit_window must be 't0, t1' with 0 <= t0 < t1")
    if not errs:
        try:
            sc.window()
        except ValueError as exc:
            bad("solver.hX", f"window: {exc}")
    return errs


def parse_scenario(text: str) -> Scenario:
    """Parse and validate; raises :class:`SchemaError` listing every problem with its line."""
    values: dict = {}
    line_of: dict = {}
    errs = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errs.append((ln, f"expected 'key = value', got {line!r}"))
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            errs.append((ln, f"unknown key {key!r}"))
            continue
        if key in line_of:
            errs.append((ln, f"duplicate key {key!r} (first on line {line_of[key]})"))
            continue
        parser, _ = SCHEMA[key]
        try:
            values[_attr(key)] = parser(val)
        except ValueError as exc:
            errs.append((ln, f"{key}: {exc}"))
            continue
        line_of[key] = ln
    if errs:
        raise SchemaError(errs)
    sc = Scenario(**values)
    errs = _validate(sc, line_of)
    if errs:
        raise SchemaError(errs)
    return sc


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def render(sc: Scenario) -> str:
    """Document listing every set key; ``None`` (derived) values are omitted."""
    out = []
    for key in SCHEMA:
        v = getattr(sc, _attr(key))
        if v is None:
            continue
        out.append(f"{key} = {_fmt(v)}")
    return "\n".join(out) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
