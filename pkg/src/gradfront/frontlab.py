"""Level sets of the trait-integrated mass, envelope bounds and regime fits.

All positions here are laboratory ``x`` coordinates.  A trace stores, for
each time, the extreme crossings of ``N(t, .) = mu``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import InsufficientData, LevelOutOfRange
from .growth import TailFamily, log_tail, log_tail_inverse

MIN_FIT_SAMPLES = 8


@dataclass(frozen=True)
class LevelSample:
    t: float
    min_E: float
    max_E: float
    nonempty: bool


@dataclass
class LevelSetTrace:
    mu: float
    samples: list = field(default_factory=list)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        ts = [s.t for s in self.samples]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("samples must be time-ordered")
        for s in self.samples:
            if s.nonempty and s.min_E > s.max_E:
                raise ValueError("min_E > max_E")

    def append(self, t: float, crossing) -> None:
        if self.samples and t < self.samples[-1].t:
            raise ValueError("samples must be time-ordered")
        if crossing is None:
            self.samples.append(LevelSample(t, math.nan, math.nan, False))
        else:
            self.samples.append(LevelSample(t, crossing[0], crossing[1], True))

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def ordinate(self, which: str = "min") -> np.ndarray:
        if which not in ("min", "max"):
            raise ValueError("which must be 'min' or 'max'")
        return np.array([s.min_E if which == "min" else s.max_E for s in self.samples])

    @property
    def nonempty(self) -> np.ndarray:
        return np.array([s.nonempty for s in self.samples], dtype=bool)


def extract_level_set(x, N, mu: float) -> Optional[tuple[float, float]]:
    """Extreme solutions of ``N(x) = mu`` by sign change and linear interpolation.

    Returns ``None`` when ``N - mu`` never changes sign on the samples.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=float)
    d = np.asarray(N, dtype=float) - mu
    hits = []
    exact = np.nonzero(d == 0.0)[0]
    hits.extend(x[exact].tolist())
    i = np.nonzero(d[:-1] * d[1:] < 0.0)[0]
    if i.size:
        w = d[i] / (d[i] - d[i + 1])
        hits.extend((x[i] + w * (x[i + 1] - x[i])).tolist())
    if not hits:
        return None
    return float(min(hits)), float(max(hits))


def trace_from_profiles(times, profiles, mu: float) -> LevelSetTrace:
    """Trace from ``(x, N)`` pairs sampled at ``times``."""
    tr = LevelSetTrace(mu)
    for t, (x, N) in zip(times, profiles):
        tr.append(float(t), extract_level_set(x, N, mu))
    return tr


# -------------------------------------------------------------- envelopes ----


@dataclass(frozen=True)
class EnvelopeParams:
    eps: float
    gamma_small: float
    Gamma_big: float
    lambda0: float
    lambda0_R: float
    B: float

    def __post_init__(self):
        if not self.lambda0_R < 0:
            raise ValueError("envelope needs a survival case (lambda0_R < 0)")
        if not self.lambda0 <= self.lambda0_R:
            raise ValueError("need lambda0 <= lambda0_R")
        if not 0 < self.eps < -self.lambda0_R:
            raise ValueError("need 0 < eps < -lambda0_R")
        if not (self.gamma_small > 0 and self.Gamma_big > 0):
            raise ValueError("gamma and Gamma must be positive")

    @property
    def norm(self) -> float:
        return math.sqrt(1.0 + self.B * self.B)

    @property
    def lower_rate(self) -> float:
        return -self.lambda0_R - self.eps

    @property
    def upper_rate(self) -> float:
        return -self.lambda0 + self.eps


def log_theoretical_envelope(tail_lower: TailFamily, tail_upper: TailFamily, p: EnvelopeParams,
                             t: float) -> tuple[float, float]:
    """Natural logs of the envelope ends; finite even when the ends overflow a float."""
    lo = log_tail_inverse(tail_lower, math.log(p.Gamma_big) - p.lower_rate * t)
    hi = log_tail_inverse(tail_upper, math.log(p.gamma_small) - p.upper_rate * t)
    ln_norm = math.log(p.norm)
    return lo - ln_norm, hi - ln_norm


def theoretical_envelope(tail_lower: TailFamily, tail_upper: TailFamily, p: EnvelopeParams,
                         t: float) -> tuple[float, float]:
    """``(lower, upper)`` bounds on the level set at time ``t``.

    ``lower = min u_lo^-1(Gamma e^{-(-lambda0_R - eps) t}) / norm`` and
    ``upper = max u_hi^-1(gamma e^{-(-lambda0 + eps) t}) / norm``; ends beyond
    the float range come back as ``inf``.
    """
    lo, hi = log_theoretical_envelope(tail_lower, tail_upper, p, t)
    return _exp_or_inf(lo), _exp_or_inf(hi)


def _exp_or_inf(v: float) -> float:
    return math.exp(v) if v < 709.0 else math.inf


def envelope_series(tail_lower, tail_upper, p: EnvelopeParams, times) -> tuple[np.ndarray, np.ndarray]:
    """Envelope on a time grid; ``nan`` where a level is not yet below the plateau."""
    lows, highs = [], []
    for t in times:
        try:
            lo, hi = theoretical_envelope(tail_lower, tail_upper, p, float(t))
        except LevelOutOfRange:
            lo = hi = math.nan
        lows.append(lo)
        highs.append(hi)
    return np.array(lows), np.array(highs)


def envelope_lower_exceeds_upper_onset(tail_lower, tail_upper, p: EnvelopeParams, t_ladder) -> Optional[float]:
    """First ladder time from which ``lower < upper`` holds to the end (None if never)."""
    onset = None
    for t in reversed(list(t_ladder)):
        try:
            lo, hi = log_theoretical_envelope(tail_lower, tail_upper, p, float(t))
        except LevelOutOfRange:
            break
        if not lo < hi:
            break
        onset = float(t)
    return onset


# ------------------------------------------------------------------ fits ----


@dataclass
class RateFit:
    model: str
    rate: float
    intercept: float
    r_squared: float
    n_samples: int
    extra: dict = field(default_factory=dict)


def _r_squared(y, yhat) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def _window_samples(trace: LevelSetTrace, window, which: str):
    t = trace.times
    sel = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(sel) < MIN_FIT_SAMPLES:
        raise InsufficientData(f"{np.count_nonzero(sel)} samples in window {tuple(window)}, need {MIN_FIT_SAMPLES}")
    if not np.all(trace.nonempty[sel]):
        raise InsufficientData("empty level sets inside the fit window")
    return t[sel], trace.ordinate(which)[sel]


FIT_MODELS = ("linear", "power_t", "exp_t", "log_of_front", "linear_log")


def fit_rate(trace: LevelSetTrace, model: str, window: Sequence[float], a: Optional[float] = None,
             which: str = "min") -> RateFit:
    """Least-squares slope of a transformed front position against ``t``.

    ``linear`` fits ``E``; ``power_t`` fits ``E**a``; ``exp_t`` fits ``ln E``;
    ``log_of_front`` fits ``ln ln E``.  ``linear_log`` fits ``E = c t - k ln t + d``
    and reports ``c`` (the asymptotic speed with the logarithmic delay of
    pulled fronts removed; ``k`` is in ``extra``).
    """
    if model not in FIT_MODELS:
        raise ValueError(f"unknown model {model!r}")
    t, E = _window_samples(trace, window, which)
    if model == "linear_log":
        if np.any(t <= 0):
            raise InsufficientData("linear_log needs t > 0")
        M = np.column_stack([t, -np.log(t), np.ones_like(t)])
        coef = np.linalg.lstsq(M, E, rcond=None)[0]
        return RateFit(model, float(coef[0]), float(coef[2]), _r_squared(E, M @ coef), t.size,
                       {"log_coefficient": float(coef[1])})
    if model == "linear":
        y = E
    elif model == "power_t":
        if a is None or not a > 0:
            raise ValueError("power_t needs a > 0")
        if np.any(E <= 0):
            raise InsufficientData("power_t needs positive front positions")
        y = E ** a
    elif model == "exp_t":
        if np.any(E <= 0):
            raise InsufficientData("exp_t needs positive front positions")
        y = np.log(E)
    else:
        if np.any(E <= 1):
            raise InsufficientData("log_of_front needs front positions > 1")
        y = np.log(np.log(E))
    slope, icpt = np.polyfit(t, y, 1)
    return RateFit(model, float(slope), float(icpt), _r_squared(y, slope * t + icpt), t.size)


@dataclass
class PowerFit:
    exponent: float
    alpha: float
    beta: float
    r_squared: float
    loglog_slope: float
    n_samples: int


def fit_power_exponent(trace: LevelSetTrace, window: Sequence[float], which: str = "min",
                       p_grid=None) -> PowerFit:
    """Fit ``E = (alpha t + beta)**p`` in log space.

    A plain log-log slope is biased when the front starts at a finite offset
    (``E ~ (alpha t + beta)**p`` with ``beta`` not small), so the shift is fitted
    too.  The profile over ``p`` seeds the nonlinear least squares.
    """
    t, E = _window_samples(trace, window, which)
    if np.any(E <= 0):
        raise InsufficientData("power fit needs positive front positions")
    lnE = np.log(E)
    loglog = float(np.polyfit(np.log(t), lnE, 1)[0]) if np.all(t > 0) else math.nan
    grid = np.linspace(0.5, 6.0, 111) if p_grid is None else np.asarray(p_grid)

    def model(tt, p, alpha, beta):
        return p * np.log(np.maximum(alpha * tt + beta, 1e-300))

    best = None
    for p in grid:
        alpha, beta = np.polyfit(t, E ** (1.0 / p), 1)
        if alpha <= 0 or np.any(alpha * t + beta <= 0):
            continue
        ss = float(np.sum((lnE - model(t, p, alpha, beta)) ** 2))
        if best is None or ss < best[0]:
            best = (ss, p, alpha, beta)
    if best is None:
        raise InsufficientData("no admissible power-law seed")
    try:
        popt, _ = curve_fit(model, t, lnE, p0=best[1:], maxfev=20000)
    except RuntimeError:
        popt = np.array(best[1:])
    p, alpha, beta = (float(v) for v in popt)
    return PowerFit(p, alpha, beta, _r_squared(lnE, model(t, p, alpha, beta)), loglog, t.size)


# --------------------------------------------------------------- regimes ----


@dataclass
class Regime:
    kind: str  # extinct | ballistic | accelerating | inconclusive
    value: Optional[float]
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"classification": self.kind, "value": self.value, **self.details}


def classify_regime(trace: LevelSetTrace, sup_times, sup_norms, window: Optional[Sequence[float]] = None,
                    which: str = "min", accel_gain: float = 0.2, power_threshold: float = 1.5) -> Regime:
    """Extinct, ballistic or accelerating, by the rules below.

    * extinct: ``ln sup v`` is linear in ``t >= 1`` with ``r^2 > 0.99`` and negative
      slope, and the level sets are empty over the last quarter of samples;
    * accelerating: ``E/t`` increases monotonically by more than ``accel_gain``
      over the second half of the window, or the shifted power-law fit of ``E``
      has exponent at least ``power_threshold`` (with ``r^2 >= 0.999``);
    * ballistic otherwise, with the speed from the ``linear_log`` fit (the plain
      linear slope is in ``details``).
    """
    st, sn = np.asarray(sup_times, float), np.asarray(sup_norms, float)
    past = st >= 1.0
    if np.count_nonzero(past) < 10:
        raise InsufficientData("need at least 10 samples past t = 1")
    details: dict = {}
    pos = past & (sn > 0)
    if np.count_nonzero(pos) >= 10:
        slope, icpt = np.polyfit(st[pos], np.log(sn[pos]), 1)
        r2 = _r_squared(np.log(sn[pos]), slope * st[pos] + icpt)
        details.update(sup_decay_rate=float(-slope), sup_r_squared=float(r2))
        n = len(trace.samples)
        late_empty = n > 0 and not np.any(trace.nonempty[n - max(1, n // 4):])
        if slope < 0 and r2 > 0.99 and late_empty:
            return Regime("extinct", float(-slope), details)
    t = trace.times
    if window is None:
        window = (1.0, float(t[-1]) if t.size else 1.0)
    E = trace.ordinate(which)
    sel = (t >= window[0]) & (t <= window[1]) & trace.nonempty & (t > 0)
    if np.count_nonzero(sel) < MIN_FIT_SAMPLES:
        return Regime("inconclusive", None, {**details, "reason": "too few nonempty level sets"})
    ts, Es = t[sel], E[sel]
    half = ts >= 0.5 * (ts[0] + ts[-1])
    ratio = Es[half] / ts[half]
    details["front_over_t"] = [float(ratio[0]), float(ratio[-1])]
    accel = bool(ratio[0] > 0 and np.all(np.diff(ratio) > 0) and ratio[-1] > (1.0 + accel_gain) * ratio[0])
    try:
        pw = fit_power_exponent(trace, window, which=which)
        details.update(power_exponent=pw.exponent, power_r_squared=pw.r_squared)
        # slow (polynomial) acceleration: E/t grows too little inside a desk-scale window
        accel = accel or (pw.exponent >= power_threshold and pw.r_squared >= 0.999)
    except InsufficientData:
        pass
    if accel:
        try:
            details["exp_t_rate"] = fit_rate(trace, "exp_t", window, which=which).rate
        except InsufficientData:
            pass
        return Regime("accelerating", None, details)
    try:
        lin = fit_rate(trace, "linear", window, which=which)
        cor = fit_rate(trace, "linear_log", window, which=which)
    except InsufficientData as exc:
        return Regime("inconclusive", None, {**details, "reason": str(exc)})
    details.update(linear_speed=lin.rate, linear_r_squared=lin.r_squared, log_coefficient=cor.extra["log_coefficient"])
    return Regime("ballistic", cor.rate, details)


# ------------------------------------------------------------- violations ----


@dataclass
class ViolationReport:
    times: np.ndarray
    violated_lower: np.ndarray
    violated_upper: np.ndarray
    evaluated: np.ndarray
    onset: Optional[float]

    @property
    def n_evaluated(self) -> int:
        return int(np.count_nonzero(self.evaluated))

    @property
    def lower_fraction(self) -> float:
        n = self.n_evaluated
        return float(np.count_nonzero(self.violated_lower & self.evaluated)) / n if n else 0.0

    @property
    def upper_fraction(self) -> float:
        n = self.n_evaluated
        return float(np.count_nonzero(self.violated_upper & self.evaluated)) / n if n else 0.0

    @property
    def fraction(self) -> float:
        n = self.n_evaluated
        bad = (self.violated_lower | self.violated_upper) & self.evaluated
        return float(np.count_nonzero(bad)) / n if n else 0.0

    def as_dict(self) -> dict:
        return {"n_evaluated": self.n_evaluated, "lower_fraction": self.lower_fraction,
                "upper_fraction": self.upper_fraction, "fraction": self.fraction, "empirical_onset": self.onset}


def envelope_violation_report(trace: LevelSetTrace, lower, upper, window: Optional[Sequence[float]] = None) -> ViolationReport:
    """Flag ``min_E < lower`` and ``max_E > upper`` on the trace's time grid.

    ``lower``/``upper`` are arrays matched to ``trace.times`` (``nan`` where a
    bound is undefined).  Only times past the first one with both bounds
    defined, inside ``window`` and with a nonempty level set are evaluated.
    ``onset`` is the earliest evaluated time after which no violation occurs.
    """
    t = trace.times
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    if lower.shape != t.shape or upper.shape != t.shape:
        raise ValueError("envelope arrays must match the trace time grid")
    defined = ~np.isnan(lower) & ~np.isnan(upper)
    first = np.argmax(defined) if np.any(defined) else t.size
    ev = np.zeros(t.size, dtype=bool)
    ev[first:] = True
    ev &= defined & trace.nonempty
    if window is not None:
        ev &= (t >= window[0]) & (t <= window[1])
    mn, mx = trace.ordinate("min"), trace.ordinate("max")
    with np.errstate(invalid="ignore"):
        vl = ev & (mn < lower)
        vu = ev & (mx > upper)
    onset = None
    idx = np.nonzero(ev)[0]
    for k in idx[::-1]:
        if vl[k] or vu[k]:
            break
        onset = float(t[k])
    return ViolationReport(t, vl, vu, ev, onset)


def consistent_envelope_constants(trace: LevelSetTrace, tail_lower: TailFamily, tail_upper: TailFamily,
                                  p: EnvelopeParams, window: Sequence[float]) -> dict:
    """Smallest ``Gamma`` and largest ``gamma`` for which the trace sits inside the envelope.

    Tails are nonincreasing, so ``min_E >= u^-1(Gamma e^{-a t}) / norm`` iff
    ``Gamma >= u(norm min_E) e^{a t}``; the upper end is symmetric.
    """
    t = trace.times
    sel = (t >= window[0]) & (t <= window[1]) & trace.nonempty
    if not np.any(sel):
        raise InsufficientData("no nonempty samples in window")
    ts = t[sel]
    ln_lo = log_tail(tail_lower, p.norm * trace.ordinate("min")[sel]) + p.lower_rate * ts
    ln_hi = log_tail(tail_upper, p.norm * trace.ordinate("max")[sel]) + p.upper_rate * ts
    return {"Gamma_min": float(np.exp(np.max(ln_lo))), "gamma_max": float(np.exp(np.min(ln_hi)))}


# ------------------------------------------------------------------- beta ----


def late_plateau(mass_maxima, fraction: float = 0.25) -> float:
    """Median of ``max_x N`` over the last ``fraction`` of snapshots."""
    m = np.asarray(mass_maxima, float)
    k = max(1, int(round(fraction * m.size)))
    return float(np.median(m[-k:]))


def estimate_beta(mass_maxima) -> dict:
    """Empirical level threshold ``beta = 0.5 * plateau``; lower-bound checks use ``mu <= 0.1 * plateau``."""
    p = late_plateau(mass_maxima)
    return {"plateau": p, "beta": 0.5 * p, "mu_max_for_lower_checks": 0.1 * p}


# ----------------------------------------------------------------- output ----


def write_level_sets(path, traces, envelopes=None, reports=None) -> None:
    """level_sets.csv for one or more traces; ``envelopes[k] = (lower, upper)`` arrays."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mu", "min_E", "max_E", "lower_bound", "upper_bound", "violated_lower", "violated_upper"])
        for k, tr in enumerate(traces):
            lo, hi = (envelopes[k] if envelopes else (None, None))
            rep = reports[k] if reports else None
            for i, s in enumerate(tr.samples):
                w.writerow([
                    repr(s.t), repr(tr.mu),
                    repr(s.min_E) if s.nonempty else "",
                    repr(s.max_E) if s.nonempty else "",
                    _fmt(lo[i]) if lo is not None else "",
                    _fmt(hi[i]) if hi is not None else "",
                    int(rep.violated_lower[i]) if rep is not None else "",
                    int(rep.violated_upper[i]) if rep is not None else "",
                ])


def _fmt(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_regime(path, regime: Regime, fits: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_finite({**regime.as_dict(), "fits": fits or {}}), fh, indent=2, default=_json_default, allow_nan=False)


def _finite(obj):
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)
