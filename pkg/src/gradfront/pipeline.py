"""Eigen -> simulate -> analyze orchestration and on-disk artifacts."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import frontlab as fl
from .engine import GrowthScenario, SimulationResult, SolverConfig, TailBounds, default_dt, simulate
from .errors import InsufficientData, LevelOutOfRange, NotInvading, Unsupported
from .grids import Rotation
from .growth import FORMULA_KINDS, build_initial_field
from .scenario import Scenario, render
from .spectral import (
    EigenPair,
    critical_speed,
    dirichlet_eig,
    generalized_eig,
    harmonic_closed_form,
    write_eigen,
)
from .svg import line_plot


@dataclass
class EigenInfo:
    lambda0: float
    lambda0_R: float
    R: float
    pair: EigenPair
    profile_pair: EigenPair
    c_star: Optional[float]
    closed_form: Optional[float] = None

    def as_dict(self) -> dict:
        return {"lambda0": self.lambda0, "lambda0_R": self.lambda0_R, "R": self.R, "c_star": self.c_star,
                "lambda0_closed_form": self.closed_form, "generalized_R": self.pair.R,
                "ladder": [list(p) for p in self.pair.ladder], "residual": self.pair.residual}


def out_dir_for(sc: Scenario, out: Optional[str] = None) -> Path:
    d = Path(out or sc.output_dir or os.path.join("runs", sc.name))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fl._finite(obj), fh, indent=2, default=fl._json_default, allow_nan=False)


# ----------------------------------------------------------------- stages ----


def run_eigen(sc: Scenario, out: Optional[Path] = None) -> EigenInfo:
    profile = sc.growth_profile()
    pair = generalized_eig(profile, sc.B, tol=sc.analysis_eig_tol, h=sc.analysis_eig_h)
    R = sc.analysis_R or sc.solver_Y_half_width
    dir_pair = dirichlet_eig(profile, sc.B, R, min(sc.analysis_eig_h, R / 50.0))
    closed = None
    prof_pair = pair
    if sc.growth_kind == "quadratic":
        cf = harmonic_closed_form(sc.growth_A, sc.B)
        closed, prof_pair = cf.lam, cf
    try:
        c_star = critical_speed(pair.lam, sc.B)
    except NotInvading:
        c_star = None
    info = EigenInfo(pair.lam, dir_pair.lam, R, pair, prof_pair, c_star, closed)
    if out is not None:
        write_eigen(pair, out / "eigen.csv", None)
        _dump(out / "eigen.json", {"lambda": pair.lam, "R": pair.R, "h": pair.grid_h, "residual": pair.residual,
                                   **info.as_dict()})
    return info


def model_of(sc: Scenario) -> GrowthScenario:
    return GrowthScenario(sc.growth_profile(), sc.B, sc.kernel())


def solver_config(sc: Scenario, v0=None, model: Optional[GrowthScenario] = None) -> SolverConfig:
    grid = sc.window()
    dt = sc.solver_dt
    if dt is None:
        model = model or model_of(sc)
        n_inf = TailBounds.from_initial(v0, model).N_inf if v0 is not None else model.profile.r_max / model.kernel.k_minus
        dt = default_dt(min(grid.gx.h, grid.gy.h), model.profile.r_max, model.kernel.k_plus, n_inf)
    return SolverConfig(dt=dt, t_end=sc.solver_t_end, window=grid, window_policy=sc.solver_window_policy,
                        translate_threshold=sc.solver_translate_threshold, quadrature_tol=sc.solver_quadrature_tol,
                        output_stride=sc.solver_output_stride, startup_steps=sc.solver_startup_steps,
                        keep_fields=sc.solver_keep_fields, truncate_initial=sc.solver_allow_initial_truncation)


def run_simulation(sc: Scenario, eig: EigenInfo, out: Optional[Path] = None) -> SimulationResult:
    model = model_of(sc)
    rot = Rotation(sc.B)
    v0 = build_initial_field(sc.initial_spec(), sc.window(), rot, eig.profile_pair)
    cfg = solver_config(sc, v0, model)
    res = simulate(v0, model, cfg)
    if out is not None:
        write_simulation(out, res, cfg, eig)
    return res


def write_simulation(out: Path, res: SimulationResult, cfg: SolverConfig, eig: Optional[EigenInfo] = None) -> None:
    with open(out / "mass.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "N"])
        for s in res.snapshots:
            for x, n in zip(s.x, s.N):
                w.writerow([repr(float(s.t)), repr(float(x)), repr(float(n))])
    with open(out / "sup_norm.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sup_v", "window_offset_X"])
        for s in res.snapshots:
            w.writerow([repr(float(s.t)), repr(s.sup_norm), repr(float(s.offset_X))])
    if cfg.keep_fields:
        with open(out / "fields.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "X", "Y", "v"])
            for s in res.snapshots:
                X, Y = s.field.grid.mesh()
                for a, b, v in zip(X.ravel(), Y.ravel(), s.field.values.ravel()):
                    w.writerow([repr(float(s.t)), repr(float(a)), repr(float(b)), repr(float(v))])
    diag = res.final.diagnostics.as_dict()
    diag.update(dt=cfg.dt, N_inf=res.bounds.N_inf, C_tail=res.bounds.C_tail, kappa=res.bounds.kappa,
                advisories=cfg.advisories(eig.profile_pair if eig else None))
    _dump(out / "diagnostics.json", diag)


@dataclass
class SimulationRecord:
    """What analysis needs from a run; can be rebuilt from the written CSVs."""

    times: np.ndarray
    profiles: list  # (x, N) per snapshot
    sup_norms: np.ndarray
    window_right_x: float

    @classmethod
    def from_result(cls, res: SimulationResult, sc: Scenario) -> "SimulationRecord":
        return cls(res.times, [(s.x, s.N) for s in res.snapshots], res.sup_norms,
                   float(res.snapshots[-1].x[-1]) if res.snapshots else math.nan)

    @classmethod
    def from_dir(cls, out: Path) -> "SimulationRecord":
        data = np.loadtxt(out / "mass.csv", delimiter=",", skiprows=1, ndmin=2)
        sup = np.loadtxt(out / "sup_norm.csv", delimiter=",", skiprows=1, ndmin=2)
        times = sup[:, 0]
        profiles = []
        for t in times:
            rows = data[data[:, 0] == t]
            profiles.append((rows[:, 1], rows[:, 2]))
        right = float(profiles[-1][0][-1]) if profiles else math.nan
        return cls(times, profiles, sup[:, 1], right)


def plateau_reference(sc: Scenario, eig: EigenInfo, rec: SimulationRecord) -> float:
    """Level scale for ``mu_scale = plateau``: ``-lambda0 / k_minus`` when invading, else sup of the initial mass."""
    if eig.lambda0 < 0:
        return -eig.lambda0 / sc.kernel().k_minus
    return float(np.max(rec.profiles[0][1]))


def _try(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (InsufficientData, LevelOutOfRange, Unsupported, ValueError) as exc:
        return {"error": str(exc)}


def _fit_dict(f):
    if isinstance(f, dict):
        return f
    if isinstance(f, fl.PowerFit):
        return {"exponent": f.exponent, "alpha": f.alpha, "beta": f.beta, "r_squared": f.r_squared,
                "loglog_slope": f.loglog_slope, "n_samples": f.n_samples}
    return {"rate": f.rate, "intercept": f.intercept, "r_squared": f.r_squared, "n_samples": f.n_samples, **f.extra}


@dataclass
class Analysis:
    mu_values: list
    traces: list
    regime: fl.Regime
    fits: dict
    envelope: Optional[dict]
    envelope_arrays: Optional[list]
    reports: Optional[list]
    beta: dict
    envelope_ladder: list = field(default_factory=list)


def analyze(sc: Scenario, eig: EigenInfo, rec: SimulationRecord) -> Analysis:
    scale = plateau_reference(sc, eig, rec) if sc.analysis_mu_scale == "plateau" else 1.0
    mus = [m * scale for m in sc.analysis_mu]
    traces = [fl.trace_from_profiles(rec.times, rec.profiles, mu) for mu in mus]
    t_end = float(rec.times[-1])
    window = tuple(sc.analysis_fit_window) if sc.analysis_fit_window else (0.5 * t_end, t_end)
    which = sc.analysis_front
    main = traces[0]
    fits = {}
    for model in ("linear", "linear_log", "exp_t", "log_of_front"):
        fits[model] = _fit_dict(_try(fl.fit_rate, main, model, window, which=which))
    if sc.initial_tail_kind == "light_heavy":
        fits["power_t"] = _fit_dict(_try(fl.fit_rate, main, "power_t", window, a=sc.initial_tail_a, which=which))
    fits["power_exponent"] = _fit_dict(_try(fl.fit_power_exponent, main, window, which=which))
    try:
        regime = fl.classify_regime(main, rec.times, rec.sup_norms, window, which)
    except InsufficientData as exc:
        regime = fl.Regime("inconclusive", None, {"reason": str(exc)})
    beta = fl.estimate_beta([float(np.max(N)) for _, N in rec.profiles])
    envelope = env_arrays = reports = None
    ladder = []
    tail = sc.tail()
    if tail.kind in FORMULA_KINDS and eig.lambda0_R < 0:
        lam_R = eig.lambda0_R
        # both values come from the same discretisation; keep lambda0 <= lambda0_R exactly
        lam0 = min(eig.lambda0, lam_R)
        eps = sc.analysis_eps if sc.analysis_eps is not None else sc.analysis_eps_fraction * (-lam_R)
        p = fl.EnvelopeParams(eps, sc.envelope_gamma, sc.envelope_Gamma, lam0, lam_R, sc.B)
        env_arrays = [fl.envelope_series(tail, tail, p, tr.times) for tr in traces]
        reports = [fl.envelope_violation_report(tr, lo, hi, window) for tr, (lo, hi) in zip(traces, env_arrays)]
        envelope = {"eps": eps, "gamma": p.gamma_small, "Gamma": p.Gamma_big, "lambda0": lam0, "lambda0_R": lam_R,
                    "window": list(window), "reports": [r.as_dict() for r in reports],
                    "consistent_constants": _try(fl.consistent_envelope_constants, main, tail, tail, p, window)}
        for t in sc.analysis_envelope_times:
            try:
                ln_lo, ln_hi = fl.log_theoretical_envelope(tail, tail, p, t)
            except LevelOutOfRange:
                ladder.append({"t": t, "defined": False})
                continue
            ladder.append({"t": t, "defined": True, "ln_lower": ln_lo, "ln_upper": ln_hi,
                           "lower": fl._exp_or_inf(ln_lo), "upper": fl._exp_or_inf(ln_hi),
                           "window_right_x": rec.window_right_x,
                           "lower_exceeds_window": bool(ln_lo > math.log(max(rec.window_right_x, 1e-300)))})
    return Analysis(mus, traces, regime, fits, envelope, env_arrays, reports, beta, ladder)


def write_analysis(out: Path, sc: Scenario, eig: EigenInfo, rec: SimulationRecord, an: Analysis,
                   diagnostics: Optional[dict] = None) -> dict:
    fl.write_level_sets(out / "level_sets.csv", an.traces, an.envelope_arrays, an.reports)
    fl.write_regime(out / "regime.json", an.regime, an.fits)
    summary = {
        "name": sc.name,
        **eig.as_dict(),
        "classification": an.regime.kind,
        "regime_value": an.regime.value,
        "regime_details": an.regime.details,
        "fits": an.fits,
        "mu": an.mu_values,
        "beta": an.beta,
        "envelope": an.envelope,
        "envelope_violation_fraction": [r.fraction for r in an.reports] if an.reports else None,
        "envelope_ladder": an.envelope_ladder,
        "diagnostics": diagnostics,
    }
    _dump(out / "summary.json", summary)
    _plots(out, rec, an)
    return summary


def _plots(out: Path, rec: SimulationRecord, an: Analysis) -> None:
    main = an.traces[0]
    t = main.times
    series = [("min E", t, main.ordinate("min")), ("max E", t, main.ordinate("max"))]
    if an.envelope_arrays:
        lo, hi = an.envelope_arrays[0]
        series += [("lower bound", t, lo), ("upper bound", t, hi)]
    line_plot(out / "front.svg", series, "Front position", "t", "x")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_series = [(lab, tt, np.log(np.where(yy > 0, yy, np.nan))) for lab, tt, yy in series]
    line_plot(out / "log_front.svg", log_series, "Log front position", "t", "ln x")
    k = len(rec.profiles)
    picks = sorted({0, k // 4, k // 2, (3 * k) // 4, k - 1})
    line_plot(out / "mass_profiles.svg",
              [(f"t={rec.times[i]:.3g}", rec.profiles[i][0], rec.profiles[i][1]) for i in picks],
              "Trait-integrated mass", "x", "N")


# ------------------------------------------------------------- top level ----


def run_pipeline(sc: Scenario, out: Optional[str] = None) -> Path:
    """Run every stage and write all artifacts; returns the artifact directory."""
    d = out_dir_for(sc, out)
    (d / "scenario.txt").write_text(render(sc), encoding="utf-8")
    eig = run_eigen(sc, d)
    res = run_simulation(sc, eig, d)
    rec = SimulationRecord.from_result(res, sc)
    an = analyze(sc, eig, rec)
    write_analysis(d, sc, eig, rec, an, json.loads((d / "diagnostics.json").read_text(encoding="utf-8")))
    return d


def analyze_dir(sc: Scenario, out: Optional[str] = None) -> Path:
    """Re-run the analysis stage on the CSVs of an earlier simulation."""
    d = out_dir_for(sc, out)
    eig = run_eigen(sc, d)
    rec = SimulationRecord.from_dir(d)
    diag_path = d / "diagnostics.json"
    diag = json.loads(diag_path.read_text(encoding="utf-8")) if diag_path.exists() else None
    write_analysis(d, sc, eig, rec, analyze(sc, eig, rec), diag)
    return d


SWEEP_PARAMETERS = {"A": "growth.A", "B": "B", "tail.a": "initial.tail.a", "mu": "analysis.mu"}


def sweep(base: Scenario, parameter: str, values, out: Optional[str] = None, threads: int = 1) -> Path:
    """One pipeline run per value; writes ``sweep.csv`` with the fitted rates."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"sweep parameter must be one of {', '.join(SWEEP_PARAMETERS)}")
    key = SWEEP_PARAMETERS[parameter]
    root = out_dir_for(base, out)
    runs = []
    for k, v in enumerate(values):
        val = (float(v),) if key == "analysis.mu" else float(v)
        sc = base.with_values(**{key: val, "name": f"{base.name}_{parameter}_{k}"})
        runs.append((v, sc, str(root / f"{parameter}={v}")))

    def one(item):
        v, sc, d = item
        path = run_pipeline(sc, d)
        return v, json.loads((path / "summary.json").read_text(encoding="utf-8"))

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as ex:
        results = list(ex.map(one, runs))
    cols = ["parameter", "value", "lambda0", "lambda0_R", "c_star", "classification", "regime_value",
            "linear_rate", "linear_log_rate", "exp_t_rate", "log_of_front_rate", "violation_fraction"]
    with open(root / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for v, s in results:
            f = s["fits"]
            vf = s["envelope_violation_fraction"]
            w.writerow([parameter, v, s["lambda0"], s["lambda0_R"], s["c_star"], s["classification"], s["regime_value"],
                        f["linear"].get("rate"), f["linear_log"].get("rate"), f["exp_t"].get("rate"),
                        f["log_of_front"].get("rate"), vf[0] if vf else None])
    return root
