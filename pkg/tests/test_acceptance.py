"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Pipeline runs use the documents in ``scenarios/`` and write into a temporary
directory.  Run with ``pytest tests/test_acceptance.py -v``.
"""
import csv
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from gradfront import pipeline
from gradfront.engine import (
    GrowthScenario,
    SolverConfig,
    heat_indicator_profile,
    linear_supersolution_check,
    simulate,
)
from gradfront.grids import Grid1D, Grid2D, Rotation, ScalarField2D, trait_mass_profile
from gradfront.growth import (
    GrowthProfile,
    InitialDataSpec,
    TailFamily,
    build_initial_field,
    eval_tail,
    log_tail_inverse,
    ordering_onset,
    tail_inverse,
)
from gradfront.scenario import load_scenario
from gradfront.spectral import critical_speed, dirichlet_eig, generalized_eig

pytestmark = pytest.mark.slow

SCENARIOS = Path(__file__).parents[1] / "scenarios"
C_STAR = 2 * math.sqrt((1 - math.sqrt(0.5)) / 2)


def report(capsys, number, ok, text):
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {text}")
    assert ok, text


class _Runs:
    def __init__(self, root):
        self.root = root
        self.cache = {}

    def get(self, name):
        if name not in self.cache:
            sc = load_scenario(SCENARIOS / f"{name}.txt")
            t0 = time.perf_counter()
            d = pipeline.run_pipeline(sc, str(self.root / name))
            elapsed = time.perf_counter() - t0
            summary = json.loads((d / "summary.json").read_text())
            self.cache[name] = (sc, d, summary, elapsed)
        return self.cache[name]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return _Runs(tmp_path_factory.mktemp("acceptance"))


def _mass_at(d, t, x):
    data = np.loadtxt(d / "mass.csv", delimiter=",", skiprows=1)
    rows = data[np.isclose(data[:, 0], t)]
    return float(np.interp(x, rows[:, 1], rows[:, 2]))


def _trace(d, mu_index=0):
    with open(d / "level_sets.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    mu = list(dict.fromkeys(r["mu"] for r in rows))[mu_index]
    rows = [r for r in rows if r["mu"] == mu]
    f = lambda s: float(s) if s else math.nan  # noqa: E731
    return (np.array([f(r["t"]) for r in rows]), np.array([f(r["min_E"]) for r in rows]),
            np.array([f(r["lower_bound"]) for r in rows]), [r["violated_lower"] for r in rows])


# 1 ----------------------------------------------------------------------

def test_criterion_1_eigenvalue_closed_form(capsys):
    lines, ok = [], True
    for A, B in [(0.25, 0.0), (0.25, 1.0), (1.0, 0.0), (4.0, 0.0)]:
        t0 = time.perf_counter()
        pair = generalized_eig(GrowthProfile.quadratic(A), B, h=0.01, R_cap=16.0)
        dt = time.perf_counter() - t0
        exact = math.sqrt(A * (1 + B * B)) - 1
        err = abs(pair.lam - exact)
        ok &= err < 1e-3 and dt < 5.0 and pair.R <= 16.0
        lines.append(f"(A={A}, B={B}) err {err:.1e} R={pair.R:g} {dt:.2f}s")
    report(capsys, 1, ok, "; ".join(lines))


# 2 ----------------------------------------------------------------------

def test_criterion_2_dirichlet_baseline(capsys):
    zero = GrowthProfile.tabulated([-1.0, 1.0], [0.0, 0.0], require_confining=False)
    lam = dirichlet_eig(zero, 0.0, 1.0, 1e-3).lam
    err = abs(lam - (math.pi / 2) ** 2)
    Rs = (2.0, 4.0, 8.0, 16.0)
    flat = [dirichlet_eig(zero, 0.0, R, 0.01).lam for R in Rs]
    strict = all(b < a for a, b in zip(flat, flat[1:]))
    # confining case: the gap between R = 8 and 16 is below one ulp, so equality is allowed
    conf = [dirichlet_eig(GrowthProfile.quadratic(0.25), 1.0, R, 0.01).lam for R in Rs]
    nonincreasing = all(b <= a for a, b in zip(conf, conf[1:]))
    report(capsys, 2, err < 1e-4 and strict and nonincreasing,
           f"lambda_R=1 {lam:.6f} (err {err:.1e}); zero profile {', '.join(f'{v:.6f}' for v in flat)} "
           f"strictly decreasing={strict}; quadratic {', '.join(repr(v) for v in conf)} non-increasing={nonincreasing}")


# 3 ----------------------------------------------------------------------

def test_criterion_3_extinction_rate(runs, capsys):
    sc, d, s, elapsed = runs.get("extinction")
    rate = s["regime_value"]
    ok = s["classification"] == "extinct" and abs(rate - 1.0) < 0.1 and elapsed < 120
    report(capsys, 3, ok, f"{s['classification']} rate {rate:.4f} (target 1.0), h={sc.solver_hX}, {elapsed:.0f}s")


# 4 ----------------------------------------------------------------------

def test_criterion_4_ballistic_speed(runs, capsys):
    sc, d, s, elapsed = runs.get("ballistic")
    speed = s["regime_value"]
    c = s["c_star"]
    rel = abs(speed - C_STAR) / C_STAR
    lin = s["regime_details"]["linear_speed"]
    ok = s["classification"] == "ballistic" and rel < 0.1 and abs(c - C_STAR) < 1e-3 and elapsed < 600
    report(capsys, 4, ok, f"speed {speed:.4f} vs c* {C_STAR:.5f} (rel {rel:.1%}; log-delay corrected fit, "
                          f"plain linear slope {lin:.4f}), {elapsed:.0f}s")


# 5 ----------------------------------------------------------------------

def test_criterion_5_algebraic_envelope(runs, capsys):
    sc, d, s, elapsed = runs.get("algebraic_tail")
    violations, all_defined = 0, True
    for k in range(len(sc.analysis_mu)):  # every level shares the same envelope
        t, E, lower, _ = _trace(d, k)
        half = t >= 0.5 * sc.solver_t_end
        defined = np.isfinite(lower[half])
        all_defined &= bool(np.all(defined))
        violations += int(np.count_nonzero(E[half][defined] < lower[half][defined]))
    t, E, lower, _ = _trace(d)
    half = t >= 0.5 * sc.solver_t_end
    Eh, th = E[half], t[half]
    lnE = np.log(Eh)
    increasing = bool(np.all(np.diff(lnE) > 0))
    convex = bool(np.all(np.diff(lnE, 2) >= 0))
    gain = (Eh[-1] / th[-1]) / (Eh[0] / th[0]) - 1
    eps_ok = abs(s["envelope"]["eps"] - 0.25 * (-s["lambda0_R"])) < 1e-12
    ok = (s["classification"] == "accelerating" and all_defined and violations == 0
          and increasing and convex and gain > 0.5 and eps_ok)
    report(capsys, 5, ok, f"{th.size} samples x {len(sc.analysis_mu)} levels, {violations} lower violations, "
                          f"ln E increasing={increasing} convex={convex}, E/t gain {gain:.0%}, {elapsed:.0f}s")


# 6 ----------------------------------------------------------------------

def test_criterion_6_light_heavy_rate(runs, capsys):
    sc, d, s, elapsed = runs.get("light_heavy_tail")
    p = s["fits"]["power_exponent"]["exponent"]
    ok = 1.6 <= p <= 2.4
    report(capsys, 6, ok, f"power exponent {p:.4f} over t in {list(sc.analysis_fit_window)} (target 2), {elapsed:.0f}s")


# 7 ----------------------------------------------------------------------

def test_criterion_7_ill_directed(runs, capsys):
    sc, d, s, elapsed = runs.get("ill_directed")
    speed = s["regime_value"]
    rel = abs(speed - C_STAR) / C_STAR
    t_end = sc.solver_t_end
    m = _mass_at(d, t_end, 1.5 * C_STAR * t_end)
    f = s["fits"]
    r2 = {k: f[k]["r_squared"] for k in ("linear", "exp_t", "log_of_front")}
    ok = (s["classification"] == "ballistic" and rel < 0.1 and m < 0.01
          and r2["linear"] > r2["exp_t"] and r2["linear"] > r2["log_of_front"])
    report(capsys, 7, ok, f"speed {speed:.4f} (rel {rel:.1%}), N(t_end, 1.5 c* t_end) = {m:.1e}, "
                          f"r2 linear {r2['linear']:.5f} > exp {r2['exp_t']:.5f}, log-of-front {r2['log_of_front']:.5f}, "
                          f"{elapsed:.0f}s")


# 8 ----------------------------------------------------------------------

def _self_convergence_ratio():
    sc = GrowthScenario(GrowthProfile.quadratic(0.25), 1.0)
    xs = np.linspace(-3, 3, 61)
    prof = {}
    for h in (0.2, 0.1, 0.05):
        g = Grid2D(Grid1D.from_spacing(-12, 12, h), Grid1D.from_spacing(-9, 9, h))
        X, Y = g.mesh()
        res = simulate(ScalarField2D(g, np.exp(-0.5 * Y ** 2 - 0.1 * X ** 2)), sc,
                       SolverConfig(dt=h / 2, t_end=2.0, window=g, output_stride=10 ** 6))
        prof[h] = trait_mass_profile(res.final.field, sc.rot, xs)
    return np.max(np.abs(prof[0.2] - prof[0.1])) / np.max(np.abs(prof[0.1] - prof[0.05]))


def _comparison_ok():
    from gradfront.spectral import harmonic_closed_form
    eig = harmonic_closed_form(0.25, 1.0)
    g = Grid2D(Grid1D.from_spacing(-14, 14, 0.2), Grid1D.from_spacing(-9, 9, 0.2))
    sc = GrowthScenario(GrowthProfile.quadratic(0.25), 1.0)
    v0 = build_initial_field(InitialDataSpec(TailFamily("compact", support_hi=2.0), y_profile="eigen_profile"),
                             g, sc.rot, eig)
    cfg = SolverConfig(dt=0.05, t_end=4.0, window=g, output_stride=20, keep_fields=True)
    nl, lin = simulate(v0, sc, cfg), simulate(v0, sc.linear(), cfg)
    rep = linear_supersolution_check([x.field for x in nl.snapshots], eig, 1.0,
                                     linear_fields=[x.field for x in lin.snapshots])
    return rep.passed and rep.comparison_passed


def _inverse_max_error():
    worst = 0.0
    for f in (TailFamily("algebraic", a=2.0), TailFamily("light_heavy", a=0.5, b=1.0),
              TailFamily("logarithmic", a=1.0, x0=math.e), TailFamily("exponential", lam=1.0)):
        lo = -200.0 if f.kind != "logarithmic" else -2.7
        for e in np.linspace(lo, -1e-3, 40):
            v = 10.0 ** e
            worst = max(worst, abs(float(eval_tail(f, tail_inverse(f, v)[0])) / v - 1))
    return worst


def _ordering_ok():
    ladder = np.linspace(0.0, 200.0, 201)
    for f in (TailFamily("algebraic", a=2.0), TailFamily("light_heavy", a=0.5, b=1.0),
              TailFamily("logarithmic", a=1.0, x0=math.e)):
        for a, b in ((0.1, 0.2), (0.2, 0.35)):
            for Ga in (1.0, 10.0):
                for Gb in (1.0, 10.0):
                    for chi in (1.0, 10.0):
                        onset = ordering_onset(f, a, b, Ga, Gb, chi, ladder)
                        if onset is None:
                            return False
                        for t in ladder[ladder >= onset]:
                            xa = log_tail_inverse(f, math.log(Ga) - a * t)
                            xb = log_tail_inverse(f, math.log(Gb) - b * t)
                            c = math.log(chi)
                            if xb < max(xa, c) + math.log1p(math.exp(-abs(xa - c))):
                                return False
    return True


def _heat_max_error():
    worst = 0.0
    for t in (0.01, 0.1, 1.0, 5.0):
        for y in np.linspace(-10, 10, 41):
            oracle = quad(lambda z: math.exp(-(y - z) ** 2 / (4 * t)) / math.sqrt(4 * math.pi * t), -1, 1,
                          epsabs=1e-15, epsrel=1e-12, limit=200)[0]
            worst = max(worst, abs(heat_indicator_profile(-1.0, 1.0, t, y) - oracle))
    return worst


def test_criterion_8_property_suite(runs, capsys):
    _, d, s, _ = runs.get("ballistic")
    diag = s["diagnostics"]
    mass_ok = diag["mass_max"] <= 1.05 * diag["N_inf"]
    clamp_ok = diag["clamp_fraction_max"] < 1e-4
    cmp_ok = _comparison_ok()
    ratio = _self_convergence_ratio()
    inv = _inverse_max_error()
    order_ok = _ordering_ok()
    heat = _heat_max_error()
    ok = mass_ok and clamp_ok and cmp_ok and 2.5 <= ratio <= 6 and inv < 1e-10 and order_ok and heat < 1e-8
    report(capsys, 8, ok, f"mass {diag['mass_max']:.4f} <= 1.05*{diag['N_inf']:.4f}: {mass_ok}; "
                          f"clamp {diag['clamp_fraction_max']:.1e}/step; nonlocal<=linear {cmp_ok}; "
                          f"convergence ratio {ratio:.2f}; tail_inverse err {inv:.1e}; ordering {order_ok}; "
                          f"heat err {heat:.1e}")


# 9 ----------------------------------------------------------------------

def test_criterion_9_logarithmic_envelope(runs, capsys):
    sc, d, s, _ = runs.get("logarithmic_tail")
    ladder = [e for e in s["envelope_ladder"] if e["t"] >= 10]
    right = ladder[0]["window_right_x"] if ladder else math.nan
    ok = bool(ladder) and all(e["defined"] and e["ln_lower"] > math.log(e["window_right_x"]) for e in ladder)
    vals = ", ".join(f"t={e['t']:g}: ln lower {e['ln_lower']:.3g}" for e in ladder)
    report(capsys, 9, ok, f"window right edge x={right:.1f} (ln {math.log(right):.2f}); {vals}")
