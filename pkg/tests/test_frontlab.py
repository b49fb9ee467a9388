import json
import math

import numpy as np
import pytest

from gradfront import frontlab as fl
from gradfront.errors import InsufficientData, LevelOutOfRange
from gradfront.growth import TailFamily


def _trace(t, lo, hi=None, mu=0.1):
    hi = lo if hi is None else hi
    tr = fl.LevelSetTrace(mu)
    for ti, a, b in zip(t, lo, hi):
        tr.append(float(ti), (float(a), float(b)))
    return tr


# -- level sets

def test_level_set_ramp():
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    N = np.array([1.0, 1.0, 1.0, 0.0, 0.0])
    assert fl.extract_level_set(x, N, 0.5) == pytest.approx((0.5, 0.5))


def test_level_set_empty_below_level():
    x = np.linspace(-1, 1, 11)
    assert fl.extract_level_set(x, np.full(11, 0.2), 0.5) is None


def test_level_set_tent():
    x = np.linspace(-2, 2, 41)
    N = np.maximum(1 - np.abs(x), 0)
    assert fl.extract_level_set(x, N, 0.5) == pytest.approx((-0.5, 0.5), abs=1e-12)


def test_level_set_rejects_nonpositive_mu():
    with pytest.raises(ValueError):
        fl.extract_level_set([0, 1], [1, 0], 0.0)


def test_trace_invariants():
    tr = fl.LevelSetTrace(0.1)
    tr.append(0.0, (0.0, 1.0))
    tr.append(1.0, None)
    assert list(tr.nonempty) == [True, False]
    assert math.isnan(tr.ordinate("min")[1])
    with pytest.raises(ValueError):
        tr.append(0.5, (0.0, 1.0))
    with pytest.raises(ValueError):
        fl.LevelSetTrace(0.1, [fl.LevelSample(0.0, 2.0, 1.0, True)])
    with pytest.raises(ValueError):
        fl.LevelSetTrace(-1.0)


def test_trace_from_profiles():
    x = np.linspace(0, 10, 101)
    times = [0.0, 1.0, 2.0]
    profiles = [(x, np.clip(1 - (x - ti) / 2, 0, 1)) for ti in times]
    tr = fl.trace_from_profiles(times, profiles, 0.5)
    assert tr.ordinate("min") == pytest.approx([1.0, 2.0, 3.0])


# -- envelopes

def _params(B, lam0_R=-0.25, eps=0.05):
    return fl.EnvelopeParams(eps=eps, gamma_small=1.0, Gamma_big=1.0, lambda0=-0.3, lambda0_R=lam0_R, B=B)


def test_envelope_algebraic_example():
    tail = TailFamily("algebraic", a=2.0)
    lo, _ = fl.theoretical_envelope(tail, tail, _params(1.0), 20.0)
    assert lo == pytest.approx(math.e ** 2 / math.sqrt(2), rel=1e-12)
    assert lo == pytest.approx(5.224, abs=1e-3)


def test_envelope_light_heavy_example():
    tail = TailFamily("light_heavy", a=0.5, b=1.0)
    lo, _ = fl.theoretical_envelope(tail, tail, _params(0.0), 20.0)
    assert lo == pytest.approx(16.0, rel=1e-12)


def test_envelope_logarithmic_example():
    tail = TailFamily("logarithmic", a=1.0)
    ln_lo, _ = fl.log_theoretical_envelope(tail, tail, _params(0.0), 20.0)
    assert ln_lo == pytest.approx(math.exp(4.0), rel=1e-12)
    lo, hi = fl.theoretical_envelope(tail, tail, _params(0.0), 20.0)
    assert lo == pytest.approx(math.exp(math.exp(4.0)), rel=1e-10)
    assert hi == math.inf  # upper rate 0.35 puts the upper end past the float range


def test_envelope_not_yet_defined():
    tail = TailFamily("algebraic", a=2.0, plateau=1.0)
    with pytest.raises(LevelOutOfRange):
        fl.theoretical_envelope(tail, tail, fl.EnvelopeParams(0.05, 1.0, 10.0, -0.3, -0.25, 0.0), 0.0)
    lo, hi = fl.envelope_series(tail, tail, fl.EnvelopeParams(0.05, 1.0, 10.0, -0.3, -0.25, 0.0), [0.0, 20.0])
    assert math.isnan(lo[0]) and math.isfinite(lo[1])


def test_envelope_params_validation():
    with pytest.raises(ValueError):
        fl.EnvelopeParams(0.05, 1.0, 1.0, -0.3, 0.1, 0.0)
    with pytest.raises(ValueError):
        fl.EnvelopeParams(0.05, 1.0, 1.0, -0.2, -0.25, 0.0)
    with pytest.raises(ValueError):
        fl.EnvelopeParams(0.3, 1.0, 1.0, -0.3, -0.25, 0.0)
    with pytest.raises(ValueError):
        fl.EnvelopeParams(0.05, 0.0, 1.0, -0.3, -0.25, 0.0)


def test_lower_below_upper_onset():
    tail = TailFamily("algebraic", a=2.0)
    p = _params(1.0)
    onset = fl.envelope_lower_exceeds_upper_onset(tail, tail, p, np.arange(0.0, 30.0, 0.5))
    assert onset is not None
    for t in np.arange(onset, 30.0, 0.5):
        lo, hi = fl.theoretical_envelope(tail, tail, p, t)
        assert lo < hi


# -- fits

def test_fit_linear_exact():
    t = np.linspace(1, 10, 20)
    r = fl.fit_rate(_trace(t, 2 * t), "linear", (1, 10))
    assert r.rate == pytest.approx(2.0, rel=1e-10) and r.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_exp_exact():
    t = np.linspace(1, 10, 20)
    r = fl.fit_rate(_trace(t, np.exp(0.1 * t)), "exp_t", (1, 10))
    assert r.rate == pytest.approx(0.1, rel=1e-10) and r.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_power_and_log_of_front_exact():
    t = np.linspace(1, 10, 20)
    r = fl.fit_rate(_trace(t, (3 * t) ** 2), "power_t", (1, 10), a=0.5)
    assert r.rate == pytest.approx(3.0, rel=1e-10)
    r = fl.fit_rate(_trace(t, np.exp(np.exp(0.2 * t))), "log_of_front", (1, 10))
    assert r.rate == pytest.approx(0.2, rel=1e-10)


def test_fit_linear_log_recovers_delay():
    t = np.linspace(5, 30, 40)
    E = 0.75 * t - 1.5 * np.log(t) + 2.0
    r = fl.fit_rate(_trace(t, E), "linear_log", (5, 30))
    assert r.rate == pytest.approx(0.75, rel=1e-10)
    assert r.extra["log_coefficient"] == pytest.approx(1.5, rel=1e-10)


def test_fit_power_exponent_with_shift():
    t = np.linspace(5, 20, 30)
    pw = fl.fit_power_exponent(_trace(t, (0.4 * t + 3.0) ** 2), (5, 20))
    assert pw.exponent == pytest.approx(2.0, rel=1e-6)
    assert pw.loglog_slope < 1.9  # the unshifted slope is biased low


def test_fit_insufficient_data():
    t = np.linspace(1, 2, 5)
    with pytest.raises(InsufficientData):
        fl.fit_rate(_trace(t, t), "linear", (1, 2))
    tr = _trace(np.linspace(1, 10, 10), np.linspace(1, 10, 10))
    tr.append(11.0, None)
    with pytest.raises(InsufficientData):
        fl.fit_rate(tr, "linear", (1, 11))
    with pytest.raises(ValueError):
        fl.fit_rate(tr, "cubic", (1, 10))


# -- regimes

def test_classify_extinct():
    t = np.linspace(0, 5, 51)
    tr = fl.LevelSetTrace(0.1)
    for ti in t:
        tr.append(float(ti), (0.0, 1.0) if ti < 1 else None)
    reg = fl.classify_regime(tr, t, np.exp(-t))
    assert reg.kind == "extinct" and reg.value == pytest.approx(1.0)


def test_classify_ballistic_and_accelerating():
    t = np.linspace(0.5, 30, 60)
    sup = np.ones_like(t)
    reg = fl.classify_regime(_trace(t, 0.7 * t - np.log(t) + 3), t, sup, window=(10, 30))
    assert reg.kind == "ballistic" and reg.value == pytest.approx(0.7, rel=1e-8)
    reg = fl.classify_regime(_trace(t, np.exp(0.15 * t)), t, sup, window=(10, 30))
    assert reg.kind == "accelerating" and reg.details["exp_t_rate"] == pytest.approx(0.15)
    reg = fl.classify_regime(_trace(t, (0.2 * t + 1) ** 2), t, sup, window=(10, 30))
    assert reg.kind == "accelerating"


def test_classify_short_series():
    t = np.linspace(0, 2, 5)
    with pytest.raises(InsufficientData):
        fl.classify_regime(_trace(t, t), t, np.ones_like(t))


# -- violations

def test_violation_inside_envelope():
    t = np.linspace(0, 10, 11)
    tr = _trace(t, t, 2 * t + 1)
    rep = fl.envelope_violation_report(tr, t - 1, 2 * t + 2)
    assert rep.fraction == 0.0 and rep.n_evaluated == 11 and rep.onset == 0.0


def test_violation_flags_and_onset():
    t = np.linspace(0, 10, 11)
    tr = _trace(t, t, t)
    lower = np.where(t < 4, t + 1, t - 1)
    upper = np.full(11, np.nan)
    upper[2:] = 100.0
    rep = fl.envelope_violation_report(tr, lower, upper)
    assert rep.n_evaluated == 9  # bounds defined from t = 2 on
    assert rep.lower_fraction == pytest.approx(2 / 9) and rep.upper_fraction == 0.0
    assert rep.onset == 4.0
    with pytest.raises(ValueError):
        fl.envelope_violation_report(tr, lower[:3], upper)


def test_consistent_constants_bracket_trace():
    tail = TailFamily("algebraic", a=2.0)
    p = _params(0.0)
    t = np.linspace(10, 20, 11)  # both ends well inside the pure power-law part of the tail
    lo_env, hi_env = fl.envelope_series(tail, tail, p, t)
    tr = _trace(t, 1.5 * lo_env, 0.5 * hi_env)
    c = fl.consistent_envelope_constants(tr, tail, tail, p, (10, 20))
    # E_lo = 1.5 u^-1(e^{-rt}) means u(E_lo) e^{rt} = 1.5^-2
    assert c["Gamma_min"] == pytest.approx(1.5 ** -2, rel=1e-10)
    assert c["gamma_max"] == pytest.approx(0.5 ** -2, rel=1e-10)


# -- beta and output

def test_beta_estimate():
    m = np.concatenate([np.linspace(0, 0.3, 30), np.full(10, 0.3)])
    b = fl.estimate_beta(m)
    assert b["plateau"] == pytest.approx(0.3) and b["beta"] == pytest.approx(0.15)


def test_writers(tmp_path):
    t = np.linspace(0, 1, 3)
    tr = _trace(t, t)
    tr.append(2.0, None)
    lo = np.array([np.nan, 0.0, 0.0, 0.0])
    rep = fl.envelope_violation_report(tr, lo, lo + 5)
    fl.write_level_sets(tmp_path / "ls.csv", [tr], [(lo, lo + 5)], [rep])
    rows = (tmp_path / "ls.csv").read_text().splitlines()
    assert rows[0] == "t,mu,min_E,max_E,lower_bound,upper_bound,violated_lower,violated_upper"
    assert len(rows) == 5 and rows[1].split(",")[4] == ""
    fl.write_regime(tmp_path / "r.json", fl.Regime("ballistic", 0.7, {"x": math.inf}))
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["classification"] == "ballistic" and d["x"] is None
