import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import riemann
from simgap.calibration import (
    QuantileCurve, auc_cal, band, band_table, calibrated_curve, calibration_report, coverage_table, cvar_cal,
    empirical_quantile, epsilon_correction, guaranteed_coverage, new_scenario_set,
)
from simgap.discrepancy import PseudoGap
from simgap.domain import BoundedScalar, Empirical1D, LossSpec, Simplex
from simgap.exceptions import AlphaOutOfRange, IncompatibleVariant, InvalidEta, ValidationError

values = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40)


def curve(v):
    return QuantileCurve.from_values(v)


def test_empirical_quantile_examples():
    c = curve([0.5, 0.1, 0.4, 0.2, 0.3])
    assert empirical_quantile(c, 0.5) == 0.3
    assert empirical_quantile(c, 1.0) == 0.5
    assert empirical_quantile(c, 1 / 10) == 0.1
    with pytest.raises(AlphaOutOfRange):
        empirical_quantile(c, 0.0)


@given(values, st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_empirical_quantile_sort_count_oracle(v, a1, a2):
    c = curve(v)
    m = len(v)
    for a in (a1, a2):
        # smallest x with #{v <= x} >= ceil(m a) (with the same rounding guard)
        need = max(1, math.ceil(m * a * (1 - 1e-12)))
        oracle = min(x for x in v if sum(y <= x for y in v) >= need)
        assert empirical_quantile(c, a) == oracle
    if a1 <= a2:
        assert empirical_quantile(c, a1) <= empirical_quantile(c, a2)


def test_index_guard_against_float_noise():
    # 30 * 0.1 is 3.0000000000000004 in floating point
    assert curve(range(30)).index(0.1) == 3
    c = curve(range(20))
    assert c.index(1 - 0.1 / 2) == 19
    assert c.index(0.15) == 3
    assert curve([1.0, 3.0]).index(0.5 + 1e-10) == 2


def test_epsilon_value_term_by_term():
    m, alpha, eta = 235, 0.1, 0.05
    L = math.log(2 * m / eta)
    t1 = math.sqrt(2 * alpha * L + (L**2 + 4 * L) / m)
    t2 = (L + 2) / math.sqrt(m)
    t3 = math.sqrt(math.log(4 / eta) / 2)
    assert (round(t1, 5), round(t2, 5), round(t3, 5)) == (1.53022, 0.72725, 1.48021)
    eps = epsilon_correction(alpha, m, eta)
    assert eps == pytest.approx(t1 + t2 + t3, rel=1e-15)
    assert abs(eps - 3.7377) <= 5e-4
    assert eps / math.sqrt(m) == pytest.approx(0.2438, abs=1e-4)


def test_epsilon_invalid_args():
    with pytest.raises(InvalidEta):
        epsilon_correction(0.1, 10, 0.0)
    with pytest.raises(AlphaOutOfRange):
        epsilon_correction(1.0, 10, 0.05)
    with pytest.raises(ValidationError):
        epsilon_correction(0.1, 0, 0.05)


@given(st.floats(0.001, 0.998), st.floats(0.001, 0.998), st.integers(1, 10**6), st.floats(0.001, 0.5))
def test_epsilon_nondecreasing_in_alpha(a1, a2, m, eta):
    assume(a1 < a2)
    assert epsilon_correction(a1, m, eta) <= epsilon_correction(a2, m, eta)


def test_epsilon_rate():
    ms = [10**2, 10**4, 10**6]
    scaled = [epsilon_correction(0.1, m, 0.05) / math.sqrt(m) for m in ms]
    assert scaled[0] > scaled[1] > scaled[2] and scaled[2] < 0.01
    ratio = [s / math.sqrt(math.log(m) / m) for s, m in zip(scaled, ms)]
    assert all(b <= 1.2 * a for a, b in zip(ratio, ratio[1:]))
    assert abs(ratio[2] / ratio[1] - 1) <= 0.2


def test_guaranteed_coverage_examples():
    c = curve(np.linspace(0, 1, 235))
    cov = guaranteed_coverage(c, 0.1, eta=0.05)
    assert cov.raw == pytest.approx(0.6561814324258469, abs=1e-12)
    assert abs(cov.raw - 0.6562) < 1e-4
    assert cov.threshold == empirical_quantile(c, 0.95) and not cov.vacuous
    small = guaranteed_coverage(curve(range(10)), 0.1, eta=0.05)
    assert small.raw < 0 and small.clamped == 0.0 and small.vacuous
    assert guaranteed_coverage(c, 1 - 1e-9).raw <= 0


@settings(max_examples=60)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.integers(8, 10**6), st.integers(8, 10**6),
       st.floats(0.001, 0.5))
def test_coverage_monotone(a1, a2, m1, m2, eta):
    assume(a1 < a2 and m1 < m2)
    c = curve([0.0])
    assert guaranteed_coverage(c, a2, m1, eta).raw <= guaranteed_coverage(c, a1, m1, eta).raw
    assert guaranteed_coverage(c, a1, m1, eta).raw <= guaranteed_coverage(c, a1, m2, eta).raw


def test_calibrated_curve_examples():
    c = curve([1.0, 3.0])
    assert calibrated_curve(c, 0.0) == 1.0
    for t in (1e-9, 0.3, 1.0):
        assert calibrated_curve(c, t) == 3.0
    c = curve(np.random.default_rng(0).normal(size=17))
    taus = np.linspace(0, 1, 101)
    vals = [calibrated_curve(c, t) for t in taus]
    assert vals[-1] == max(c.values)
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_auc_cvar_examples():
    assert auc_cal(curve([1.0, 3.0])) == 3.0
    assert auc_cal(curve([2.5] * 7)) == pytest.approx(2.5, abs=1e-15)
    assert auc_cal(curve([0, 0, 2, 4])) == pytest.approx(3.0, abs=1e-15)
    assert auc_cal(curve([0, 0, 2, 4])) == pytest.approx(riemann([0, 0, 2, 4], 0, 1), abs=1e-5)
    assert cvar_cal(curve([1.0, 3.0]), 0.5) == 3.0
    for a in (0.01, 0.3, 0.99):
        assert cvar_cal(curve([1.7] * 5), a) == pytest.approx(1.7, abs=1e-14)
    c = curve(np.random.default_rng(1).exponential(size=13))
    assert cvar_cal(c, 1 - 1e-12) == pytest.approx(auc_cal(c), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(values, st.floats(0.01, 0.99))
def test_auc_cvar_match_riemann(v, alpha):
    c = curve(v)
    assert auc_cal(c) == pytest.approx(riemann(v, 0, 1), abs=1e-5 * max(1, max(map(abs, v))))
    assert cvar_cal(c, alpha) == pytest.approx(riemann(v, 1 - alpha, 1) / alpha,
                                               abs=1e-5 * max(1, max(map(abs, v))) / alpha)


@given(values, st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_cvar_nonincreasing_in_alpha(v, a1, a2):
    assume(a1 < a2)
    c = curve(v)
    assert cvar_cal(c, a1) >= cvar_cal(c, a2) - 1e-12


def test_new_scenario_set_examples():
    loss = LossSpec("squared")
    # tau = 0.04 from a curve whose 1 - alpha/2 quantile is 0.04
    c = curve([0.01, 0.02, 0.04, 0.04])
    s = new_scenario_set(c, BoundedScalar(0.2), 0.5, loss)
    assert s.tau == 0.04 and s.interval == pytest.approx((0.0, 0.4), abs=1e-15)
    assert s.contains(BoundedScalar(0.39)) and not s.contains(BoundedScalar(0.41))
    zero = new_scenario_set(curve([0.0, 0.0]), BoundedScalar(0.2), 0.5, loss)
    assert zero.interval == (0.2, 0.2)
    widths = []
    for t in (0.0, 0.01, 0.04, 0.2, 1.0):
        iv = new_scenario_set(curve([t]), BoundedScalar(0.2), 0.5, loss).interval
        widths.append(iv[1] - iv[0])
    assert widths == sorted(widths)


def test_new_scenario_set_other_losses():
    c = curve([0.05] * 4)
    s = new_scenario_set(c, Simplex((0.3, 0.7)), 0.2, LossSpec("tv"))
    assert s.kind == "tv_ball" and s.interval == pytest.approx((0.25, 0.35))
    s = new_scenario_set(c, Simplex((0.3, 0.7)), 0.2, LossSpec("kl"))
    assert s.kind == "kl_level_set"
    lo, hi = s.interval
    # interval ends lie on the level set KL(u || q) = tau
    for u in (lo, hi):
        kl = u * math.log(u / 0.3) + (1 - u) * math.log((1 - u) / 0.7)
        assert kl == pytest.approx(0.05, abs=1e-9)
    s3 = new_scenario_set(c, Simplex((0.2, 0.3, 0.5)), 0.2, LossSpec("kl"))
    assert s3.contains(Simplex((0.2, 0.3, 0.5))) and not s3.contains(Simplex((0.6, 0.2, 0.2)))
    w = new_scenario_set(c, Empirical1D((0.0, 1.0)), 0.2, LossSpec("w1"))
    assert w.kind == "w1_ball" and w.to_dict()["radius"] == 0.05
    with pytest.raises(IncompatibleVariant):
        new_scenario_set(c, BoundedScalar(0.1), 0.2, LossSpec("tv"))


def test_band_examples():
    up = curve(np.arange(1, 101) / 100)
    lo = curve(np.arange(1, 101) / 200)
    b = band(up, lo, 0.5, 0.5)
    assert b.lo == empirical_quantile(lo, 0.25) and b.hi == empirical_quantile(up, 0.75)
    b1 = band(up, lo, 1.0, 0.3)
    assert b1.lo == empirical_quantile(lo, 0.3) and b1.hi == max(up.values)
    b0 = band(up, lo, 0.5, 0.0)
    assert b0.lo_at_minimum and b0.lo == min(lo.values)
    z = curve([0.0] * 5)
    assert band(z, z, 0.5, 0.5)[1:3] == (0.0, 0.0)
    with pytest.raises(ValidationError):
        band(up, curve([0.0]), 0.5, 0.5)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5)), min_size=1, max_size=30), st.floats(0.01, 1.0),
       st.floats(0.0, 1.0))
def test_band_sandwich(pairs, gamma, tau):
    gaps = [(min(a, b), max(a, b)) for a, b in pairs]
    lower = curve([g[0] for g in gaps])
    upper = curve([g[1] for g in gaps])
    b = band(upper, lower, gamma, tau)
    assert b.lo <= b.hi


def _gaps(vals):
    return [PseudoGap(f"s{i}", v, v / 2, v * 0.8, "ClosedForm") for i, v in enumerate(vals)]


def test_report_tables():
    rep = calibration_report(_gaps([0.1, 0.2, 0.3, 0.4, 0.5]), 0.05, {"gamma": 0.5})
    assert len(rep.coverage) == 99 and len(rep.calibrated) == 101
    assert rep.coverage[0]["alpha"] == 0.01 and rep.coverage[-1]["alpha"] == 0.99
    assert all(r["vacuous"] for r in rep.coverage)
    assert rep.summaries["auc_cal"] == auc_cal(rep.curve)
    d = rep.to_dict()
    assert d["params"]["m"] == 5 and d["params"]["gamma"] == 0.5 and len(d["gaps"]) == 5
    table = coverage_table(rep.curve, 0.05, "0.1,0.2")
    assert [r["alpha"] for r in table] == [0.1, 0.2]
    bt = band_table(rep.curve, rep.lower_curve, 0.5)
    assert len(bt.rows) == 9 and len(bt.to_dict()["notes"]) == 2
