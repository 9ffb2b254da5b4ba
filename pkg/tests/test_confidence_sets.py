import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.special import rel_entr

from simgap.confidence_sets import (
    ConfidenceSet, build_confidence_set, confidence_set_around, radius_bernoulli, radius_bounded,
    radius_multinomial, radius_w1, split_gamma_joint,
)
from simgap.domain import BoundedScalar, Empirical1D, ScenarioRecord, Simplex
from simgap.exceptions import IncompatibleHint, InvalidGamma, NonpositiveSigma, RegimeWarning, ValidationError
from simgap.synthetic import w1_normal_empirical


def test_radius_bounded_value():
    # 2 * sqrt(log 4 / 100)
    assert radius_bounded(50, 0.5, -1, 1) == pytest.approx(2 * math.sqrt(math.log(4) / 100), rel=1e-15)
    assert radius_bounded(50, 0.5, -1, 1) == pytest.approx(0.2354820045, abs=1e-10)


def test_radius_bounded_scaling():
    assert radius_bounded(200, 0.3, -1, 1) == pytest.approx(radius_bounded(50, 0.3, -1, 1) / 2, rel=1e-14)
    assert radius_bounded(10, 1 - 1e-12, 0, 1) > 0


def test_radius_bernoulli_values():
    assert radius_bernoulli(100, 0.5) == pytest.approx(math.log(4) / 100, rel=1e-15)
    assert radius_bernoulli(1, 2 / math.e**2) == pytest.approx(2.0, rel=1e-14)
    assert radius_bernoulli(200, 0.5) == pytest.approx(radius_bernoulli(100, 0.5) / 2, rel=1e-15)


def test_radius_multinomial_values():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        assert radius_multinomial(500, 5, 0.5) == pytest.approx(0.008 * math.log(16), rel=1e-14)
        assert radius_multinomial(500, 5, 0.25) > radius_multinomial(500, 5, 0.5)
    assert radius_multinomial(37, 2, 0.3) == radius_bernoulli(37, 0.3)


def test_multinomial_regime_warning():
    with pytest.warns(RegimeWarning):
        radius_multinomial(10, 6, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RegimeWarning)
        radius_multinomial(10_000, 5, 0.5)


def test_radius_w1_values():
    assert radius_w1(10_000, 0.5, 1.0) == pytest.approx(5.12 + math.sqrt(0.0256 * math.e * math.log(2)), rel=1e-14)
    assert radius_w1(10_000, 1e-14, 1.0) == pytest.approx(5.12, abs=1e-6)
    assert radius_w1(400, 0.5, 2.0) == pytest.approx(2 * radius_w1(1600, 0.5, 2.0), rel=1e-14)
    with pytest.raises(NonpositiveSigma):
        radius_w1(10, 0.5, 0.0)


@given(st.integers(1, 10_000), st.integers(1, 10_000), st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_radii_monotone(n1, n2, g1, g2):
    assume(n1 < n2 and g1 + 1e-6 < g2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for f in (lambda n, g: radius_bounded(n, g, -1, 1), radius_bernoulli,
                  lambda n, g: radius_multinomial(n, 4, g), lambda n, g: radius_w1(n, g, 1.0)):
            assert f(n2, g1) < f(n1, g1)
        # bounded, Bernoulli and multinomial radii shrink as gamma grows; W1 grows
        for f in (lambda n, g: radius_bounded(n, g, -1, 1), radius_bernoulli, lambda n, g: radius_multinomial(n, 4, g)):
            assert f(n1, g2) < f(n1, g1)
        assert radius_w1(n1, g2, 1.0) > radius_w1(n1, g1, 1.0)


def test_invalid_gamma():
    for g in (0.0, 1.0, -0.5, float("nan")):
        with pytest.raises(InvalidGamma):
            radius_bernoulli(10, g)


def test_build_confidence_set_examples():
    rec = ScenarioRecord("a", BoundedScalar(0.3), 50, BoundedScalar(0.0), 10)
    C = build_confidence_set(rec, 0.5)
    assert C.family == "interval" and C.center.value == 0.3
    assert C.radius == pytest.approx(0.2354820045, abs=1e-10)

    C = build_confidence_set(ScenarioRecord("b", Simplex((0.4, 0.6)), 80, Simplex((0.5, 0.5)), 10), 0.5)
    assert C.family == "kl_ball" and C.radius == radius_bernoulli(80, 0.5)

    with pytest.raises(NonpositiveSigma):
        build_confidence_set(ScenarioRecord("c", Empirical1D((0.0, 1.0)), 2, Empirical1D((0.0,)), 1))
    C = build_confidence_set(ScenarioRecord("c", Empirical1D((0.0, 1.0), 2.0), 2, Empirical1D((0.0,)), 1))
    assert C.radius == radius_w1(2, 0.5, 2.0)


def test_family_hints():
    c = BoundedScalar(0.1)
    assert confidence_set_around(c, 10, family_hint="interval").family == "interval"
    with pytest.raises(IncompatibleHint):
        confidence_set_around(c, 10, family_hint="kl_ball")


def test_interval_clipping_and_contains():
    C = ConfidenceSet("interval", BoundedScalar(0.9), 0.3, 0.5, 10)
    assert C.interval() == (0.9 - 0.3, 1.0)
    assert C.contains(BoundedScalar(1.0)) and not C.contains(BoundedScalar(0.5))
    with pytest.raises(ValidationError):
        ConfidenceSet("kl_ball", BoundedScalar(0.9), 0.3, 0.5, 10)


def test_split_gamma_joint():
    a, b = split_gamma_joint(0.5)
    assert a == b == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert split_gamma_joint(1.0) == (1.0, 1.0)
    for g in np.linspace(0.01, 0.99, 50):
        a, b = split_gamma_joint(g)
        assert abs(a * b - g) <= 1e-15


# Monte Carlo coverage: the sets are conservative, so coverage should sit
# well above gamma = 0.5.

REPS = 10_000


@pytest.mark.parametrize("n", [30, 100, 500])
def test_coverage_bounded(n):
    rng = np.random.default_rng(n)
    p = rng.uniform(-0.8, 0.8)
    # outcomes 2 * Beta - 1 with mean p
    m = (p + 1) / 2
    x = 2 * rng.beta(2 * m, 2 * (1 - m), size=(REPS, n)) - 1
    r = radius_bounded(n, 0.5, -1, 1)
    assert np.mean(np.abs(x.mean(axis=1) - p) <= r) >= 0.5


@pytest.mark.parametrize("n", [30, 100, 500])
def test_coverage_bernoulli(n):
    rng = np.random.default_rng(n + 1)
    p = rng.uniform(0.05, 0.95)
    ph = rng.binomial(n, p, size=REPS) / n
    kl = rel_entr(ph, p) + rel_entr(1 - ph, 1 - p)
    assert np.mean(kl <= radius_bernoulli(n, 0.5)) >= 0.5


@pytest.mark.parametrize("n", [30, 100, 500])
def test_coverage_multinomial(n):
    rng = np.random.default_rng(n + 2)
    p = rng.dirichlet(np.ones(3))
    ph = rng.multinomial(n, p, size=REPS) / n
    kl = rel_entr(ph, p).sum(axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        r = radius_multinomial(n, 3, 0.5)
    assert np.mean(kl <= r) >= 0.5


@pytest.mark.parametrize("n", [30, 100, 500])
def test_coverage_w1(n):
    rng = np.random.default_rng(n + 3)
    mu = rng.uniform(-1, 1)
    r = radius_w1(n, 0.5, 1.0)
    x = np.sort(rng.normal(mu, 1.0, size=(1000, n)), axis=1)
    inside = [w1_normal_empirical(mu, 1.0, row) <= r for row in x]
    assert np.mean(inside) >= 0.5
