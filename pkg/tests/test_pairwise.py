import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_extremes, simplex3_extreme
from simgap.confidence_sets import build_confidence_set
from simgap.discrepancy import pairwise_sup
from simgap.domain import BoundedScalar, Dataset, Empirical1D, LossSpec, ScenarioRecord, Simplex, wasserstein_1d
from simgap.estimators import PairwiseComparator
from simgap.exceptions import MissingSecondSimulator, ValidationError
from simgap.pairwise import compute_pairwise, dominance_table, pairwise_gap
from simgap.calibration import QuantileCurve

unit = st.floats(-0.95, 0.95)


def bounded(p, q1, q2, n=50, k=50):
    return ScenarioRecord("s", BoundedScalar(p), n, BoundedScalar(q1), k, BoundedScalar(q2))


def simplex(p, q1, q2, n=400, k=400):
    return ScenarioRecord("s", Simplex(tuple(p)), n, Simplex(tuple(q1)), k, Simplex(tuple(q2)))


@settings(max_examples=40, deadline=None)
@given(unit, unit, unit, st.sampled_from(["squared", "absolute"]))
def test_interval_sup_matches_grid(p, a, b, kind):
    rec = bounded(p, a, b)
    C = build_confidence_set(rec, 0.5)
    lo, hi = C.interval()
    f = (lambda x: (x - a) ** 2 - (x - b) ** 2) if kind == "squared" else (lambda x: np.abs(x - a) - np.abs(x - b))
    top, _ = grid_extremes(f, lo, hi, 200_001)
    got = pairwise_sup(C, BoundedScalar(a), BoundedScalar(b), LossSpec(kind))
    assert top - 1e-12 <= got <= top + 1e-4


@settings(max_examples=40, deadline=None)
@given(unit, unit, unit, st.sampled_from(["squared", "absolute"]))
def test_antisymmetry_and_bracketing(p, a, b, kind):
    loss = LossSpec(kind)
    g12 = pairwise_gap(bounded(p, a, b), 0.5, loss)
    g21 = pairwise_gap(bounded(p, b, a), 0.5, loss)
    assert g12.plug_in == -g21.plug_in
    assert g12.delta >= g12.plug_in and g21.delta >= g21.plug_in
    # sup f + sup(-f) >= 0 over a shared set
    assert g12.delta + g21.delta >= -1e-15


@pytest.mark.parametrize("kind", ["kl", "tv"])
@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_simplex3_pairwise_vs_brute_force(kind, seed):
    rng = np.random.default_rng(seed)
    p, q1, q2 = rng.dirichlet(np.full(3, 3.0), size=3)
    rec = simplex(p, q1, q2)
    C = build_confidence_set(rec, 0.5)
    loss = LossSpec(kind)
    if kind == "kl":
        def f(U):
            return (U * np.log(q2 / q1)).sum(axis=1)
    else:
        def f(U):
            return 0.5 * (np.abs(U - q1) - np.abs(U - q2)).sum(axis=1)
    brute = simplex3_extreme(p, C.radius, f)
    got = pairwise_sup(C, Simplex(tuple(q1)), Simplex(tuple(q2)), loss)
    assert got >= brute - 1e-9
    assert got <= brute + 5e-3


def test_identical_simulators_tie():
    rng = np.random.default_rng(3)
    recs = []
    for i in range(40):
        p, q = rng.dirichlet(np.ones(3), size=2)
        recs.append(ScenarioRecord(f"s{i}", Simplex(tuple(p)), 300, Simplex(tuple(q)), 300, Simplex(tuple(q))))
    rep = compute_pairwise(Dataset(recs), loss="tv", alpha_grid=[0.1, 0.5])
    assert all(g.delta == 0.0 and g.plug_in == 0.0 for g in rep.gaps)
    for row in rep.table:
        assert row["tie"] and row["certified"] and not row["strict"]


def test_clearly_better_simulator_is_certified():
    rng = np.random.default_rng(4)
    recs = []
    for i in range(300):
        p = rng.uniform(-0.5, 0.5)
        recs.append(bounded(p, p + rng.normal(0, 0.01), p - 0.45 * np.sign(p), n=2000))
    recs = [ScenarioRecord(f"s{i}", r.p_hat, r.n, r.q_hat, r.k, r.q_hat_2) for i, r in enumerate(recs)]
    comp = PairwiseComparator(alpha_grid=[0.2]).fit(recs)
    row = comp.dominance(0.2)
    assert row["strict"] and comp.certified(0.2) and not row["vacuous"]
    # reversed order can never be certified
    flipped = [ScenarioRecord(r.scenario_id, r.p_hat, r.n, r.q_hat_2, r.k, r.q_hat) for r in recs]
    assert not PairwiseComparator(alpha_grid=[0.2]).fit(flipped).certified(0.2)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=50))
def test_certification_monotone_in_alpha(vals):
    table = dominance_table(QuantileCurve.from_values(vals), 0.05, [0.05, 0.1, 0.2, 0.5, 0.9])
    cert = [r["certified"] for r in table]
    # once certified at some alpha, every larger alpha is certified too
    assert cert == sorted(cert)
    thresholds = [r["threshold"] for r in table]
    assert thresholds == sorted(thresholds, reverse=True)


def test_w1_pairwise_matches_triangle_bound():
    p = Empirical1D((0.0, 0.5, 1.0), 1.0)
    rec = ScenarioRecord("w", p, 3, Empirical1D((0.1, 0.4, 1.2)), 3, Empirical1D((2.0, 3.0)))
    C = build_confidence_set(rec, 0.5)
    got = pairwise_sup(C, rec.q_hat, rec.q_hat_2, LossSpec("w1"))
    w1, w2 = wasserstein_1d(p.samples, rec.q_hat.samples), wasserstein_1d(p.samples, rec.q_hat_2.samples)
    assert got == w1 + C.radius - max(w2 - C.radius, 0.0)
    assert got >= w1 - w2


def test_pairwise_input_errors():
    recs = [ScenarioRecord("a", BoundedScalar(0.1), 10, BoundedScalar(0.2), 10)]
    with pytest.raises(MissingSecondSimulator):
        compute_pairwise(Dataset(recs))
    recs = [ScenarioRecord("a", BoundedScalar(0.1), 10, BoundedScalar(0.2), 10, BoundedScalar(0.3), 20)]
    with pytest.raises(ValidationError):
        compute_pairwise(Dataset(recs))
