"""Per-scenario pseudo-discrepancies over confidence sets.

For each scenario the upper value is the largest loss between a point of the
ground-truth confidence set and the simulator estimate, and the lower value is
the smallest. Closed forms are used wherever the loss is convex (or linear) in
the free argument; otherwise a certified branch-and-bound returns bounds that
over-estimate sups and under-estimate infs, which keeps every downstream
guarantee valid.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from itertools import product

import numpy as np
from scipy.special import rel_entr

from ._certified import DEFAULT_MESH, DEFAULT_SLACK_CAP, KLBlock, boundary_seeds, branch_and_bound, separable_max
from ._kl import BISECTION_TOL, _bisect, group_mass_bounds, kl_ball_boundary_1d, max_linear_kl_ball
from .confidence_sets import (
    DEFAULT_GAMMA, ConfidenceSet, build_confidence_set, confidence_set_around, split_gamma_joint,
)
from .domain import (
    BoundedScalar, Dataset, Empirical1D, LossSpec, ScenarioRecord, Simplex, bernoulli_kl, check_compatible,
    default_loss_for, evaluate_loss, kl_divergence, smooth, total_variation, validate_dataset, wasserstein_1d,
)
from .exceptions import DatasetInvalid, KLUndefined, SimGapError, ValidationError

D_EXACT = 12

CLOSED_FORM = "ClosedForm"
ENDPOINT_CONVEXITY = "EndpointConvexity"
SIGN_PATTERN_DUAL = "SignPatternDual"
CERTIFIED_GRID = "CertifiedGrid"
TRIANGLE_BOUND = "TriangleBound"
METHODS = (CLOSED_FORM, ENDPOINT_CONVEXITY, SIGN_PATTERN_DUAL, CERTIFIED_GRID, TRIANGLE_BOUND)

SIM_ESTIMATE = "sim_estimate"
TRUE_SIM = "true_sim"
_MODE_ALIASES = {
    "sim_estimate": SIM_ESTIMATE, "simestimatetarget": SIM_ESTIMATE, "sim-estimate": SIM_ESTIMATE,
    "true_sim": TRUE_SIM, "truesimtarget": TRUE_SIM, "true-sim": TRUE_SIM,
}


def parse_mode(mode):
    key = str(mode).lower()
    if key not in _MODE_ALIASES:
        raise ValidationError(f"unknown mode {mode!r}; use 'sim_estimate' or 'true_sim'")
    return _MODE_ALIASES[key]


@dataclass(frozen=True)
class PseudoGap:
    """Upper and lower pseudo-discrepancy of one scenario.

    ``slack`` bounds how far ``upper`` may exceed the true sup and
    ``lower_slack`` how far ``lower`` may fall below the true inf; both are 0
    for exact methods.
    """

    scenario_id: str
    upper: float
    lower: float
    plug_in: float
    method: str
    slack: float = 0.0
    lower_slack: float = 0.0

    def to_dict(self):
        return asdict(self)


def _as_loss(loss):
    return loss if isinstance(loss, LossSpec) else LossSpec(loss)


def _scalar_loss(kind, u, q):
    u = np.asarray(u, dtype=float)
    return (u - q) ** 2 if kind == "squared" else np.abs(u - q)


def _check_interval_args(C, q_hat, loss):
    if C.family != "interval":
        raise ValidationError(f"need an interval confidence set, got {C.family}")
    if loss.kind not in ("squared", "absolute"):
        raise ValidationError(f"interval sets take squared or absolute loss, got {loss.kind}")
    check_compatible(loss, C.center, q_hat)


def sup_loss_interval(C: ConfidenceSet, q_hat: BoundedScalar, loss) -> float:
    """Max of a convex scalar loss over the clipped interval: an endpoint."""
    loss = _as_loss(loss)
    _check_interval_args(C, q_hat, loss)
    lo, hi = C.interval()
    assert lo <= hi
    return float(max(_scalar_loss(loss.kind, lo, q_hat.value), _scalar_loss(loss.kind, hi, q_hat.value)))


def inf_loss_interval(C: ConfidenceSet, q_hat: BoundedScalar, loss) -> float:
    """Min of the loss over the clipped interval: 0 inside, nearest endpoint outside."""
    loss = _as_loss(loss)
    _check_interval_args(C, q_hat, loss)
    lo, hi = C.interval()
    q = q_hat.value
    if lo <= q <= hi:
        return 0.0
    return float(_scalar_loss(loss.kind, lo if q < lo else hi, q))


def _check_kl_ball(C, q_hat, loss=None):
    if C.family != "kl_ball":
        raise ValidationError(f"need a KL-ball confidence set, got {C.family}")
    if not isinstance(q_hat, Simplex) or q_hat.d != C.center.d:
        raise ValidationError("simulator estimate must be a simplex point of the ball's dimension")
    if loss is not None:
        check_compatible(loss, C.center, q_hat)


def _kl_pair(u1, v1, smoothing):
    """KL between Bernoulli vectors (u, 1-u) and (v, 1-v), elementwise, smoothed."""
    u = np.stack([np.asarray(u1, float), 1.0 - np.asarray(u1, float)], axis=-1)
    v = np.stack([np.asarray(v1, float), 1.0 - np.asarray(v1, float)], axis=-1)
    return kl_divergence(u, v, smoothing)


def sup_inf_kl_loss_bernoulli(C: ConfidenceSet, q_hat: Simplex, smoothing=0.0):
    """(sup, inf) of KL(u || q_hat) over a two-category KL ball, by convexity."""
    _check_kl_ball(C, q_hat)
    if C.center.d != 2:
        raise ValidationError(f"Bernoulli routine needs d = 2, got d = {C.center.d}")
    lo, hi = kl_ball_boundary_1d(C.center.probs[0], C.radius)
    q1 = q_hat.probs[0]
    ends = _kl_pair([lo, hi], [q1, q1], smoothing)
    upper = float(ends.max())
    if lo <= q1 <= hi:
        lower = 0.0
    else:
        lower = float(ends[0] if q1 < lo else ends[1])
    return upper, lower


def _subset_masks(d, exhaustive=True):
    """Boolean masks of nonempty proper subsets of {0..d-1}.

    With ``exhaustive`` False only singletons and their complements are listed.
    """
    if exhaustive:
        codes = np.arange(1, 2**d - 1)
        return ((codes[:, None] >> np.arange(d)) & 1).astype(bool)
    eye = np.eye(d, dtype=bool)
    return np.concatenate([eye, ~eye])


def _tv_subset_bounds(p, r, q, d_exact=D_EXACT):
    """Exact TV sup and a coarsening lower bound of the TV inf over a KL ball.

    TV(u, q) = max_A u(A) - q(A), so the sup swaps into max_A of the largest
    reachable u(A), which is the upper end of a Bernoulli ball.
    """
    masks = _subset_masks(p.size, p.size <= d_exact)
    lo, hi = group_mass_bounds(p, r, masks)
    qa = masks.astype(float) @ q
    upper = max(0.0, float(np.max(hi - qa)))
    lower = max(0.0, float(np.max(np.maximum(lo - qa, qa - hi))))
    return upper, lower


def _segment_inner_point(p, q, r):
    """Farthest point of the segment p -> q inside {u : KL(p || u) <= r}."""
    def outside(t):
        u = (1.0 - t)[:, None] * p + t[:, None] * q
        with np.errstate(divide="ignore", invalid="ignore"):
            return rel_entr(p, u).sum(axis=-1) > r
    if not outside(np.ones(1))[0]:
        return q.copy()
    # returns the outside end; step back to the inside one
    t_out = float(_bisect(outside, np.zeros(1), np.ones(1), BISECTION_TOL)[0])
    t_in = max(0.0, t_out - BISECTION_TOL)
    while t_in > 0 and outside(np.array([t_in]))[0]:
        t_in = max(0.0, t_in - 10 * BISECTION_TOL)
    return (1.0 - t_in) * p + t_in * q


def sup_tv_kl_ball(C: ConfidenceSet, q_hat: Simplex, d_exact=D_EXACT, mesh=DEFAULT_MESH,
                   slack_cap=DEFAULT_SLACK_CAP) -> float:
    """Max of the total variation to ``q_hat`` over a KL ball.

    Exact for d <= ``d_exact``; above that the certified search's upper end
    (value + slack) is returned.
    """
    _check_kl_ball(C, q_hat)
    p, q = C.center.as_array(), q_hat.as_array()
    if C.radius == 0:
        return float(total_variation(p, q))
    if p.size <= d_exact:
        return _tv_subset_bounds(p, C.radius, q, d_exact)[0]
    value, slack = certified_grid_sup(C, q_hat, LossSpec("tv"), mesh, slack_cap)
    return value + slack


def _check_kl_support(hi_u, q_s):
    if np.any((q_s <= 0) & (hi_u > 0)):
        raise KLUndefined("simulator distribution has a zero where the confidence set allows mass; set a smoothing > 0")


def certified_grid_sup(C: ConfidenceSet, q_hat: Simplex, loss, mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP):
    """Certified max of KL(u || q_hat) or TV(u, q_hat) over a KL ball.

    Returns ``(value, slack)`` with value <= sup <= value + slack; value is
    attained at a feasible point. Raises MeshTooCoarse when slack > slack_cap.
    """
    loss = _as_loss(loss)
    _check_kl_ball(C, q_hat, loss)
    p, q = C.center.as_array(), q_hat.as_array()
    if C.radius == 0:
        return evaluate_loss(loss, C.center, q_hat), 0.0
    block = KLBlock(p, C.radius)
    if loss.kind == "kl":
        beta = loss.smoothing
        qs = smooth(q, beta)
        _check_kl_support(block.hi, qs)

        def g(x):
            return rel_entr(smooth(x, beta), qs)

        def bound(a_list, b_list):
            return separable_max(g, a_list[0], b_list[0])

        def value(u_list):
            return g(u_list[0]).sum(axis=1)
    else:
        def g(x):
            return 0.5 * np.abs(x - q)

        def bound(a_list, b_list):
            return separable_max(g, a_list[0], b_list[0], kinks=(q,))

        def value(u_list):
            return g(u_list[0]).sum(axis=1)
    return branch_and_bound([block], bound, value, seeds=[boundary_seeds(block)], mesh=mesh, slack_cap=slack_cap)


def _w1_shift_values(p_samples, q_samples, r):
    """Loss at the two translates of P by +-r, both in the W1 ball of radius r."""
    p = np.asarray(p_samples, float)
    return wasserstein_1d(p + r, q_samples), wasserstein_1d(p - r, q_samples)


def pseudo_gap_w1(C: ConfidenceSet, q_hat: Empirical1D, scenario_id="") -> PseudoGap:
    """Triangle-inequality bounds W1 + r and max(W1 - r, 0).

    The slacks are certified against the two translated distributions,
    which lie in the ball.
    """
    if C.family != "w1_ball" or not isinstance(q_hat, Empirical1D):
        raise ValidationError("pseudo_gap_w1 needs a W1 ball and an empirical simulator estimate")
    w = wasserstein_1d(C.center.samples, q_hat.samples)
    r = C.radius
    if r == 0:
        return PseudoGap(scenario_id, w, w, w, CLOSED_FORM)
    shifted = _w1_shift_values(C.center.samples, q_hat.samples, r)
    upper = w + r
    lower = max(w - r, 0.0)
    return PseudoGap(scenario_id, upper, lower, w, TRIANGLE_BOUND,
                     slack=max(0.0, upper - max(shifted)), lower_slack=max(0.0, min(w, *shifted) - lower))


def _linear_kl_coeffs(q1, q2, beta, hi_u):
    """c with L(u, q1) - L(u, q2) = c . smooth(u) for KL loss."""
    s1, s2 = smooth(q1, beta), smooth(q2, beta)
    _check_kl_support(hi_u, s1)
    _check_kl_support(hi_u, s2)
    live = hi_u > 0
    c = np.zeros_like(s1)
    c[live] = np.log(s2[live] / s1[live])
    return c


def pairwise_sup(C: ConfidenceSet, q1, q2, loss, mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP) -> float:
    """Exact value or certified upper bound of sup_u L(u, q1) - L(u, q2)."""
    loss = _as_loss(loss)
    check_compatible(loss, C.center, q1, q2)
    if q1 == q2:
        return 0.0
    if C.family == "interval":
        lo, hi = C.interval()
        a, b = q1.value, q2.value
        pts = np.array([lo, hi] + ([] if loss.kind == "squared" else [min(max(a, lo), hi), min(max(b, lo), hi)]))
        return float(np.max(_scalar_loss(loss.kind, pts, a) - _scalar_loss(loss.kind, pts, b)))
    if C.family == "w1_ball":
        r = C.radius
        return (wasserstein_1d(C.center.samples, q1.samples) + r
                - max(wasserstein_1d(C.center.samples, q2.samples) - r, 0.0))

    p = C.center.as_array()
    a, b = q1.as_array(), q2.as_array()
    r = C.radius
    if r == 0:
        return evaluate_loss(loss, C.center, q1) - evaluate_loss(loss, C.center, q2)
    d = p.size
    if loss.kind == "kl":
        beta = loss.smoothing
        if d == 2:
            lo, hi = kl_ball_boundary_1d(p[0], r)
            hi_u = np.array([hi, 1.0 - lo])
        else:
            hi_u = kl_ball_boundary_1d(p, np.full(d, r))[1]
        c = _linear_kl_coeffs(a, b, beta, hi_u)
        scale = 1.0 + d * beta
        if d == 2:
            # linear in u_1: an endpoint
            vals = [c @ np.array([u, 1.0 - u]) for u in (lo, hi)]
            best = max(vals)
        else:
            best = max_linear_kl_ball(p, r, c)
        return float((best + beta * c.sum()) / scale)

    # total variation difference, piecewise linear per coordinate
    def g(x):
        return 0.5 * (np.abs(x - a) - np.abs(x - b))

    if d == 2:
        lo, hi = kl_ball_boundary_1d(p[0], r)
        cand = np.unique(np.clip([lo, hi, a[0], b[0]], lo, hi))
        u = np.stack([cand, 1.0 - cand], axis=1)
        return float(np.max(g(u).sum(axis=1)))
    block = KLBlock(p, r)
    value, slack = branch_and_bound(
        [block], lambda al, bl: separable_max(g, al[0], bl[0], kinks=(a, b)),
        lambda ul: g(ul[0]).sum(axis=1), seeds=[boundary_seeds(block)], mesh=mesh, slack_cap=slack_cap)
    return value + slack


# ---------------------------------------------------------------------------
# per-scenario computation


def _kl_coarse_lower(p_lo, p_hi, qa, sizes, d, beta):
    """max over groups A of min_{t in [lo_A, hi_A]} KL(Ber(s(t)) || Ber(s(q_A)))."""
    t = np.clip(qa, p_lo, p_hi)
    scale = 1.0 + d * beta
    st = (t + sizes * beta) / scale
    sq = (qa + sizes * beta) / scale
    vals = bernoulli_kl(st, sq)
    if np.any(np.isinf(vals)):
        raise KLUndefined("simulator distribution has a zero where the confidence set allows mass")
    return max(0.0, float(np.max(vals)))


def _interval_gap(alo, ahi, blo, bhi):
    """Distance between intervals [alo, ahi] and [blo, bhi] (elementwise)."""
    return np.maximum(0.0, np.maximum(alo - bhi, blo - ahi))


def _gap_sim_estimate(rec, C, loss, mesh, slack_cap, d_exact):
    sid = rec.scenario_id
    plug = evaluate_loss(loss, rec.p_hat, rec.q_hat)
    if C.family == "w1_ball":
        return pseudo_gap_w1(C, rec.q_hat, sid)
    if C.radius == 0:
        return PseudoGap(sid, plug, plug, plug, CLOSED_FORM)
    if C.family == "interval":
        return PseudoGap(sid, sup_loss_interval(C, rec.q_hat, loss), inf_loss_interval(C, rec.q_hat, loss),
                         plug, ENDPOINT_CONVEXITY)
    p, q = rec.p_hat.as_array(), rec.q_hat.as_array()
    d, r = p.size, C.radius
    if d == 2:
        if loss.kind == "kl":
            upper, lower = sup_inf_kl_loss_bernoulli(C, rec.q_hat, loss.smoothing)
        else:
            lo, hi = kl_ball_boundary_1d(p[0], r)
            upper = max(abs(lo - q[0]), abs(hi - q[0]))
            lower = float(_interval_gap(lo, hi, q[0], q[0]))
        return PseudoGap(sid, float(upper), float(lower), plug, ENDPOINT_CONVEXITY)

    inner = _segment_inner_point(p, q, r)
    if loss.kind == "tv":
        upper, lower = _tv_subset_bounds(p, r, q, d_exact)
        method, slack = SIGN_PATTERN_DUAL, 0.0
        if d > d_exact:
            value, slack = certified_grid_sup(C, rec.q_hat, loss, mesh, slack_cap)
            upper, method = value + slack, CERTIFIED_GRID
        primal = float(total_variation(inner, q))
    else:
        value, slack = certified_grid_sup(C, rec.q_hat, loss, mesh, slack_cap)
        upper, method = value + slack, CERTIFIED_GRID
        masks = _subset_masks(d, d <= d_exact)
        lo, hi = group_mass_bounds(p, r, masks)
        lower = _kl_coarse_lower(lo, hi, masks.astype(float) @ q, masks.sum(axis=1), d, loss.smoothing)
        primal = float(kl_divergence(inner, q, loss.smoothing))
    upper = max(upper, plug)
    lower = min(lower, plug)
    return PseudoGap(sid, float(upper), float(lower), plug, method, float(slack), max(0.0, primal - lower))


def _gap_true_sim(rec, loss, gamma, sigma, mesh, slack_cap, d_exact):
    sid = rec.scenario_id
    gp, gq = split_gamma_joint(gamma)
    Cp = confidence_set_around(rec.p_hat, rec.n, gp, sigma=sigma)
    Cq = confidence_set_around(rec.q_hat, rec.k, gq, sigma=sigma)
    plug = evaluate_loss(loss, rec.p_hat, rec.q_hat)
    if Cp.family == "w1_ball":
        rr = Cp.radius + Cq.radius
        return PseudoGap(sid, plug + rr, max(plug - rr, 0.0), plug, TRIANGLE_BOUND if rr > 0 else CLOSED_FORM)
    if Cp.family == "interval":
        (ulo, uhi), (vlo, vhi) = Cp.interval(), Cq.interval()
        corners = [_scalar_loss(loss.kind, u, v) for u, v in product((ulo, uhi), (vlo, vhi))]
        gap = float(_interval_gap(ulo, uhi, vlo, vhi))
        lower = gap**2 if loss.kind == "squared" else gap
        return PseudoGap(sid, float(max(corners)), lower, plug, ENDPOINT_CONVEXITY)

    p, q = rec.p_hat.as_array(), rec.q_hat.as_array()
    d = p.size
    if d == 2:
        ulo, uhi = kl_ball_boundary_1d(p[0], Cp.radius)
        vlo, vhi = kl_ball_boundary_1d(q[0], Cq.radius)
        us, vs = np.array([ulo, ulo, uhi, uhi]), np.array([vlo, vhi, vlo, vhi])
        if loss.kind == "kl":
            upper = float(_kl_pair(us, vs, loss.smoothing).max())
            if uhi < vlo:
                lower = float(_kl_pair(uhi, vlo, loss.smoothing))
            elif ulo > vhi:
                lower = float(_kl_pair(ulo, vhi, loss.smoothing))
            else:
                lower = 0.0
        else:
            upper = float(np.abs(us - vs).max())
            lower = float(_interval_gap(ulo, uhi, vlo, vhi))
        return PseudoGap(sid, max(upper, plug), min(lower, plug), plug, ENDPOINT_CONVEXITY)

    masks = _subset_masks(d, d <= d_exact)
    plo, phi = group_mass_bounds(p, Cp.radius, masks)
    qlo, qhi = group_mass_bounds(q, Cq.radius, masks)
    lower_tv = float(max(0.0, np.max(_interval_gap(plo, phi, qlo, qhi))))
    if loss.kind == "tv" and d <= d_exact:
        upper = max(0.0, float(np.max(phi - qlo)))
        return PseudoGap(sid, max(upper, plug), min(lower_tv, plug), plug, SIGN_PATTERN_DUAL)

    bp, bq = KLBlock(p, Cp.radius), KLBlock(q, Cq.radius)
    beta = loss.smoothing
    if loss.kind == "kl":
        if beta == 0 and np.any((bq.lo <= 0) & (bp.hi > 0)):
            raise KLUndefined("the simulator confidence set reaches a zero where the ground-truth set has mass; "
                              "set a smoothing > 0")

        def pair(x, y):
            return rel_entr(smooth(x, beta), smooth(y, beta))

        def bound(al, bl):
            # jointly convex per coordinate: max at a corner of the 2D box
            best = np.maximum.reduce([pair(x, y) for x, y in product((al[0], bl[0]), (al[1], bl[1]))])
            return best.sum(axis=1)

        def value(ul):
            return pair(ul[0], ul[1]).sum(axis=1)

        sizes = masks.sum(axis=1)
        scale = 1.0 + d * beta

        def sm(t):
            return (t + sizes * beta) / scale

        # KL(u || v) >= KL(Ber(u(A)) || Ber(v(A))); for disjoint ranges the
        # Bernoulli KL is smallest at the two facing ends
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(phi < qlo, bernoulli_kl(sm(phi), sm(qlo)), 0.0)
            right = np.where(plo > qhi, bernoulli_kl(sm(plo), sm(qhi)), 0.0)
        lower = float(max(0.0, np.max(np.maximum(left, right))))
    else:
        def pair(x, y):
            return 0.5 * np.abs(x - y)

        def bound(al, bl):
            # |x - y| is convex on the box: corners
            best = np.maximum.reduce([pair(x, y) for x, y in product((al[0], bl[0]), (al[1], bl[1]))])
            return best.sum(axis=1)

        def value(ul):
            return pair(ul[0], ul[1]).sum(axis=1)

        lower = lower_tv
    sp, sq = boundary_seeds(bp), boundary_seeds(bq)
    ip, iq = np.meshgrid(np.arange(len(sp)), np.arange(len(sq)), indexing="ij")
    val, slack = branch_and_bound([bp, bq], bound, value, seeds=[sp[ip.ravel()], sq[iq.ravel()]],
                                  mesh=mesh, slack_cap=slack_cap)
    return PseudoGap(sid, max(val + slack, plug), min(lower, plug), plug, CERTIFIED_GRID, float(slack))


def scenario_gap(rec: ScenarioRecord, gamma=DEFAULT_GAMMA, loss=None, mode=SIM_ESTIMATE, sigma=None,
                 mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP, d_exact=D_EXACT) -> PseudoGap:
    """Pseudo-gap of a single scenario."""
    loss = default_loss_for(rec.p_hat.variant) if loss is None else _as_loss(loss)
    check_compatible(loss, rec.p_hat, rec.q_hat)
    mode = parse_mode(mode)
    if mode == TRUE_SIM:
        return _gap_true_sim(rec, loss, gamma, sigma, mesh, slack_cap, d_exact)
    C = build_confidence_set(rec, gamma, sigma=sigma)
    return _gap_sim_estimate(rec, C, loss, mesh, slack_cap, d_exact)


def _safe_call(fn, rec, kwargs):
    try:
        return fn(rec, **kwargs), None
    except SimGapError as exc:
        return None, exc


def map_scenarios(fn, records, kwargs, n_jobs=None):
    """Apply ``fn(rec, **kwargs)`` to every record, in order.

    If any scenario fails, the first error is raised with ``failures``
    listing (scenario_id, error) for all of them; partial results are never
    returned.
    """
    if n_jobs is not None and n_jobs != 1 and len(records) > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(delayed(_safe_call)(fn, rec, kwargs) for rec in records)
    else:
        results = [_safe_call(fn, rec, kwargs) for rec in records]
    failures = [(rec.scenario_id, err) for rec, (_, err) in zip(records, results) if err is not None]
    if failures:
        first = failures[0][1]
        first.failures = failures
        raise first
    return [out for out, _ in results]


def compute_pseudo_gaps(d: Dataset, gamma=DEFAULT_GAMMA, loss=None, mode=SIM_ESTIMATE, sigma=None,
                        mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP, d_exact=D_EXACT, n_jobs=None):
    """One PseudoGap per scenario, in dataset order.

    Parameters
    ----------
    d : Dataset
        Validated scenarios. Invalid datasets raise ``DatasetInvalid``.
    gamma : float
        Confidence level of each set; in ``true_sim`` mode it is split
        evenly between the ground-truth and simulator sets.
    loss : LossSpec or str, optional
        Defaults to squared error, total variation or W1 by variant.
    mode : {"sim_estimate", "true_sim"}
    n_jobs : int, optional
        Worker processes (joblib). Results do not depend on it.

    Raises
    ------
    SimGapError
        If any scenario fails; the exception carries ``failures``, a list
        of (scenario_id, error) for every failing scenario.
    """
    findings = validate_dataset(d)
    if findings:
        raise DatasetInvalid(findings)
    loss = default_loss_for(d.variant) if loss is None else _as_loss(loss)
    kwargs = dict(gamma=gamma, loss=loss, mode=parse_mode(mode), sigma=sigma, mesh=mesh, slack_cap=slack_cap,
                  d_exact=d_exact)
    # surface argument errors once instead of per scenario
    scenario_gap(d.records[0], **kwargs)
    return map_scenarios(scenario_gap, d.records, kwargs, n_jobs)


__all__ = [
    "D_EXACT", "METHODS", "PseudoGap", "certified_grid_sup", "compute_pseudo_gaps", "inf_loss_interval",
    "kl_ball_boundary_1d", "pairwise_sup", "parse_mode", "pseudo_gap_w1", "scenario_gap", "sup_inf_kl_loss_bernoulli",
    "sup_loss_interval", "sup_tv_kl_ball",
]
