"""Quantile curves of pseudo-gaps and their finite-sample coverage statements.

Order statistics are indexed with ``k = ceil(m * alpha)`` (1-based), so the
quantile function is the step function Q(l) = x_(k) on ((k-1)/m, k/m].
Integrals of Q are therefore computed exactly by summing over steps.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kl import kl_first_arg_interval
from ._validation import alpha_grid as parse_alpha_grid
from ._validation import check_alpha, check_eta, check_gamma, check_positive_int, check_tau
from .domain import BoundedScalar, Empirical1D, LossSpec, Simplex, evaluate_loss
from .exceptions import IncompatibleVariant, ValidationError

DEFAULT_ETA = 0.05
DEFAULT_CVAR_LEVELS = (0.1, 0.2, 0.5)
TAU_GRID = tuple(i / 100 for i in range(101))
# absorbs rounding in m * alpha so that e.g. 10 * 0.3 indexes the 3rd value
# relative guard against ceil(95.00000000000001) style noise
_INDEX_TOL = 1e-12


@dataclass(frozen=True)
class QuantileCurve:
    """Sorted values x_(1) <= ... <= x_(m) with their empirical quantiles."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValidationError("a quantile curve needs at least one value")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValidationError("curve values must be sorted; use QuantileCurve.from_values")
        if any(math.isnan(v) for v in vals):
            raise ValidationError("curve values must not be NaN")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values):
        return cls(tuple(sorted(float(v) for v in values)))

    @property
    def m(self):
        return len(self.values)

    def as_array(self):
        return np.asarray(self.values)

    def index(self, alpha):
        """1-based order-statistic index ceil(m * alpha), clipped to [1, m]."""
        return min(self.m, max(1, math.ceil(self.m * alpha - _INDEX_TOL * max(1.0, self.m * alpha))))

    def step_integral(self, lo, hi):
        """Exact integral of the quantile step function over [lo, hi]."""
        if hi <= lo:
            return 0.0
        m = self.m
        k = np.arange(1, m + 1)
        overlap = np.clip(np.minimum(hi, k / m) - np.maximum(lo, (k - 1) / m), 0.0, None)
        return float(np.dot(self.as_array(), overlap))


def empirical_quantile(curve: QuantileCurve, alpha) -> float:
    """The ceil(m * alpha)-th order statistic, alpha in (0, 1]."""
    alpha = check_alpha(alpha, closed_right=True)
    return curve.values[curve.index(alpha) - 1]


def epsilon_correction(alpha, m, eta) -> float:
    """Finite-sample correction eps(alpha, m, eta) of the coverage bound.

    With L = log(2m / eta)::

        eps = sqrt(2 alpha L + (L^2 + 4L) / m) + (L + 2) / sqrt(m) + sqrt(log(4 / eta) / 2)
    """
    alpha = check_alpha(alpha)
    m = check_positive_int(m, "m")
    eta = check_eta(eta)
    L = math.log(2.0 * m / eta)
    return (math.sqrt(2.0 * alpha * L + (L * L + 4.0 * L) / m)
            + (L + 2.0) / math.sqrt(m)
            + math.sqrt(math.log(4.0 / eta) / 2.0))


Coverage = namedtuple("Coverage", ["raw", "clamped", "threshold", "vacuous"])


def guaranteed_coverage(curve: QuantileCurve, alpha, m=None, eta=DEFAULT_ETA) -> Coverage:
    """Threshold V(1 - alpha/2) and its guaranteed coverage 1 - alpha - eps / sqrt(m).

    ``vacuous`` is set when the raw bound is <= 0, in which case ``clamped``
    is 0.
    """
    alpha = check_alpha(alpha)
    m = curve.m if m is None else check_positive_int(m, "m")
    raw = 1.0 - alpha - epsilon_correction(alpha, m, eta) / math.sqrt(m)
    threshold = empirical_quantile(curve, 1.0 - alpha / 2.0)
    return Coverage(raw, max(raw, 0.0), threshold, raw <= 0.0)


def calibrated_curve(curve: QuantileCurve, tau) -> float:
    """Index-adjusted curve V((1 + tau) / 2)."""
    tau = check_tau(tau)
    return curve.values[curve.index((1.0 + tau) / 2.0) - 1]


def auc_cal(curve: QuantileCurve) -> float:
    """Area under the calibrated curve over tau in [0, 1], exactly.

    Substituting l = (1 + tau) / 2 gives 2 * integral of Q over [1/2, 1].
    """
    return 2.0 * curve.step_integral(0.5, 1.0)


def cvar_cal(curve: QuantileCurve, alpha) -> float:
    """Mean of the calibrated curve over tau in [1 - alpha, 1], exactly."""
    alpha = check_alpha(alpha)
    return 2.0 * curve.step_integral(1.0 - alpha / 2.0, 1.0) / alpha


@dataclass(frozen=True)
class NewScenarioSet:
    """Region {u : L(u, q_hat) <= tau} for a new scenario.

    ``interval`` holds the explicit range of the (first) coordinate when the
    region is an interval: scalar losses and two-category simplices.
    """

    tau: float
    alpha_bar: float
    loss: LossSpec
    q_hat: object
    kind: str
    interval: Optional[tuple] = None

    def contains(self, point, atol=1e-12) -> bool:
        if self.interval is not None:
            x = point.value if isinstance(point, BoundedScalar) else point.probs[0]
            return self.interval[0] - atol <= x <= self.interval[1] + atol
        try:
            return evaluate_loss(self.loss, point, self.q_hat) <= self.tau + atol
        except ArithmeticError:
            return False

    def to_dict(self):
        out = {"tau": self.tau, "alpha_bar": self.alpha_bar, "loss": self.loss.kind, "kind": self.kind}
        if self.interval is not None:
            out["interval"] = list(self.interval)
        if isinstance(self.q_hat, BoundedScalar):
            out["q_hat"] = self.q_hat.value
        elif isinstance(self.q_hat, Simplex):
            out["q_hat"] = list(self.q_hat.probs)
        if self.kind == "w1_ball":
            out["radius"] = self.tau
        return out


def new_scenario_set(curve: QuantileCurve, q_hat_new, alpha_bar, loss) -> NewScenarioSet:
    """Plausible real-world parameters for a new scenario seen only in simulation."""
    loss = loss if isinstance(loss, LossSpec) else LossSpec(loss)
    alpha_bar = check_alpha(alpha_bar)
    if q_hat_new.variant != loss.variant:
        raise IncompatibleVariant(f"loss {loss.kind!r} needs a {loss.variant} estimate, got {q_hat_new.variant}")
    tau = max(0.0, empirical_quantile(curve, 1.0 - alpha_bar / 2.0))
    if isinstance(q_hat_new, BoundedScalar):
        half = math.sqrt(tau) if loss.kind == "squared" else tau
        q = q_hat_new.value
        iv = (max(q_hat_new.low, q - half), min(q_hat_new.high, q + half))
        return NewScenarioSet(tau, alpha_bar, loss, q_hat_new, "interval", iv)
    if isinstance(q_hat_new, Empirical1D):
        return NewScenarioSet(tau, alpha_bar, loss, q_hat_new, "w1_ball")
    if loss.kind == "tv":
        iv = None
        if q_hat_new.d == 2:
            q = q_hat_new.probs[0]
            iv = (max(0.0, q - tau), min(1.0, q + tau))
        return NewScenarioSet(tau, alpha_bar, loss, q_hat_new, "tv_ball", iv)
    iv = None
    if q_hat_new.d == 2:
        beta = loss.smoothing
        scale = 1.0 + 2.0 * beta
        qs = (q_hat_new.probs[0] + beta) / scale
        lo, hi = kl_first_arg_interval(qs, tau)
        iv = (max(0.0, float(lo[0]) * scale - beta), min(1.0, float(hi[0]) * scale - beta))
    return NewScenarioSet(tau, alpha_bar, loss, q_hat_new, "kl_level_set", iv)


BandPoint = namedtuple("BandPoint", ["tau", "lo", "hi", "lo_at_minimum"])


def band(upper_curve: QuantileCurve, lower_curve: QuantileCurve, gamma, tau) -> BandPoint:
    """Two-sided band (V-(gamma tau), V(gamma + (1 - gamma) tau)) for the true curve at tau.

    When gamma * tau is 0 the lower index would be 0; the minimum of the
    lower curve is used and ``lo_at_minimum`` is set.
    """
    gamma = check_gamma(gamma, allow_one=True)
    tau = check_tau(tau)
    if upper_curve.m != lower_curve.m:
        raise ValidationError("upper and lower curves must come from the same dataset")
    a_lo = gamma * tau
    flag = a_lo <= 0.0
    lo = lower_curve.values[0] if flag else empirical_quantile(lower_curve, a_lo)
    hi = empirical_quantile(upper_curve, min(1.0, gamma + (1.0 - gamma) * tau))
    return BandPoint(tau, lo, hi, flag)


BAND_NOTES = (
    "hi carries an additional o(1) term in m",
    "the band is intrinsically conservative near tau = 0 and tau = 1",
)


@dataclass
class BandReport:
    gamma: float
    rows: list
    notes: tuple = BAND_NOTES

    def to_dict(self):
        return {"gamma": self.gamma, "rows": [r._asdict() for r in self.rows], "notes": list(self.notes)}


def band_table(upper_curve, lower_curve, gamma, taus=None) -> BandReport:
    taus = tuple(i / 10 for i in range(1, 10)) if taus is None else taus
    return BandReport(gamma, [band(upper_curve, lower_curve, gamma, t) for t in taus])


def coverage_table(curve: QuantileCurve, eta=DEFAULT_ETA, alphas=None):
    """Rows (alpha, threshold, raw, clamped, vacuous) over an alpha grid."""
    rows = []
    for a in parse_alpha_grid(alphas):
        cov = guaranteed_coverage(curve, a, eta=eta)
        rows.append({"alpha": a, "threshold": cov.threshold, "raw": cov.raw, "clamped": cov.clamped,
                     "vacuous": cov.vacuous})
    return rows


@dataclass
class CalibrationReport:
    """Everything a calibration run produces, ready for serialisation."""

    curve: QuantileCurve
    lower_curve: QuantileCurve
    params: dict
    coverage: list
    calibrated: list
    summaries: dict
    gaps: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "params": dict(self.params),
            "metadata": dict(self.metadata),
            "curve": list(self.curve.values),
            "lower_curve": list(self.lower_curve.values),
            "coverage": [dict(r) for r in self.coverage],
            "calibrated_curve": [dict(r) for r in self.calibrated],
            "summaries": dict(self.summaries),
            "gaps": [g.to_dict() for g in self.gaps],
        }


def summaries(curve: QuantileCurve, cvar_levels=DEFAULT_CVAR_LEVELS):
    return {"auc_cal": auc_cal(curve), "cvar_cal": {str(a): cvar_cal(curve, a) for a in cvar_levels}}


def calibration_report(gaps, eta=DEFAULT_ETA, params=None, alphas=None, cvar_levels=DEFAULT_CVAR_LEVELS,
                       metadata=None) -> CalibrationReport:
    """Assemble curves, coverage table and summaries from a list of PseudoGap."""
    eta = check_eta(eta)
    curve = QuantileCurve.from_values(g.upper for g in gaps)
    lower = QuantileCurve.from_values(g.lower for g in gaps)
    grid = parse_alpha_grid(alphas)
    calibrated = [{"tau": t, "value": calibrated_curve(curve, t)} for t in TAU_GRID]
    p = {"m": curve.m, "eta": eta}
    p.update(params or {})
    return CalibrationReport(curve, lower, p, coverage_table(curve, eta, grid), calibrated,
                             summaries(curve, cvar_levels), list(gaps), dict(metadata or {}))


__all__ = [
    "BandPoint", "BandReport", "CalibrationReport", "Coverage", "NewScenarioSet", "QuantileCurve", "auc_cal",
    "band", "band_table", "calibrated_curve", "calibration_report", "coverage_table", "cvar_cal",
    "empirical_quantile", "epsilon_correction", "guaranteed_coverage", "new_scenario_set", "summaries",
]
