"""Certified comparison of two simulators on a shared scenario pool.

Per scenario the largest loss difference L(u, q1) - L(u, q2) over the
ground-truth confidence set is computed; its quantile at 1 - alpha/2 being
<= 0 certifies that simulator 1 is at least as close to reality as
simulator 2 on a guaranteed fraction of new scenarios.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._certified import DEFAULT_MESH, DEFAULT_SLACK_CAP
from ._validation import alpha_grid as parse_alpha_grid
from ._validation import check_eta
from .calibration import DEFAULT_ETA, QuantileCurve, guaranteed_coverage
from .confidence_sets import DEFAULT_GAMMA, build_confidence_set
from .discrepancy import _as_loss, map_scenarios, pairwise_sup
from .domain import Dataset, ScenarioRecord, default_loss_for, evaluate_loss, validate_dataset
from .exceptions import DatasetInvalid, MissingSecondSimulator, ValidationError


@dataclass(frozen=True)
class PairwiseGap:
    scenario_id: str
    delta: float
    plug_in: float

    def to_dict(self):
        return {"scenario_id": self.scenario_id, "delta": self.delta, "plug_in": self.plug_in}


def pairwise_gap(rec: ScenarioRecord, gamma=DEFAULT_GAMMA, loss=None, sigma=None, mesh=DEFAULT_MESH,
                 slack_cap=DEFAULT_SLACK_CAP) -> PairwiseGap:
    C = build_confidence_set(rec, gamma, sigma=sigma)
    plug = evaluate_loss(loss, rec.p_hat, rec.q_hat) - evaluate_loss(loss, rec.p_hat, rec.q_hat_2)
    delta = pairwise_sup(C, rec.q_hat, rec.q_hat_2, loss, mesh, slack_cap)
    # the center lies in the set; guard against rounding in the closed forms
    return PairwiseGap(rec.scenario_id, max(delta, plug), plug)


@dataclass
class PairwiseReport:
    """Quantile curve of the per-scenario differences and the dominance table.

    Each table row holds ``threshold`` (the 1 - alpha/2 quantile), the raw
    and clamped guaranteed fraction, ``certified`` (threshold <= 0),
    ``strict`` (threshold < 0) and ``tie`` (threshold == 0).
    """

    u_curve: QuantileCurve
    params: dict
    table: list
    gaps: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def row(self, alpha):
        for r in self.table:
            if abs(r["alpha"] - alpha) < 1e-12:
                return r
        raise KeyError(alpha)

    def to_dict(self):
        return {
            "params": dict(self.params),
            "metadata": dict(self.metadata),
            "u_curve": list(self.u_curve.values),
            "dominance": [dict(r) for r in self.table],
            "gaps": [g.to_dict() for g in self.gaps],
        }


def dominance_table(u_curve: QuantileCurve, eta=DEFAULT_ETA, alphas=None):
    rows = []
    for a in parse_alpha_grid(alphas):
        cov = guaranteed_coverage(u_curve, a, eta=eta)
        t = cov.threshold
        rows.append({"alpha": a, "threshold": t, "raw": cov.raw, "clamped": cov.clamped, "vacuous": cov.vacuous,
                     "certified": t <= 0.0, "strict": t < 0.0, "tie": t == 0.0})
    return rows


def compute_pairwise(d: Dataset, gamma=DEFAULT_GAMMA, loss=None, eta=DEFAULT_ETA, alpha_grid=None, sigma=None,
                     mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP, n_jobs=None, metadata=None) -> PairwiseReport:
    """Dominance certificates of simulator 1 over simulator 2.

    Every record must carry ``q_hat_2``; both simulators must have used the
    same budget k.
    """
    findings = validate_dataset(d)
    if findings:
        raise DatasetInvalid(findings)
    if not d.has_second_simulator:
        raise MissingSecondSimulator("every record needs a second simulator estimate (q_hat_2)")
    mixed = [r.scenario_id for r in d.records if r.k_2 is not None and r.k_2 != r.k]
    if mixed:
        raise ValidationError(f"simulators used different budgets k on {len(mixed)} scenario(s), e.g. {mixed[0]!r}; "
                              "the comparison needs one shared k")
    eta = check_eta(eta)
    loss = default_loss_for(d.variant) if loss is None else _as_loss(loss)
    kwargs = dict(gamma=gamma, loss=loss, sigma=sigma, mesh=mesh, slack_cap=slack_cap)
    pairwise_gap(d.records[0], **kwargs)
    gaps = map_scenarios(pairwise_gap, d.records, kwargs, n_jobs)
    curve = QuantileCurve.from_values(g.delta for g in gaps)
    params = {"m": d.m, "eta": eta, "gamma": gamma, "loss": loss.kind, "smoothing": loss.smoothing}
    return PairwiseReport(curve, params, dominance_table(curve, eta, alpha_grid), gaps, dict(metadata or {}))


__all__ = ["PairwiseGap", "PairwiseReport", "compute_pairwise", "dominance_table", "pairwise_gap"]
