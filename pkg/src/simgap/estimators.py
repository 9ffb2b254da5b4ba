"""scikit-learn style front ends for calibration and pairwise comparison."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import calibration as cal
from ._certified import DEFAULT_MESH, DEFAULT_SLACK_CAP
from ._validation import alpha_grid as parse_alpha_grid
from ._validation import check_eta, check_gamma, check_positive
from .confidence_sets import DEFAULT_GAMMA
from .discrepancy import compute_pseudo_gaps, parse_mode
from .domain import Dataset, LossSpec, default_loss_for
from .exceptions import ValidationError
from .pairwise import compute_pairwise, dominance_table


def _as_dataset(X):
    if isinstance(X, Dataset):
        return X
    try:
        return Dataset(tuple(X))
    except TypeError:
        raise ValidationError(f"expected a Dataset or a sequence of ScenarioRecord, got {type(X).__name__}")


def _resolve_loss(loss, smoothing, variant):
    if loss is None or loss == "auto":
        kind = default_loss_for(variant).kind
    elif isinstance(loss, LossSpec):
        return loss
    else:
        kind = loss
    return LossSpec(kind, smoothing)


class SimToRealCalibrator(TransformerMixin, BaseEstimator):
    """Calibrate the sim-to-real gap from paired real and simulated estimates.

    Parameters
    ----------
    gamma : float, default=0.5
        Confidence level of each per-scenario set.
    eta : float, default=0.05
        Failure probability of the coverage statement over the dataset.
    loss : str or LossSpec, default="auto"
        "auto" picks squared error, total variation or W1 by data variant.
    smoothing : float, default=0.0
        Additive smoothing for the KL loss.
    sigma : float, optional
        Sub-Gaussian parameter for W1 sets; overrides per-record values.
    mode : {"sim_estimate", "true_sim"}, default="sim_estimate"
        Target the estimated simulator output, or the simulator's true law
        via joint confidence sets.
    mesh, slack_cap : float
        Resolution and tolerated slack of the certified search.
    alpha_grid : str or sequence, optional
        Grid for coverage tables; default 0.01, ..., 0.99.
    n_jobs : int, optional
        Parallel workers for the per-scenario computations.

    Attributes
    ----------
    gaps_ : list of PseudoGap
    curve_, lower_curve_ : QuantileCurve
    loss_ : LossSpec
    m_ : int
    """

    def __init__(self, gamma=DEFAULT_GAMMA, eta=cal.DEFAULT_ETA, loss="auto", smoothing=0.0, sigma=None,
                 mode="sim_estimate", mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP, alpha_grid=None,
                 cvar_levels=cal.DEFAULT_CVAR_LEVELS, n_jobs=None):
        self.gamma = gamma
        self.eta = eta
        self.loss = loss
        self.smoothing = smoothing
        self.sigma = sigma
        self.mode = mode
        self.mesh = mesh
        self.slack_cap = slack_cap
        self.alpha_grid = alpha_grid
        self.cvar_levels = cvar_levels
        self.n_jobs = n_jobs

    def _gap_kwargs(self):
        return dict(gamma=self.gamma, loss=self.loss_, mode=self.mode_, sigma=self.sigma, mesh=self.mesh,
                    slack_cap=self.slack_cap, n_jobs=self.n_jobs)

    def fit(self, X, y=None):
        """Compute pseudo-gaps of every scenario in ``X`` and their curves."""
        data = _as_dataset(X)
        check_gamma(self.gamma)
        check_eta(self.eta)
        check_positive(self.mesh, "mesh")
        check_positive(self.slack_cap, "slack_cap")
        self.mode_ = parse_mode(self.mode)
        self.alpha_grid_ = parse_alpha_grid(self.alpha_grid)
        self.loss_ = _resolve_loss(self.loss, self.smoothing, data.variant)
        self.gaps_ = compute_pseudo_gaps(data, **self._gap_kwargs())
        self.curve_ = cal.QuantileCurve.from_values(g.upper for g in self.gaps_)
        self.lower_curve_ = cal.QuantileCurve.from_values(g.lower for g in self.gaps_)
        self.m_ = data.m
        return self

    def transform(self, X):
        """(lower, plug_in, upper) per scenario, shape (m, 3).

        ``X=None`` returns the rows of the fitted scenarios.
        """
        check_is_fitted(self, "gaps_")
        gaps = self.gaps_ if X is None else compute_pseudo_gaps(_as_dataset(X), **self._gap_kwargs())
        return np.array([[g.lower, g.plug_in, g.upper] for g in gaps], dtype=float).reshape(-1, 3)

    def threshold(self, alpha):
        """Gap threshold V(1 - alpha/2) for a guaranteed share of new scenarios."""
        return self.coverage(alpha).threshold

    def coverage(self, alpha):
        check_is_fitted(self, "curve_")
        return cal.guaranteed_coverage(self.curve_, alpha, eta=self.eta)

    def calibrated(self, tau):
        check_is_fitted(self, "curve_")
        return cal.calibrated_curve(self.curve_, tau)

    def auc(self):
        check_is_fitted(self, "curve_")
        return cal.auc_cal(self.curve_)

    def cvar(self, alpha):
        check_is_fitted(self, "curve_")
        return cal.cvar_cal(self.curve_, alpha)

    def predict_set(self, q_hat, alpha_bar):
        """Region of plausible real parameters for a new scenario's estimate."""
        check_is_fitted(self, "curve_")
        return cal.new_scenario_set(self.curve_, q_hat, alpha_bar, self.loss_)

    def band(self, taus=None):
        check_is_fitted(self, "curve_")
        return cal.band_table(self.curve_, self.lower_curve_, self.gamma, taus)

    def report(self, metadata=None):
        check_is_fitted(self, "gaps_")
        params = {"gamma": self.gamma, "loss": self.loss_.kind, "smoothing": self.loss_.smoothing,
                  "mode": self.mode_, "sigma": self.sigma, "mesh": self.mesh, "slack_cap": self.slack_cap}
        return cal.calibration_report(self.gaps_, self.eta, params, self.alpha_grid_, self.cvar_levels, metadata)


class PairwiseComparator(BaseEstimator):
    """Certify that simulator 1 is at least as faithful as simulator 2.

    Parameters mirror :class:`SimToRealCalibrator`; records must carry
    ``q_hat_2``.

    Attributes
    ----------
    report_ : PairwiseReport
    u_curve_ : QuantileCurve
    """

    def __init__(self, gamma=DEFAULT_GAMMA, eta=cal.DEFAULT_ETA, loss="auto", smoothing=0.0, sigma=None,
                 mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP, alpha_grid=None, n_jobs=None):
        self.gamma = gamma
        self.eta = eta
        self.loss = loss
        self.smoothing = smoothing
        self.sigma = sigma
        self.mesh = mesh
        self.slack_cap = slack_cap
        self.alpha_grid = alpha_grid
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        data = _as_dataset(X)
        check_gamma(self.gamma)
        self.loss_ = _resolve_loss(self.loss, self.smoothing, data.variant)
        self.report_ = compute_pairwise(data, self.gamma, self.loss_, self.eta, self.alpha_grid, self.sigma,
                                        self.mesh, self.slack_cap, self.n_jobs)
        self.u_curve_ = self.report_.u_curve
        return self

    def dominance(self, alpha):
        """Table row at ``alpha`` (computed on the fly when off the grid)."""
        check_is_fitted(self, "report_")
        try:
            return self.report_.row(alpha)
        except KeyError:
            return dominance_table(self.u_curve_, self.eta, [alpha])[0]

    def certified(self, alpha):
        return bool(self.dominance(alpha)["certified"])


__all__ = ["PairwiseComparator", "SimToRealCalibrator"]
