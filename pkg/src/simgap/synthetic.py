"""Synthetic scenario pools with known ground truth, and the experiments that
check coverage, tightness, band validity and pairwise certification on them.

Randomness comes from PCG64 streams derived from ``SeedSequence(seed,
spawn_key=(stream, replication, scenario))``: every calibration scenario has
its own substream, so results do not depend on generation order or on how
replications are spread over workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.special import ndtr, ndtri, rel_entr

from . import calibration as cal
from .confidence_sets import DEFAULT_GAMMA
from .discrepancy import SIM_ESTIMATE, TRUE_SIM, compute_pseudo_gaps, parse_mode
from .domain import (
    BoundedScalar, Dataset, Empirical1D, LossSpec, ScenarioRecord, Simplex, default_loss_for, evaluate_loss, smooth,
)
from .exceptions import ValidationError
from .pairwise import compute_pairwise

FAMILIES = ("bounded", "bernoulli", "multinomial", "empirical1d")
_VARIANT = {"bounded": "bounded", "bernoulli": "simplex", "multinomial": "simplex", "empirical1d": "empirical1d"}

# spawn_key streams
_CALIBRATION, _HOLDOUT, _ORACLE = 0, 1, 2


@dataclass
class GeneratorConfig:
    """Data-generating process of a synthetic scenario pool.

    Scalar truths are uniform on [truth_low, truth_high]; simplex truths are
    symmetric Dirichlet(dirichlet_alpha). The simulator parameter is
    ``clip(bias_slope * p + bias_shift)`` for scalars (and for the mean of
    ``empirical1d`` normals) and an exponential tilt ``q ~ p * exp(tilt *
    s)`` with scores s_i = 1 - i / (d - 1) for simplices.

    ``n_law`` is an int, a list of ints (uniform choice) or a dict with
    ``low`` and ``high`` (uniform integers, inclusive).
    """

    seed: int = 0
    m_calibration: int = 235
    m_holdout: int = 10_000
    family: str = "bernoulli"
    d: int = 2
    domain: tuple = (-1.0, 1.0)
    sigma: float = 1.0
    n_law: object = field(default_factory=lambda: {"low": 450, "high": 500})
    k: int = 200
    truth_low: float = -0.8
    truth_high: float = 0.8
    dirichlet_alpha: float = 1.0
    bias_shift: float = 0.1
    bias_slope: float = 1.0
    tilt: float = 0.3
    concentration: float = 2.0
    replications: int = 100

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family == "bernoulli":
            self.d = 2
        self.domain = tuple(float(x) for x in self.domain)
        for name in ("m_calibration", "m_holdout", "k", "replications", "d"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.d < 2:
            raise ValidationError("simplex families need d >= 2")
        if not self.domain[0] < self.domain[1]:
            raise ValidationError(f"domain needs low < high, got {self.domain}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        self.n_values()
        if self.m_holdout < 10 * self.m_calibration:
            warnings.warn(f"m_holdout={self.m_holdout} is below 10 * m_calibration; holdout coverage is noisy",
                          stacklevel=2)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown generator config keys: {unknown}")
        return cls(**data)

    def to_dict(self):
        out = asdict(self)
        out["domain"] = list(self.domain)
        return out

    @property
    def variant(self):
        return _VARIANT[self.family]

    def n_values(self):
        """Support of the per-scenario ground-truth sample size."""
        law = self.n_law
        if isinstance(law, dict):
            if set(law) != {"low", "high"} or not 1 <= law["low"] <= law["high"]:
                raise ValidationError(f"n_law dict needs 1 <= low <= high, got {law}")
            return np.arange(int(law["low"]), int(law["high"]) + 1)
        values = np.atleast_1d(np.asarray(law))
        if values.size == 0 or not np.issubdtype(values.dtype, np.integer) or values.min() < 1:
            raise ValidationError(f"n_law must hold positive integers, got {law!r}")
        return values.astype(np.int64)


def stream(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))))


# ---------------------------------------------------------------------------
# outcome laws


def sample_truth(cfg, rng, size):
    if cfg.variant == "simplex":
        return rng.dirichlet(np.full(cfg.d, cfg.dirichlet_alpha), size=size)
    return rng.uniform(cfg.truth_low, cfg.truth_high, size=size)


def simulator_param(cfg, p, tilt=None, shift=None):
    """Simulator's true parameter given the real one (vectorised)."""
    p = np.asarray(p, dtype=float)
    if cfg.variant == "simplex":
        tilt = cfg.tilt if tilt is None else tilt
        scores = 1.0 - np.arange(cfg.d) / (cfg.d - 1)
        w = p * np.exp(tilt * scores)
        return w / w.sum(axis=-1, keepdims=True)
    shift = cfg.bias_shift if shift is None else shift
    q = cfg.bias_slope * p + shift
    if cfg.variant == "bounded":
        q = np.clip(q, *cfg.domain)
    return q


def _beta_params(cfg, mean):
    a, b = cfg.domain
    mu = np.clip((np.asarray(mean, float) - a) / (b - a), 1e-9, 1 - 1e-9)
    return cfg.concentration * mu, cfg.concentration * (1 - mu)


def draw_outcomes(cfg, rng, param, size):
    """Raw outcomes of one scenario: scalars, category indices or reals."""
    if cfg.family == "bounded":
        a, b = cfg.domain
        al, be = _beta_params(cfg, param)
        return a + (b - a) * rng.beta(al, be, size=size)
    if cfg.variant == "simplex":
        return rng.choice(cfg.d, size=size, p=np.asarray(param) / np.sum(param))
    return rng.normal(param, cfg.sigma, size=size)


def estimate_from_outcomes(cfg, outcomes):
    """Point estimate (as ParamPoint) from raw outcomes of one scenario."""
    if cfg.family == "bounded":
        return BoundedScalar(min(max(float(np.mean(outcomes)), cfg.domain[0]), cfg.domain[1]), *cfg.domain)
    if cfg.variant == "simplex":
        return Simplex.from_counts(np.bincount(outcomes, minlength=cfg.d))
    return Empirical1D.from_samples(outcomes, cfg.sigma)


def estimate(cfg, rng, param, size):
    """Point estimate of one scenario from ``size`` fresh draws."""
    if cfg.variant == "simplex":
        return Simplex.from_counts(rng.multinomial(size, np.asarray(param) / np.sum(param)))
    return estimate_from_outcomes(cfg, draw_outcomes(cfg, rng, param, size))


def estimate_many(cfg, rng, params, size):
    """Vectorised estimates as arrays: (M,), (M, d) or sorted (M, size)."""
    params = np.asarray(params, dtype=float)
    if cfg.family == "bounded":
        a, b = cfg.domain
        al, be = _beta_params(cfg, params)
        draws = rng.beta(al[:, None], be[:, None], size=(len(params), size))
        return a + (b - a) * draws.mean(axis=1)
    if cfg.variant == "simplex":
        return rng.multinomial(size, params) / size
    return np.sort(rng.normal(params[:, None], cfg.sigma, size=(len(params), size)), axis=1)


def w1_normal_empirical(mu, sigma, samples):
    """Exact W1 between N(mu, sigma^2) and empirical laws, row-wise.

    ``samples`` is (M, k) sorted. Between consecutive samples the empirical
    CDF is a constant c; the integral of |Phi - c| splits at the point where
    the normal CDF crosses c and uses the antiderivative
    sigma * (z Phi(z) + phi(z)) of Phi.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    M, k = samples.shape
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (M,))[:, None]

    def H(x):
        z = (x - mu) / sigma
        return sigma * (z * ndtr(z) + np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi))

    total = H(samples[:, :1])[:, 0]
    zk = (samples[:, -1:] - mu) / sigma
    total += (sigma * (np.exp(-0.5 * zk * zk) / math.sqrt(2 * math.pi) - zk * (1 - ndtr(zk))))[:, 0]
    if k > 1:
        lo, hi = samples[:, :-1], samples[:, 1:]
        c = np.arange(1, k) / k
        cross = np.clip(mu + sigma * ndtri(c)[None, :], lo, hi)
        below = c * (cross - lo) - (H(cross) - H(lo))
        above = (H(hi) - H(cross)) - c * (hi - cross)
        total += (below + above).sum(axis=1)
    return total


def true_losses(cfg, loss, p, q_est):
    """Loss between true real parameters and simulator estimates, vectorised.

    Infinite KL values are kept (they never count as covered).
    """
    if loss.kind in ("squared", "absolute"):
        diff = np.asarray(p) - np.asarray(q_est)
        return diff**2 if loss.kind == "squared" else np.abs(diff)
    if loss.kind == "tv":
        return 0.5 * np.abs(np.asarray(p) - np.asarray(q_est)).sum(axis=1)
    if loss.kind == "kl":
        with np.errstate(divide="ignore", invalid="ignore"):
            return rel_entr(smooth(p, loss.smoothing), smooth(q_est, loss.smoothing)).sum(axis=1)
    q_est = np.asarray(q_est)
    if q_est.ndim == 1:
        # true simulator law: both normal with the same sigma
        return np.abs(np.asarray(p) - q_est)
    return w1_normal_empirical(p, cfg.sigma, q_est)


@dataclass
class Oracle:
    """True real and simulator parameters of each generated scenario."""

    p: np.ndarray
    q: np.ndarray
    q2: np.ndarray = None


def generate(cfg: GeneratorConfig, replication=0, second_simulator=None):
    """Calibration pool of ``cfg.m_calibration`` scenarios and its oracle.

    ``second_simulator`` is an optional dict of ``simulator_param`` keyword
    overrides (``shift`` or ``tilt``) for a second simulator sharing the
    same ground truth.
    """
    n_support = cfg.n_values()
    records, ps, qs, q2s = [], [], [], []
    for j in range(cfg.m_calibration):
        rng = stream(cfg.seed, _CALIBRATION, replication, j)
        p = sample_truth(cfg, rng, None)
        q = simulator_param(cfg, p)
        n = int(rng.choice(n_support))
        p_hat = estimate(cfg, rng, p, n)
        q_hat = estimate(cfg, rng, q, cfg.k)
        q_hat_2 = None
        if second_simulator is not None:
            q2 = simulator_param(cfg, p, **second_simulator)
            q_hat_2 = estimate(cfg, rng, q2, cfg.k)
            q2s.append(q2)
        records.append(ScenarioRecord(f"s{j:05d}", p_hat, n, q_hat, cfg.k, q_hat_2))
        ps.append(p)
        qs.append(q)
    oracle = Oracle(np.array(ps), np.array(qs), np.array(q2s) if q2s else None)
    return Dataset(tuple(records)), oracle


def holdout_gaps(cfg, loss, size, rng, target=SIM_ESTIMATE):
    """True gaps of fresh scenarios: L(p, fresh q_hat), or L(p, q) for ``true_sim``."""
    p = sample_truth(cfg, rng, size)
    q = simulator_param(cfg, p)
    if parse_mode(target) == TRUE_SIM:
        return true_losses(cfg, loss, p, q)
    return true_losses(cfg, loss, p, estimate_many(cfg, rng, q, cfg.k))


def _loss_for(cfg, loss):
    if loss is None:
        return default_loss_for(cfg.variant)
    return loss if isinstance(loss, LossSpec) else LossSpec(loss)


def _map(fn, items, n_jobs):
    if n_jobs is not None and n_jobs != 1:
        from joblib import Parallel, delayed
        return Parallel(n_jobs=n_jobs)(delayed(fn)(i) for i in items)
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentResult:
    """Summary ``rows`` (one dict per table row) plus raw per-replication data."""

    name: str
    params: dict
    rows: list
    raw: dict = field(default_factory=dict)

    def columns(self):
        return list(self.rows[0]) if self.rows else []


def coverage_experiment(cfg: GeneratorConfig, gamma=DEFAULT_GAMMA, eta=cal.DEFAULT_ETA, loss=None, alpha_grid=(0.1,),
                        target=SIM_ESTIMATE, n_jobs=None) -> ExperimentResult:
    """Holdout coverage of the calibrated threshold across replications.

    Rows per alpha: the guaranteed bound, mean holdout coverage, and the
    fraction of replications whose coverage meets the bound.
    """
    loss = _loss_for(cfg, loss)
    target = parse_mode(target)
    alphas = cal.parse_alpha_grid(alpha_grid)

    def one(rep):
        data, _ = generate(cfg, rep)
        gaps = compute_pseudo_gaps(data, gamma, loss, mode=target)
        curve = cal.QuantileCurve.from_values(g.upper for g in gaps)
        held = holdout_gaps(cfg, loss, cfg.m_holdout, stream(cfg.seed, _HOLDOUT, rep), target)
        thresholds = [cal.empirical_quantile(curve, 1 - a / 2) for a in alphas]
        return thresholds, [float(np.mean(held <= t)) for t in thresholds]

    out = _map(one, range(cfg.replications), n_jobs)
    thresholds = np.array([o[0] for o in out])
    cover = np.array([o[1] for o in out])
    rows = []
    for i, a in enumerate(alphas):
        bound = 1 - a - cal.epsilon_correction(a, cfg.m_calibration, eta) / math.sqrt(cfg.m_calibration)
        rows.append({"alpha": a, "bound": bound, "mean_coverage": float(cover[:, i].mean()),
                     "min_coverage": float(cover[:, i].min()),
                     "fraction_meeting_bound": float(np.mean(cover[:, i] >= bound)),
                     "mean_threshold": float(thresholds[:, i].mean())})
    params = {"gamma": gamma, "eta": eta, "loss": loss.kind, "target": target, "config": cfg.to_dict()}
    return ExperimentResult("coverage", params, rows, {"coverage": cover, "thresholds": thresholds})


def _tightness_seed(cfg, seed, n_sweep, master_n, gamma, loss):
    sub = GeneratorConfig.from_dict({**cfg.to_dict(), "seed": seed})
    m = sub.m_calibration
    master, q_hats = [], []
    for j in range(m):
        rng = stream(seed, _CALIBRATION, 0, j)
        p = sample_truth(sub, rng, None)
        master.append(draw_outcomes(sub, rng, p, master_n))
        q_hats.append(estimate(sub, rng, simulator_param(sub, p), sub.k))
    truth = [estimate_from_outcomes(sub, x) for x in master]
    oracle = cal.QuantileCurve.from_values(
        [evaluate_loss(loss, t, q) for t, q in zip(truth, q_hats)])
    lo_idx = oracle.index(0.5) - 1
    dists = []
    for n in n_sweep:
        records = tuple(ScenarioRecord(f"s{j:05d}", estimate_from_outcomes(sub, master[j][:n]), int(n), q_hats[j],
                                       sub.k) for j in range(m))
        gaps = compute_pseudo_gaps(Dataset(records), gamma, loss)
        curve = cal.QuantileCurve.from_values(g.upper for g in gaps)
        # both calibrated curves take the order statistics ceil(m/2) .. m
        diff = np.abs(curve.as_array()[lo_idx:] - oracle.as_array()[lo_idx:])
        dists.append(float(diff.max()))
    return dists


def tightness_experiment(cfg: GeneratorConfig, n_sweep=(100, 200, 500, 1000), k=200, seeds=20, master_n=20_000,
                         gamma=DEFAULT_GAMMA, loss=None, n_jobs=None) -> ExperimentResult:
    """Sup-distance between calibrated curves and the oracle curve along an n sweep.

    Each scenario gets a master sample of ``master_n`` outcomes whose
    estimate is treated as the truth; p_hat at size n uses its first n
    outcomes. The oracle curve uses the gaps L(truth, q_hat), and both
    curves are compared on the same index-adjusted range tau in [0, 1].
    """
    if cfg.family == "empirical1d":
        raise ValidationError("tightness experiment supports bounded, bernoulli and multinomial families")
    if max(n_sweep) > master_n:
        raise ValidationError("every n in the sweep must be at most master_n")
    cfg = GeneratorConfig.from_dict({**cfg.to_dict(), "k": k})
    loss = _loss_for(cfg, loss)
    seed_list = [cfg.seed + s for s in range(seeds)]
    dists = np.array(_map(lambda s: _tightness_seed(cfg, s, n_sweep, master_n, gamma, loss), seed_list, n_jobs))
    rows = [{"n": int(n), "mean_sup_distance": float(dists[:, i].mean()), "sd_sup_distance": float(dists[:, i].std())}
            for i, n in enumerate(n_sweep)]
    params = {"gamma": gamma, "loss": loss.kind, "k": k, "seeds": seeds, "master_n": master_n,
              "config": cfg.to_dict()}
    return ExperimentResult("tightness", params, rows, {"distances": dists})


def band_experiment(cfg: GeneratorConfig, gamma=DEFAULT_GAMMA, eta=cal.DEFAULT_ETA, taus=None, loss=None,
                    oracle_size=200_000, tolerance=0.0, n_jobs=None) -> ExperimentResult:
    """Check V-(gamma tau) <= V(tau) <= V(gamma + (1 - gamma) tau) + tolerance.

    The true curve V is the empirical quantile of ``oracle_size`` fresh
    holdout gaps. A replication violates a side when any tau does.
    """
    loss = _loss_for(cfg, loss)
    taus = tuple(i / 10 for i in range(1, 10)) if taus is None else tuple(taus)
    held = holdout_gaps(cfg, loss, oracle_size, stream(cfg.seed, _ORACLE))
    v_true = cal.QuantileCurve.from_values(held)
    truth = np.array([cal.empirical_quantile(v_true, t) for t in taus])

    def one(rep):
        data, _ = generate(cfg, rep)
        gaps = compute_pseudo_gaps(data, gamma, loss)
        up = cal.QuantileCurve.from_values(g.upper for g in gaps)
        low = cal.QuantileCurve.from_values(g.lower for g in gaps)
        pts = [cal.band(up, low, gamma, t) for t in taus]
        return [p.lo for p in pts], [p.hi for p in pts]

    out = _map(one, range(cfg.replications), n_jobs)
    lo = np.array([o[0] for o in out])
    hi = np.array([o[1] for o in out])
    lower_viol = lo > truth[None, :]
    upper_viol = truth[None, :] > hi + tolerance
    rows = [{"tau": t, "v_true": float(truth[i]), "mean_lo": float(lo[:, i].mean()), "mean_hi": float(hi[:, i].mean()),
             "lower_violation_rate": float(lower_viol[:, i].mean()),
             "upper_violation_rate": float(upper_viol[:, i].mean())} for i, t in enumerate(taus)]
    params = {"gamma": gamma, "eta": eta, "loss": loss.kind, "oracle_size": oracle_size, "tolerance": tolerance,
              "config": cfg.to_dict(),
              "replication_lower_violation_rate": float(lower_viol.any(axis=1).mean()),
              "replication_upper_violation_rate": float(upper_viol.any(axis=1).mean()),
              "sandwich_rate": float(np.all(lo <= hi, axis=1).mean())}
    return ExperimentResult("band", params, rows, {"lo": lo, "hi": hi, "v_true": truth})


def pairwise_experiment(cfg: GeneratorConfig, shift_1=0.05, shift_2=0.30, alpha=0.2, gamma=DEFAULT_GAMMA,
                        eta=cal.DEFAULT_ETA, loss="squared", identical=False, n_jobs=None) -> ExperimentResult:
    """How often simulator 1 (bias ``shift_1``) is certified over simulator 2.

    For simplex families the shifts are used as tilts. With ``identical``
    the second estimate is a copy of the first.
    """
    loss = _loss_for(cfg, loss)
    key = "tilt" if cfg.variant == "simplex" else "shift"
    base = GeneratorConfig.from_dict({**cfg.to_dict(), ("tilt" if key == "tilt" else "bias_shift"): shift_1})

    def one(rep):
        data, _ = generate(base, rep, second_simulator={key: shift_2})
        if identical:
            data = Dataset(tuple(ScenarioRecord(r.scenario_id, r.p_hat, r.n, r.q_hat, r.k, r.q_hat)
                                 for r in data.records))
        rep_ = compute_pairwise(data, gamma, loss, eta, [alpha])
        row = rep_.table[0]
        return row["threshold"], row["certified"], row["strict"], row["tie"]

    out = _map(one, range(cfg.replications), n_jobs)
    arr = np.array(out, dtype=float)
    rows = [{"alpha": alpha, "certified_runs": int(arr[:, 1].sum()), "strict_runs": int(arr[:, 2].sum()),
             "tie_runs": int(arr[:, 3].sum()), "replications": cfg.replications,
             "mean_threshold": float(arr[:, 0].mean())}]
    params = {"gamma": gamma, "eta": eta, "loss": loss.kind, "shift_1": shift_1, "shift_2": shift_2,
              "identical": identical, "config": base.to_dict()}
    return ExperimentResult("pairwise", params, rows, {"thresholds": arr[:, 0]})


EXPERIMENTS = {
    "coverage": coverage_experiment,
    "tightness": tightness_experiment,
    "band": band_experiment,
    "pairwise": pairwise_experiment,
}

__all__ = [
    "EXPERIMENTS", "ExperimentResult", "GeneratorConfig", "Oracle", "band_experiment", "coverage_experiment",
    "generate", "holdout_gaps", "pairwise_experiment", "stream", "tightness_experiment", "w1_normal_empirical",
]
