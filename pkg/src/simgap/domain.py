"""Value types shared by every module: parameter points, losses, scenarios.

All types are frozen dataclasses holding tuples, so they hash, compare by
value and can be passed between worker processes without copying concerns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import rel_entr

from .exceptions import IncompatibleVariant, KLUndefined, ValidationError

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class Simplex:
    """A probability vector on d >= 2 categories."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValidationError(f"simplex needs d >= 2 categories, got {len(probs)}")
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ValidationError(f"simplex entries must lie in [0, 1]: {probs}")
        if abs(math.fsum(probs) - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"simplex entries must sum to 1 (got {math.fsum(probs)!r})")

    variant = "simplex"

    @property
    def d(self):
        return len(self.probs)

    def as_array(self):
        return np.asarray(self.probs, dtype=float)

    @classmethod
    def from_counts(cls, counts):
        counts = np.asarray(counts, dtype=float)
        if counts.ndim != 1 or np.any(counts < 0) or counts.sum() <= 0:
            raise ValidationError("counts must be a nonnegative vector with positive total")
        return cls(tuple(counts / counts.sum()))


@dataclass(frozen=True)
class BoundedScalar:
    """A scalar mean ``value`` of an outcome supported on ``[low, high]``."""

    value: float
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        for name in ("value", "low", "high"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.low < self.high:
            raise ValidationError(f"domain needs low < high, got [{self.low}, {self.high}]")
        if not self.low <= self.value <= self.high:
            raise ValidationError(f"value {self.value} outside domain [{self.low}, {self.high}]")

    variant = "bounded"

    @property
    def domain(self):
        return (self.low, self.high)


@dataclass(frozen=True)
class Empirical1D:
    """A one-dimensional empirical distribution given by its sorted samples.

    ``sigma`` is the sub-Gaussian parameter of the sampling law; it is only
    needed when a confidence set is built around this point.
    """

    samples: tuple
    sigma: Optional[float] = None

    def __post_init__(self):
        samples = tuple(float(x) for x in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise ValidationError("empirical distribution needs at least one sample")
        if any(not math.isfinite(x) for x in samples):
            raise ValidationError("samples must be finite")
        if any(b < a for a, b in zip(samples, samples[1:])):
            raise ValidationError("samples must be sorted nondecreasing; use Empirical1D.from_samples")
        if self.sigma is not None:
            object.__setattr__(self, "sigma", float(self.sigma))
            if not self.sigma > 0:
                raise ValidationError(f"sigma must be positive, got {self.sigma}")

    variant = "empirical1d"

    @classmethod
    def from_samples(cls, samples, sigma=None):
        return cls(tuple(sorted(float(x) for x in samples)), sigma)

    def as_array(self):
        return np.asarray(self.samples, dtype=float)


ParamPoint = Union[Simplex, BoundedScalar, Empirical1D]

LOSS_KINDS = ("squared", "absolute", "kl", "tv", "w1")
_LOSS_VARIANT = {"squared": "bounded", "absolute": "bounded", "kl": "simplex", "tv": "simplex", "w1": "empirical1d"}
_LOSS_ALIASES = {
    "squared": "squared", "squared_error": "squared", "se": "squared",
    "absolute": "absolute", "absolute_error": "absolute", "abs": "absolute",
    "kl": "kl", "total_variation": "tv", "tv": "tv",
    "w1": "w1", "wasserstein1": "w1", "wasserstein": "w1",
}


@dataclass(frozen=True)
class LossSpec:
    """Discrepancy function L(u, v). ``smoothing`` only affects ``kl``."""

    kind: str
    smoothing: float = 0.0

    def __post_init__(self):
        kind = _LOSS_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValidationError(f"unknown loss {self.kind!r}; choose from {LOSS_KINDS}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "smoothing", float(self.smoothing))
        if not self.smoothing >= 0 or not math.isfinite(self.smoothing):
            raise ValidationError(f"smoothing must be >= 0, got {self.smoothing}")

    @property
    def variant(self):
        return _LOSS_VARIANT[self.kind]

    @property
    def symmetric(self):
        return self.kind != "kl"


def default_loss_for(variant):
    return LossSpec({"bounded": "squared", "simplex": "tv", "empirical1d": "w1"}[variant])


def check_compatible(loss: LossSpec, *points):
    for p in points:
        if p.variant != loss.variant:
            raise IncompatibleVariant(f"loss {loss.kind!r} needs {loss.variant} points, got {p.variant}")
    first = points[0]
    for p in points[1:]:
        if isinstance(first, Simplex) and p.d != first.d:
            raise IncompatibleVariant(f"simplex dimensions differ: {first.d} vs {p.d}")
        if isinstance(first, BoundedScalar) and p.domain != first.domain:
            raise IncompatibleVariant(f"domains differ: {first.domain} vs {p.domain}")


def smooth(x, beta):
    """Additive smoothing (x + beta) / (1 + d * beta) along the last axis."""
    x = np.asarray(x, dtype=float)
    if beta == 0:
        return x
    return (x + beta) / (1.0 + x.shape[-1] * beta)


def kl_divergence(u, v, smoothing=0.0):
    """KL(u || v) along the last axis with 0 log 0 = 0. Vectorised."""
    u = smooth(u, smoothing)
    v = smooth(v, smoothing)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = rel_entr(u, v).sum(axis=-1)
    if np.any(np.isinf(out)):
        raise KLUndefined("simulator distribution has a zero where the argument has mass; set a smoothing > 0")
    return np.maximum(out, 0.0)


def bernoulli_kl(p, u):
    """KL(Ber(p) || Ber(u)) elementwise; may return inf."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return rel_entr(p, u) + rel_entr(1.0 - p, 1.0 - u)


def total_variation(u, v):
    return 0.5 * np.abs(np.asarray(u, float) - np.asarray(v, float)).sum(axis=-1)


def wasserstein_1d(x, y):
    """Exact W1 between two empirical distributions from sorted samples.

    Integrates |F_x^{-1}(t) - F_y^{-1}(t)| over t in (0, 1]; both quantile
    functions are constant between consecutive levels i/n and j/m.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = len(x), len(y)
    if n == m:
        return float(np.abs(x - y).mean())
    levels = np.union1d(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
    levels[-1] = 1.0
    widths = np.diff(levels, prepend=0.0)
    mids = levels - widths / 2
    ix = np.minimum((mids * n).astype(np.int64), n - 1)
    iy = np.minimum((mids * m).astype(np.int64), m - 1)
    return float(np.sum(widths * np.abs(x[ix] - y[iy])))


def evaluate_loss(loss: LossSpec, u: ParamPoint, v: ParamPoint) -> float:
    """L(u, v) for compatible points; 0 whenever u == v."""
    check_compatible(loss, u, v)
    if loss.kind == "squared":
        return (u.value - v.value) ** 2
    if loss.kind == "absolute":
        return abs(u.value - v.value)
    if loss.kind == "kl":
        return float(kl_divergence(u.as_array(), v.as_array(), loss.smoothing))
    if loss.kind == "tv":
        return float(total_variation(u.probs, v.probs))
    return wasserstein_1d(u.samples, v.samples)


@dataclass(frozen=True)
class ScenarioRecord:
    """One scenario: ground-truth estimate from ``n`` samples, simulator
    estimate(s) from ``k`` samples.

    ``k_2`` is the second simulator's budget when it differs from ``k``;
    None means both used ``k``.
    """

    scenario_id: str
    p_hat: ParamPoint
    n: int
    q_hat: ParamPoint
    k: int
    q_hat_2: Optional[ParamPoint] = None
    k_2: Optional[int] = None


@dataclass(frozen=True)
class Dataset:
    records: tuple
    k_uniform: bool = True

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def m(self):
        return len(self.records)

    @property
    def variant(self):
        return self.records[0].p_hat.variant if self.records else None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def has_second_simulator(self):
        return bool(self.records) and all(r.q_hat_2 is not None for r in self.records)


@dataclass(frozen=True)
class Finding:
    index: Optional[int]
    scenario_id: Optional[str]
    message: str

    def __str__(self):
        where = f"record {self.index} ({self.scenario_id!r})" if self.index is not None else "dataset"
        return f"{where}: {self.message}"


def _shape_of(point):
    if isinstance(point, Simplex):
        return ("simplex", point.d)
    if isinstance(point, BoundedScalar):
        return ("bounded", point.domain)
    if isinstance(point, Empirical1D):
        return ("empirical1d",)
    return (type(point).__name__,)


def validate_dataset(d: Dataset) -> list:
    """Every violated Dataset/ScenarioRecord invariant, as findings.

    An empty list means the dataset is valid.
    """
    findings = []
    if not d.records:
        return [Finding(None, None, "dataset has no records (m >= 1 required)")]
    seen = {}
    variant0 = d.records[0].p_hat.variant if hasattr(d.records[0].p_hat, "variant") else None
    k0 = d.records[0].k
    for i, rec in enumerate(d.records):
        sid = rec.scenario_id
        if sid in seen:
            findings.append(Finding(i, sid, f"duplicate scenario_id (first seen at record {seen[sid]})"))
        else:
            seen[sid] = i
        if isinstance(rec.n, bool) or not isinstance(rec.n, int) or rec.n < 1:
            findings.append(Finding(i, sid, f"n must be a positive integer, got {rec.n!r}"))
        if isinstance(rec.k, bool) or not isinstance(rec.k, int) or rec.k < 1:
            findings.append(Finding(i, sid, f"k must be a positive integer, got {rec.k!r}"))
        if rec.k_2 is not None and (isinstance(rec.k_2, bool) or not isinstance(rec.k_2, int) or rec.k_2 < 1):
            findings.append(Finding(i, sid, f"k_2 must be a positive integer, got {rec.k_2!r}"))
        if rec.k_2 is not None and rec.q_hat_2 is None:
            findings.append(Finding(i, sid, "k_2 given without a second simulator estimate"))
        points = [rec.p_hat, rec.q_hat] + ([rec.q_hat_2] if rec.q_hat_2 is not None else [])
        bad = [p for p in points if not isinstance(p, (Simplex, BoundedScalar, Empirical1D))]
        if bad:
            findings.append(Finding(i, sid, "parameter is not a Simplex, BoundedScalar or Empirical1D point"))
            continue
        shapes = {_shape_of(p) for p in points}
        if len(shapes) > 1:
            findings.append(Finding(i, sid, f"p_hat and simulator estimates disagree in variant or shape: {sorted(map(str, shapes))}"))
        if rec.p_hat.variant != variant0:
            findings.append(Finding(i, sid, f"variant {rec.p_hat.variant} differs from first record's {variant0}"))
        if d.k_uniform and rec.k != k0:
            findings.append(Finding(i, sid, f"k={rec.k} differs from first record's k={k0} but k_uniform is set"))
    return findings


__all__ = [
    "BoundedScalar", "Dataset", "Empirical1D", "Finding", "LossSpec", "ParamPoint",
    "ScenarioRecord", "Simplex", "bernoulli_kl", "default_loss_for", "evaluate_loss",
    "kl_divergence", "smooth", "total_variation", "validate_dataset", "wasserstein_1d",
]
