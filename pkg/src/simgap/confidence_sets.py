"""Per-scenario confidence sets around a ground-truth estimate.

Each set covers the true parameter with probability at least ``gamma`` by a
standard concentration inequality:

* bounded outcomes: Hoeffding interval on the sample mean,
* Bernoulli and multinomial outcomes: Chernoff-Hoeffding KL balls,
* sub-Gaussian outcomes: a W1 ball around the empirical distribution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
import numpy as np

from ._validation import check_gamma, check_positive_int
from .domain import ParamPoint, ScenarioRecord, kl_divergence, wasserstein_1d
from .exceptions import IncompatibleHint, NonpositiveSigma, RegimeWarning, ValidationError

DEFAULT_GAMMA = 0.5

# universal constant of the multinomial KL tail bound
MULTINOMIAL_C0 = math.e**3 / (2 * math.pi)

FAMILIES = ("interval", "kl_ball", "w1_ball")
_FAMILY_OF_VARIANT = {"bounded": "interval", "simplex": "kl_ball", "empirical1d": "w1_ball"}
_FAMILY_ALIASES = {
    "interval": "interval", "intervalabs": "interval",
    "kl_ball": "kl_ball", "klball": "kl_ball",
    "w1_ball": "w1_ball", "w1ball": "w1_ball",
}


@dataclass(frozen=True)
class ConfidenceSet:
    """A family-tagged region ``{u : dist(center, u) <= radius}``.

    For ``kl_ball`` the center is the first KL argument: u belongs to the set
    when KL(center || u) <= radius.
    """

    family: str
    center: ParamPoint
    radius: float
    gamma: float
    n: int

    def __post_init__(self):
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise ValidationError(f"radius must be finite and >= 0, got {self.radius}")
        expected = _FAMILY_OF_VARIANT[self.center.variant]
        if self.family != expected:
            raise ValidationError(f"{self.family} cannot wrap a {self.center.variant} center")

    def interval(self):
        """Clipped interval [max(a, c - rho), min(b, c + rho)] of an interval set."""
        if self.family != "interval":
            raise ValidationError("interval() is only defined for interval sets")
        c = self.center
        return max(c.low, c.value - self.radius), min(c.high, c.value + self.radius)

    def contains(self, point: ParamPoint, atol=0.0) -> bool:
        if point.variant != self.center.variant:
            return False
        if self.family == "interval":
            lo, hi = self.interval()
            return lo - atol <= point.value <= hi + atol
        if self.family == "kl_ball":
            if point.d != self.center.d:
                return False
            with np.errstate(divide="ignore"):
                try:
                    dist = float(kl_divergence(self.center.as_array(), point.as_array()))
                except ArithmeticError:
                    return False
            return dist <= self.radius + atol
        return wasserstein_1d(self.center.samples, point.samples) <= self.radius + atol


def radius_bounded(n, gamma, a, b):
    """Hoeffding half-width (b - a) sqrt(log(2/gamma) / (2n))."""
    n = check_positive_int(n, "n")
    gamma = check_gamma(gamma)
    if not a < b:
        raise ValidationError(f"need a < b, got [{a}, {b}]")
    return (b - a) * math.sqrt(math.log(2.0 / gamma) / (2.0 * n))


def radius_bernoulli(n, gamma):
    """KL radius log(2/gamma) / n, in nats."""
    n = check_positive_int(n, "n")
    gamma = check_gamma(gamma)
    return math.log(2.0 / gamma) / n


def multinomial_regime_ok(n, d):
    return d <= (n * MULTINOMIAL_C0 / 4.0) ** (1.0 / 3.0)


def radius_multinomial(n, d, gamma):
    """KL radius ((d - 1) / n) log(2 (d - 1) / gamma), in nats.

    Emits a :class:`RegimeWarning` when d exceeds (n C0 / 4)^(1/3); the set is
    still returned.
    """
    n = check_positive_int(n, "n")
    gamma = check_gamma(gamma)
    if isinstance(d, bool) or not isinstance(d, int) or d < 2:
        raise ValidationError(f"d must be an integer >= 2, got {d!r}")
    if d == 2:
        return radius_bernoulli(n, gamma)
    if not multinomial_regime_ok(n, d):
        warnings.warn(
            f"d={d} exceeds (n*C0/4)^(1/3)={(n * MULTINOMIAL_C0 / 4) ** (1 / 3):.3f} at n={n}; "
            "the multinomial KL bound is used outside its proven regime",
            RegimeWarning,
            stacklevel=2,
        )
    return (d - 1) / n * math.log(2.0 * (d - 1) / gamma)


def radius_w1(n, gamma, sigma):
    """W1 radius 512 sigma / sqrt(n) + sigma sqrt((256 e / n) log(1 / (1 - gamma)))."""
    n = check_positive_int(n, "n")
    gamma = check_gamma(gamma)
    if sigma is None or not sigma > 0:
        raise NonpositiveSigma(f"sigma must be a positive number, got {sigma!r}")
    return 512.0 * sigma / math.sqrt(n) + sigma * math.sqrt(256.0 * math.e / n * math.log(1.0 / (1.0 - gamma)))


def confidence_set_around(center: ParamPoint, n, gamma=DEFAULT_GAMMA, family_hint=None, sigma=None) -> ConfidenceSet:
    """Confidence set of level ``gamma`` around ``center`` estimated from ``n`` samples.

    ``sigma`` overrides the center's own sub-Gaussian parameter for W1 balls.
    """
    family = _FAMILY_OF_VARIANT[center.variant]
    if family_hint is not None:
        hint = _FAMILY_ALIASES.get(str(family_hint).lower())
        if hint != family:
            raise IncompatibleHint(f"family hint {family_hint!r} is incompatible with a {center.variant} estimate")
    if family == "interval":
        radius = radius_bounded(n, gamma, center.low, center.high)
    elif family == "kl_ball":
        radius = radius_multinomial(n, center.d, gamma)
    else:
        sigma = sigma if sigma is not None else center.sigma
        if sigma is None:
            raise NonpositiveSigma("a W1 confidence set needs the sub-Gaussian parameter sigma")
        radius = radius_w1(n, gamma, sigma)
    return ConfidenceSet(family, center, radius, float(gamma), int(n))


def build_confidence_set(rec: ScenarioRecord, gamma=DEFAULT_GAMMA, family_hint=None, sigma=None) -> ConfidenceSet:
    """Set around ``rec.p_hat`` using the ground-truth sample size ``rec.n``.

    The family follows the estimate's variant (bounded -> interval,
    simplex -> KL ball, empirical -> W1 ball); a hint may only confirm it.
    """
    return confidence_set_around(rec.p_hat, rec.n, gamma, family_hint, sigma)


def split_gamma_joint(gamma_joint):
    """Split a joint coverage level into equal p-side and q-side levels.

    Returns (sqrt(g), sqrt(g)) so that the product equals ``gamma_joint``.
    """
    g = check_gamma(gamma_joint, allow_one=True)
    s = math.sqrt(g)
    return s, s
