"""Small argument checkers shared by the public functions and estimators."""

import math
import numbers

from .exceptions import AlphaOutOfRange, InvalidEta, InvalidGamma, ValidationError


def _is_real(x):
    return isinstance(x, numbers.Real) and not isinstance(x, bool)


def check_gamma(gamma, *, allow_one=False):
    if not _is_real(gamma) or not math.isfinite(gamma):
        raise InvalidGamma(f"gamma must be a real number, got {gamma!r}")
    ok = 0.0 < gamma < 1.0 or (allow_one and gamma == 1.0)
    if not ok:
        bounds = "(0, 1]" if allow_one else "(0, 1)"
        raise InvalidGamma(f"gamma must lie in {bounds}, got {gamma!r}")
    return float(gamma)


def check_eta(eta):
    if not _is_real(eta) or not 0.0 < eta < 1.0:
        raise InvalidEta(f"eta must lie in (0, 1), got {eta!r}")
    return float(eta)


def check_alpha(alpha, *, closed_right=False, name="alpha"):
    if not _is_real(alpha) or math.isnan(alpha):
        raise AlphaOutOfRange(f"{name} must be a real number, got {alpha!r}")
    hi_ok = alpha <= 1.0 if closed_right else alpha < 1.0
    if not (alpha > 0.0 and hi_ok):
        bounds = "(0, 1]" if closed_right else "(0, 1)"
        raise AlphaOutOfRange(f"{name} must lie in {bounds}, got {alpha!r}")
    return float(alpha)


def check_tau(tau):
    if not _is_real(tau) or not 0.0 <= tau <= 1.0:
        raise AlphaOutOfRange(f"tau must lie in [0, 1], got {tau!r}")
    return float(tau)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive(value, name):
    if not _is_real(value) or not value > 0 or not math.isfinite(value):
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def alpha_grid(grid=None):
    """Parse an alpha grid.

    ``None`` gives the centesimal grid 0.01, ..., 0.99. A string may be a
    comma-separated list (``"0.05,0.1"``) or ``start:stop:step``.
    """
    if grid is None:
        return tuple(round(i / 100, 2) for i in range(1, 100))
    if isinstance(grid, str):
        grid = grid.strip()
        if ":" in grid:
            start, stop, step = (float(s) for s in grid.split(":"))
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 12) for i in range(count)]
        else:
            values = [float(s) for s in grid.split(",") if s.strip()]
    else:
        values = [float(s) for s in grid]
    if not values:
        raise AlphaOutOfRange("alpha grid is empty")
    for a in values:
        check_alpha(a)
    return tuple(values)
