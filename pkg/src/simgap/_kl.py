"""Bisection on one-dimensional KL level sets.

Every routine returns the *outer* end of its final bracket, so the computed
interval always contains the exact one (width error <= ``tol``). Callers
that maximise over the interval therefore over-approximate and callers that
minimise under-approximate, which is the safe direction everywhere.
"""

import numpy as np

from .domain import bernoulli_kl

BISECTION_TOL = 1e-12
_MAX_ITER = 200


def _bisect(f_outside, inside, outside, tol):
    """Shrink [inside, outside] brackets (arrays) until |outside - inside| <= tol.

    ``f_outside(x)`` is True where x lies outside the level set.
    """
    inside = np.array(inside, dtype=float)
    outside = np.array(outside, dtype=float)
    for _ in range(_MAX_ITER):
        active = np.abs(outside - inside) > tol
        if not active.any():
            break
        mid = 0.5 * (inside + outside)
        out = f_outside(mid)
        outside = np.where(active & out, mid, outside)
        inside = np.where(active & ~out, mid, inside)
    return outside


def kl_ball_boundary_1d(p_hat, r, tol=BISECTION_TOL):
    """Roots u_lo <= p_hat <= u_hi of KL(Ber(p_hat) || Ber(u)) = r.

    Works elementwise on arrays. Where the ball reaches 0 or 1 (only possible
    when p_hat is itself 0 or 1) the corresponding end is returned exactly.
    """
    p = np.asarray(p_hat, dtype=float)
    r = np.broadcast_to(np.asarray(r, dtype=float), p.shape)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    r = np.atleast_1d(r)

    def outside(u):
        return bernoulli_kl(p, u) > r

    lo = _bisect(outside, p, np.zeros_like(p), tol)
    hi = _bisect(outside, p, np.ones_like(p), tol)
    lo = np.where(r <= 0, p, lo)
    hi = np.where(r <= 0, p, hi)
    # the ball touches 0 (resp. 1) exactly when p_hat is 0 (resp. 1)
    lo = np.where(p <= 0, 0.0, np.clip(lo, 0.0, p))
    hi = np.where(p >= 1, 1.0, np.clip(hi, p, 1.0))
    if scalar:
        return float(lo[0]), float(hi[0])
    return lo, hi


def kl_first_arg_interval(q, tau, tol=BISECTION_TOL):
    """Interval {u in [0, 1] : KL(Ber(u) || Ber(q)) <= tau}, elementwise."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    tau = np.broadcast_to(np.atleast_1d(np.asarray(tau, dtype=float)), q.shape)

    def outside(u):
        return bernoulli_kl(u, q) > tau

    lo = np.where(outside(np.zeros_like(q)), _bisect(outside, q, np.zeros_like(q), tol), 0.0)
    hi = np.where(outside(np.ones_like(q)), _bisect(outside, q, np.ones_like(q), tol), 1.0)
    return np.clip(lo, 0.0, q), np.clip(hi, q, 1.0)


def group_mass_bounds(p_hat, r, masks):
    """Range of u(A) = sum_{i in A} u_i over the KL ball {u : KL(p_hat || u) <= r}.

    ``masks`` is a boolean array (n_groups, d). Grouping categories can only
    shrink KL (data processing), and the bound is attained by keeping u
    proportional to p_hat inside A and its complement, so the range is the
    Bernoulli ball around p_hat(A). Exact up to the bisection tolerance.
    """
    pa = np.clip(masks.astype(float) @ np.asarray(p_hat, dtype=float), 0.0, 1.0)
    return kl_ball_boundary_1d(pa, r)


def _tilted_sup(p, c, rho, tol):
    """max c.w over {w in simplex : KL(p || w) <= rho} for p > 0 everywhere.

    The maximiser is w_i proportional to p_i / (mu - c_i) with mu > max c;
    KL(p || w(mu)) decreases in mu, so bisect on log(mu - max c). The outer
    bracket end (larger KL) is returned, which over-estimates the value.
    """
    cmax = c.max()
    if rho <= 0 or np.ptp(c) == 0:
        return float(c @ p) if rho <= 0 else float(cmax)

    def at(log_t):
        w = p / ((cmax - c) + np.exp(log_t))
        w /= w.sum()
        with np.errstate(divide="ignore"):
            kl = float(np.sum(p * np.log(p / w)))
        return kl, float(c @ w)

    lo, hi = -60.0, 60.0
    kl_lo, val_lo = at(lo)
    if kl_lo <= rho:
        return float(cmax)
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        kl_mid, val_mid = at(mid)
        if kl_mid > rho:
            lo, val_lo = mid, val_mid
        else:
            hi = mid
        if hi - lo < 1e-14 or abs(val_lo - at(hi)[1]) <= tol:
            break
    return val_lo


def max_linear_kl_ball(p_hat, r, c, tol=1e-13):
    """Exact max of c.u over the ball {u in simplex : KL(p_hat || u) <= r}.

    Coordinates with p_hat_i = 0 can receive a total mass t <= 1 - exp(-r);
    the value as a function of t is concave, so t is found by golden-section
    search over the tilted closed form on the support.
    """
    p = np.asarray(p_hat, dtype=float)
    c = np.asarray(c, dtype=float)
    support = p > 0
    ps, cs = p[support], c[support]
    if support.all() or r <= 0:
        return _tilted_sup(ps, cs, r, tol)
    cz = c[~support].max()
    t_max = -np.expm1(-r)

    def g(t):
        return t * cz + (1.0 - t) * _tilted_sup(ps, cs, r + np.log1p(-t), tol)

    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, t_max
    x1, x2 = b - phi * (b - a), a + phi * (b - a)
    f1, f2 = g(x1), g(x2)
    for _ in range(100):
        if b - a < 1e-13:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = g(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = g(x1)
    return float(max(f1, f2, g(0.0), g(t_max)))
