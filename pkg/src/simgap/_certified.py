"""Certified branch-and-bound maximisation over products of KL balls.

The search variables are the free coordinates of one or more simplex points
``u_b`` each constrained to ``{u : KL(p_b || u) <= r_b}``. One coordinate per
block is dropped and recovered from the sum constraint. A cell is a box in
the free coordinates; its upper bound comes from a separable bound on the
objective over the box (including the implied range of the dropped
coordinate), and cells whose box cannot meet the KL constraint are pruned.

The returned ``value`` is attained by a feasible point, and every discarded
cell had an upper bound at most ``value``; so ``value <= sup <= value + slack``
where ``slack`` is the largest bound among the surviving cells minus value.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from ._kl import _bisect, kl_ball_boundary_1d
from .exceptions import MeshTooCoarse

DEFAULT_MESH = 1e-4
DEFAULT_SLACK_CAP = 1e-3
MAX_CELLS = 400_000
_PRUNE_TOL = 1e-12
MAX_REFINEMENTS = 6


@dataclass
class KLBlock:
    p: np.ndarray
    r: float

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.r = float(self.r)
        d = self.p.size
        self.lo, self.hi = kl_ball_boundary_1d(self.p, np.full(d, self.r))
        # drop the widest coordinate: its implied range is the sum of the others
        self.drop = int(np.argmax(self.hi - self.lo))
        self.free = np.array([i for i in range(d) if i != self.drop])

    @property
    def d(self):
        return self.p.size


def _kl_rows(p, u):
    with np.errstate(divide="ignore", invalid="ignore"):
        return rel_entr(p, u).sum(axis=-1)


def radial_boundary(p, r, U):
    """Points where the rays from p through the rows of U leave the ball.

    Each returned point is feasible (bisection keeps the inside end), so
    these are valid incumbents; rows equal to p are returned unchanged.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    D = U - p
    with np.errstate(divide="ignore", invalid="ignore"):
        # stay in the nonnegative orthant
        limits = np.where(D < 0, p / -D, np.inf)
    t_max = np.minimum(limits.min(axis=1), 1e6)

    def inside(t):
        return _kl_rows(p, np.clip(p + t[:, None] * D, 0.0, None)) <= r

    at_max = inside(t_max)
    t = np.where(at_max, t_max, _bisect(inside, t_max, np.zeros(len(U)), 1e-13))
    return np.clip(p + t[:, None] * D, 0.0, None)


def boundary_seeds(block: KLBlock):
    """Boundary points in the directions of each coordinate extreme, plus the center."""
    p = block.p
    pts = [p.copy()]
    for i in range(block.d):
        for target in (0.0, 1.0):
            rest = 1.0 - p[i]
            u = p * ((1.0 - target) / rest) if rest > 0 else np.full_like(p, (1.0 - target) / (block.d - 1))
            u[i] = target
            pts.append(u)
    pts = radial_boundary(p, block.r, np.array(pts))
    return pts[_kl_rows(p, pts) <= block.r]


def _block_ranges(block, L, H):
    """Full-coordinate ranges (a, b) for every cell, and a validity mask."""
    n = L.shape[0]
    a = np.empty((n, block.d))
    b = np.empty((n, block.d))
    a[:, block.free] = L
    b[:, block.free] = H
    a[:, block.drop] = np.maximum(block.lo[block.drop], 1.0 - H.sum(axis=1))
    b[:, block.drop] = np.minimum(block.hi[block.drop], 1.0 - L.sum(axis=1))
    ok = a[:, block.drop] <= b[:, block.drop] + 1e-15
    ok &= box_kl_lower(block.p, a, b) <= block.r * (1 + 1e-12) + 1e-15
    return a, b, ok


def box_kl_lower(p, a, b, iters=50):
    """Lower bound of min KL(p || u) over {u in [a, b] : sum u = 1}, per row.

    Weak duality: for every lam > 0 the bound
    sum_i min_{u_i in [a_i, b_i]} (p_i log(p_i / u_i) + lam u_i) - lam
    holds, with minimiser u_i = clip(p_i / lam, a_i, b_i). Bisection on
    log(lam) drives sum u_i to 1, where the bound is tight; any lam is
    valid, so the iteration count only affects tightness.
    """
    a = np.maximum(a, 0.0)
    b = np.maximum(b, a)
    lo = np.full(a.shape[0], -40.0)
    hi = np.full(a.shape[0], 40.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        u = np.clip(p / np.exp(mid)[:, None], a, b)
        over = u.sum(axis=1) > 1.0
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    best = np.full(a.shape[0], -np.inf)
    for t in (lo, hi):
        lam = np.exp(t)
        u = np.clip(p / lam[:, None], a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = rel_entr(p, u).sum(axis=1) + lam * (u.sum(axis=1) - 1.0)
        best = np.maximum(best, np.nan_to_num(g, nan=np.inf, posinf=np.inf))
    # an empty box-simplex intersection is infeasible
    empty = (a.sum(axis=1) > 1.0 + 1e-12) | (b.sum(axis=1) < 1.0 - 1e-12)
    return np.where(empty, np.inf, best)


def _block_points(block, X):
    """Cell centers pushed radially from p onto the ball boundary."""
    u = np.empty((X.shape[0], block.d))
    u[:, block.free] = X
    u[:, block.drop] = 1.0 - X.sum(axis=1)
    u = radial_boundary(block.p, block.r, u)
    return u, _kl_rows(block.p, u) <= block.r


def branch_and_bound(blocks, bound, value, seeds=None, mesh=DEFAULT_MESH, slack_cap=DEFAULT_SLACK_CAP,
                     max_cells=MAX_CELLS, max_refinements=MAX_REFINEMENTS):
    """Maximise ``value`` over the product of KL balls.

    ``bound(a_list, b_list)`` returns an upper bound of the objective on each
    cell given per-block coordinate ranges (arrays (N, d_b)); ``value(u_list)``
    evaluates it at points. ``seeds`` is a list of per-block arrays of
    feasible points with matching row counts.

    Cells are split until no wider than ``mesh``. While the resulting slack
    exceeds ``slack_cap`` the mesh is quartered and the surviving cells are
    refined again, at most ``max_refinements`` times.

    Returns (value, slack). Raises MeshTooCoarse when slack > slack_cap.
    """
    widths = [b.d - 1 for b in blocks]
    offsets = np.cumsum([0] + widths)
    incumbent = -np.inf
    if seeds is not None:
        vals = value([np.asarray(s, float) for s in seeds])
        incumbent = float(np.max(vals))

    def evaluate(L, H):
        a_list, b_list = [], []
        alive = np.ones(L.shape[0], dtype=bool)
        for blk, o0, o1 in zip(blocks, offsets[:-1], offsets[1:]):
            a, b, ok = _block_ranges(blk, L[:, o0:o1], H[:, o0:o1])
            a_list.append(a)
            b_list.append(b)
            alive &= ok
        with np.errstate(divide="ignore", invalid="ignore"):
            ub = np.where(alive, bound(a_list, b_list), -np.inf)
        mid = 0.5 * (L + H)
        u_list, feas = [], alive.copy()
        for blk, o0, o1 in zip(blocks, offsets[:-1], offsets[1:]):
            u, ok = _block_points(blk, mid[:, o0:o1])
            u_list.append(u)
            feas &= ok
        cand = -np.inf
        if feas.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = float(np.max(value([u[feas] for u in u_list])))
        return ub, cand

    L = np.concatenate([b.lo[b.free] for b in blocks])[None, :]
    H = np.concatenate([b.hi[b.free] for b in blocks])[None, :]
    D = offsets[-1]
    done_L, done_H, done_ub = np.empty((0, D)), np.empty((0, D)), np.empty(0)
    unsplit_ub = -np.inf
    for _ in range(max_refinements + 1):
        while L.shape[0]:
            ub, cand = evaluate(L, H)
            incumbent = max(incumbent, cand)
            keep = ub > incumbent + _PRUNE_TOL
            L, H, ub = L[keep], H[keep], ub[keep]
            span = H - L
            fine = span.max(axis=1) <= mesh
            done_L = np.concatenate([done_L, L[fine]])
            done_H = np.concatenate([done_H, H[fine]])
            done_ub = np.concatenate([done_ub, ub[fine]])
            L, H, span, ub = L[~fine], H[~fine], span[~fine], ub[~fine]
            if 2 * L.shape[0] + done_ub.size > max_cells:
                # out of budget: account for the unsplit cells in the slack
                unsplit_ub = max(unsplit_ub, float(ub.max())) if ub.size else unsplit_ub
                L = H = np.empty((0, D))
                break
            axis = np.argmax(span, axis=1)
            rows = np.arange(L.shape[0])
            cut = 0.5 * (L[rows, axis] + H[rows, axis])
            L2, H2 = L.copy(), H.copy()
            H[rows, axis] = cut
            L2[rows, axis] = cut
            L = np.concatenate([L, L2])
            H = np.concatenate([H, H2])
        live = done_ub > incumbent + _PRUNE_TOL
        done_L, done_H, done_ub = done_L[live], done_H[live], done_ub[live]
        top = max(float(done_ub.max()) if done_ub.size else -np.inf, unsplit_ub)
        slack = max(0.0, top - incumbent)
        if slack <= slack_cap or unsplit_ub > -np.inf:
            break
        mesh /= 4.0
        L, H = done_L, done_H
        done_L, done_H, done_ub = np.empty((0, D)), np.empty((0, D)), np.empty(0)

    if slack > slack_cap:
        raise MeshTooCoarse(slack, slack_cap)
    return incumbent, slack


def separable_max(g, a, b, kinks=()):
    """Upper bound sum_i max_{x in [a_i, b_i]} g(x)_i for g convex or
    piecewise-linear with the listed kink arrays (broadcastable to a)."""
    best = np.maximum(g(a), g(b))
    for k in kinks:
        x = np.clip(np.broadcast_to(k, a.shape), a, b)
        best = np.maximum(best, g(x))
    return best.sum(axis=1)
