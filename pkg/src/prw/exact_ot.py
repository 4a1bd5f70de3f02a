"""Exact and entropic discrete optimal transport, and 1-D closed forms.

The exact solver is a transportation simplex on a spanning-tree basis
(north-west-corner start, MODI potentials). Degenerate bases are carried
explicitly as zero-flow tree edges, so no marginal perturbation is needed.
Entering cells are chosen by most negative reduced cost with lexicographic
tie-break; after a run of degenerate pivots the rule switches to Bland's
(first negative cell in row-major order) until the objective moves again.

For square problems with uniform marginals the optimum is attained at a
permutation matrix, which ``scipy.optimize.linear_sum_assignment`` finds
directly; ``method="auto"`` uses that path.
"""

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .exceptions import InfeasibleMarginalsError, InvalidInputError
from .measures import DiscreteMeasure, check_simplex

MARGINAL_TOL = 1e-9


class TransportPlan(NamedTuple):
    matrix: np.ndarray
    r: np.ndarray
    c: np.ndarray

    def marginal_error(self) -> float:
        return max(
            np.max(np.abs(self.matrix.sum(axis=1) - self.r)),
            np.max(np.abs(self.matrix.sum(axis=0) - self.c)),
        )


class SinkhornResult(NamedTuple):
    plan: TransportPlan
    value: float
    converged: bool
    iterations: int


def cost_matrix(X, Y, projection=None, p: float = 2.0) -> np.ndarray:
    """Pairwise costs ``||P'x_i - P'y_j||^p`` (``P`` = identity when absent)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    if projection is not None:
        P = np.asarray(projection, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        if P.shape[0] != X.shape[1]:
            raise InvalidInputError("projection rows must match the ambient dimension")
        X, Y = X @ P, Y @ P
    diff = X[:, None, :] - Y[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if p == 2:
        return sq
    return np.sqrt(sq) ** p


def _check_marginals(cost, r, c):
    C = np.asarray(cost, dtype=float)
    r = np.asarray(r, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if C.shape != (r.size, c.size):
        raise InvalidInputError(f"cost shape {C.shape} does not match marginals ({r.size}, {c.size})")
    if np.any(r < 0) or np.any(c < 0):
        raise InvalidInputError("marginals must be nonnegative")
    if not np.all(np.isfinite(C)):
        raise InvalidInputError("cost matrix must be finite")
    if abs(r.sum() - c.sum()) > MARGINAL_TOL:
        raise InfeasibleMarginalsError(f"marginal masses differ: {r.sum()!r} vs {c.sum()!r}")
    return C, r, c


def _northwest_corner(r, c):
    n, m = r.size, c.size
    flow = np.zeros((n, m))
    basis = []
    rr, cc = r.copy(), c.copy()
    i = j = 0
    while True:
        q = min(rr[i], cc[j])
        flow[i, j] = q
        rr[i] -= q
        cc[j] -= q
        basis.append((i, j))
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif rr[i] <= cc[j]:
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(C, row_adj, col_adj, n, m):
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    queue = deque([(0, True)])
    while queue:
        k, is_row = queue.popleft()
        if is_row:
            for j in row_adj[k]:
                if np.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    queue.append((j, False))
        else:
            for i in col_adj[k]:
                if np.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    queue.append((i, True))
    return u, v


def _tree_path(row_adj, col_adj, start_row, target_col):
    """Edges on the tree path from row ``start_row`` to column ``target_col``."""
    parent = {("r", start_row): None}
    queue = deque([("r", start_row)])
    goal = ("c", target_col)
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        kind, k = node
        nbrs = (("c", j) for j in row_adj[k]) if kind == "r" else (("r", i) for i in col_adj[k])
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    edges = []
    node = goal
    while parent[node] is not None:
        prev = parent[node]
        edges.append((prev[1], node[1]) if prev[0] == "r" else (node[1], prev[1]))
        node = prev
    edges.reverse()
    return edges


def _transport_simplex(C, r, c, max_iter=None):
    n, m = C.shape
    flow, basis = _northwest_corner(r, c)
    row_adj = [set() for _ in range(n)]
    col_adj = [set() for _ in range(m)]
    for i, j in basis:
        row_adj[i].add(j)
        col_adj[j].add(i)
    scale = max(1.0, float(np.max(np.abs(C))))
    tol = 1e-12 * scale
    max_iter = max_iter or 50 * (n + m) * max(n, m) + 1000
    degenerate_run = 0
    for _ in range(max_iter):
        u, v = _potentials(C, row_adj, col_adj, n, m)
        red = C - u[:, None] - v[None, :]
        if degenerate_run > n + m:
            neg = np.flatnonzero(red.ravel() < -tol)
            if neg.size == 0:
                break
            flat = neg[0]
        else:
            flat = int(np.argmin(red))  # argmin returns the first (row-major) minimiser
            if red.flat[flat] >= -tol:
                break
        ei, ej = divmod(flat, m)
        path = _tree_path(row_adj, col_adj, ei, ej)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[e] for e in minus)
        leaving = min(e for e in minus if flow[e] <= theta)
        for e in minus:
            flow[e] -= theta
        for e in plus:
            flow[e] += theta
        flow[ei, ej] += theta
        flow[leaving] = 0.0
        li, lj = leaving
        row_adj[li].discard(lj)
        col_adj[lj].discard(li)
        row_adj[ei].add(ej)
        col_adj[ej].add(ei)
        degenerate_run = degenerate_run + 1 if theta <= tol else 0
    else:
        raise RuntimeError("transportation simplex exceeded its iteration budget")
    np.maximum(flow, 0.0, out=flow)
    return flow


def _is_uniform_square(r, c):
    n = r.size
    return n == c.size and np.all(r == r[0]) and np.all(c == c[0]) and abs(r[0] - c[0]) <= 1e-15


def solve_exact_ot(cost, r, c, method: str = "auto"):
    """Solve the transportation LP ``min <P, C>`` over couplings of ``(r, c)``.

    Returns ``(TransportPlan, value)``; the plan is a vertex of the
    transportation polytope. ``method`` is ``"auto"``, ``"simplex"`` or
    ``"assignment"`` (uniform square marginals only).
    """
    C, r, c = _check_marginals(cost, r, c)
    if method == "assignment" or (method == "auto" and _is_uniform_square(r, c)):
        if not _is_uniform_square(r, c):
            raise InvalidInputError("assignment method needs uniform marginals of equal size")
        rows, cols = linear_sum_assignment(C)
        P = np.zeros_like(C)
        P[rows, cols] = r[0]
    elif method in ("auto", "simplex"):
        P = _transport_simplex(C, r, c)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    value = float(np.sum(P * C, dtype=np.longdouble))
    return TransportPlan(P, r, c), value


def sinkhorn(cost, r, c, reg: float, tol: float = 1e-9, max_iter: int = 10000) -> SinkhornResult:
    """Log-domain Sinkhorn iterations for entropically regularised OT.

    ``value`` is the transport cost ``<P, C>`` of the returned plan, without
    the entropy term. Stops when both marginals are within ``tol``; if
    ``max_iter`` is hit the last iterate is returned with ``converged=False``.
    """
    C, r, c = _check_marginals(cost, r, c)
    if not reg > 0:
        raise InvalidInputError("reg must be positive")
    with np.errstate(divide="ignore"):
        logr, logc = np.log(r), np.log(c)
    f = np.zeros(r.size)
    g = np.zeros(c.size)
    M = -C / reg
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f = logr - logsumexp(M + g[None, :], axis=1)
        g = logc - logsumexp(M + f[:, None], axis=0)
        if it % 10 == 0 or it == max_iter:
            P = np.exp(M + f[:, None] + g[None, :])
            if np.max(np.abs(P.sum(axis=1) - r)) <= tol:
                converged = True
                break
    P = np.exp(M + f[:, None] + g[None, :])
    return SinkhornResult(TransportPlan(P, r, c), float(np.sum(P * C)), converged, it)


def wasserstein_p(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0, projection=None,
                  method: str = "auto") -> float:
    """Order-``p`` Wasserstein distance, optionally between projected measures."""
    if mu.dim != nu.dim:
        raise InvalidInputError("measures live in different dimensions")
    C = cost_matrix(mu.atoms, nu.atoms, projection, p)
    _, value = solve_exact_ot(C, mu.weights, nu.weights, method=method)
    return max(value, 0.0) ** (1.0 / p)


def _merge_1d(xs, wx, ys, wy):
    """Monotone coupling of two 1-D discrete laws as ``(i, j, mass)`` segments.

    Indices refer to the original (unsorted) atoms. Each segment is one piece
    of the common refinement of the two quantile partitions of [0, 1].
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    wx = check_simplex(np.asarray(wx, dtype=float).ravel(), "wx", tol=1e-9)
    wy = check_simplex(np.asarray(wy, dtype=float).ravel(), "wy", tol=1e-9)
    if xs.size != wx.size or ys.size != wy.size:
        raise InvalidInputError("atoms and weights differ in length")
    ox = np.argsort(xs, kind="stable")
    oy = np.argsort(ys, kind="stable")
    cx = np.cumsum(wx[ox])
    cy = np.cumsum(wy[oy])
    cx[-1] = cy[-1] = 1.0
    cuts = np.union1d(cx, cy)
    lo = np.concatenate([[0.0], cuts[:-1]])
    mass = cuts - lo
    keep = mass > 0
    mid = (lo + cuts)[keep] / 2.0
    ia = np.minimum(np.searchsorted(cx, mid), xs.size - 1)
    ja = np.minimum(np.searchsorted(cy, mid), ys.size - 1)
    return ox[ia], oy[ja], mass[keep]


def wasserstein_1d(xs, wx, ys, wy, p: float = 2.0) -> float:
    """Exact ``W_p`` between 1-D discrete laws via their quantile functions."""
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    i, j, mass = _merge_1d(xs, wx, ys, wy)
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    total = np.sum(mass * np.abs(xs[i] - ys[j]) ** p, dtype=np.longdouble)
    return float(total) ** (1.0 / p)


def monotone_plan_1d(xs, wx, ys, wy) -> TransportPlan:
    """Dense optimal plan between 1-D discrete laws (the quantile coupling)."""
    i, j, mass = _merge_1d(xs, wx, ys, wy)
    P = np.zeros((np.size(xs), np.size(ys)))
    np.add.at(P, (i, j), mass)
    return TransportPlan(P, np.asarray(wx, dtype=float).ravel(), np.asarray(wy, dtype=float).ravel())


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Linear interpolant through ``(breakpoints, values)``, constant outside."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if b.size != v.size or b.size == 0:
            raise InvalidInputError("breakpoints and values must be non-empty and equal length")
        if np.any(np.diff(b) <= 0):
            raise InvalidInputError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def slope(self, x):
        """Derivative of the interpolant (right-continuous, zero outside)."""
        b, v = self.breakpoints, self.values
        if b.size == 1:
            return np.zeros_like(np.asarray(x, dtype=float))
        k = np.clip(np.searchsorted(b, x, side="right") - 1, 0, b.size - 2)
        s = (v[k + 1] - v[k]) / (b[k + 1] - b[k])
        x = np.asarray(x, dtype=float)
        return np.where((x < b[0]) | (x >= b[-1]), 0.0, s)


def quantile_positions(samples, weights=None):
    """Sorted atoms and the probability level assigned to each.

    Each atom sits at the midpoint of its probability bucket, and the
    midpoints are rescaled affinely so the smallest atom maps to 0 and the
    largest to 1. For ``n`` uniform atoms this gives levels ``i / (n - 1)``.
    Zero-weight atoms are dropped; tied atoms keep separate levels.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InvalidInputError("need at least one sample")
    w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.size != x.size:
        raise InvalidInputError("samples and weights differ in length")
    keep = w > 0
    x, w = x[keep], w[keep]
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order] / w.sum()
    if x.size == 1:
        return x, np.array([0.5])
    mid = np.cumsum(w) - w / 2.0
    levels = (mid - mid[0]) / (mid[-1] - mid[0])
    return x, levels


def interp_quantile(samples, weights=None) -> PiecewiseLinearFn:
    atoms, levels = quantile_positions(samples, weights)
    return PiecewiseLinearFn(levels, atoms)


def interp_cdf(samples, weights=None) -> PiecewiseLinearFn:
    """Linear interpolant of the CDF through the quantile knots.

    Tied atoms collapse to one knot at the mean of their levels.
    """
    atoms, levels = quantile_positions(samples, weights)
    uniq, inv = np.unique(atoms, return_inverse=True)
    lv = np.bincount(inv, weights=levels) / np.bincount(inv)
    return PiecewiseLinearFn(uniq, lv)


class FrozenQuantile(NamedTuple):
    """Interpolated quantile at fixed levels, with its sort structure frozen.

    ``values[k] = (1 - lam[k]) * x[lo[k]] + lam[k] * x[hi[k]]`` where ``lo``
    and ``hi`` index the original (unsorted) atoms. Holding ``lo``, ``hi``
    and ``lam`` fixed while atoms move gives the derivative of the quantile
    with respect to the atoms without differentiating through the sort.
    ``slope`` is the derivative of the interpolant in the level ``t``.
    """

    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    lam: np.ndarray
    slope: np.ndarray

    def combine(self, atoms: np.ndarray) -> np.ndarray:
        """Apply the frozen interpolation to arbitrary per-atom vectors."""
        lam = self.lam[:, None] if atoms.ndim == 2 else self.lam
        return (1.0 - lam) * atoms[self.lo] + lam * atoms[self.hi]


def frozen_quantile(x, t, weights=None) -> FrozenQuantile:
    """Evaluate :func:`interp_quantile` of ``x`` at levels ``t``, keeping its structure."""
    x = np.asarray(x, dtype=float).ravel()
    t = np.clip(np.asarray(t, dtype=float).ravel(), 0.0, 1.0)
    n = x.size
    if weights is None:
        order = np.argsort(x, kind="stable")
        levels = np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.5])
    else:
        w = np.asarray(weights, dtype=float).ravel()
        idx = np.flatnonzero(w > 0)
        order = idx[np.argsort(x[idx], kind="stable")]
        _, levels = quantile_positions(x[idx], w[idx])
    if order.size == 1:
        lo = np.full(t.size, order[0])
        return FrozenQuantile(x[lo], lo, lo, np.zeros(t.size), np.zeros(t.size))
    k = np.clip(np.searchsorted(levels, t, side="right") - 1, 0, order.size - 2)
    lam = np.clip((t - levels[k]) / (levels[k + 1] - levels[k]), 0.0, 1.0)
    lo, hi = order[k], order[k + 1]
    slope = (x[hi] - x[lo]) / (levels[k + 1] - levels[k])
    return FrozenQuantile((1.0 - lam) * x[lo] + lam * x[hi], lo, hi, lam, slope)
