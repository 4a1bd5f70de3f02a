"""Projection robust Wasserstein distances.

* :func:`prw2_rsgan` -- order-2 PRW by Riemannian supergradient ascent over
  the Stiefel manifold, with an exact OT solve at every iterate.
* :func:`iprw` -- integral PRW, Monte Carlo over Haar-random projections.
* :func:`max_sw_quantile_mc`, :func:`max_sw_pushforward` -- the two
  Monte Carlo approximations of the ``k = 1`` PRW (max-sliced) distance.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .exact_ot import (
    TransportPlan,
    cost_matrix,
    frozen_quantile,
    interp_cdf,
    monotone_plan_1d,
    sinkhorn,
    solve_exact_ot,
    wasserstein_1d,
)
from .exceptions import DegenerateStepError, InvalidInputError
from .measures import DiscreteMeasure, SeedLike, make_rng
from .stiefel import qr_retract, sample_uniform_stiefel, sphere_tiebreak, tangent_project


def compute_v_pi(plan, X, Y) -> np.ndarray:
    """Second-moment matrix ``sum_ij pi_ij (x_i - y_j)(x_i - y_j)'`` of a plan."""
    P = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if P.shape != (X.shape[0], Y.shape[0]) or X.shape[1] != Y.shape[1]:
        raise InvalidInputError(f"plan {P.shape} inconsistent with X {X.shape} and Y {Y.shape}")
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    XPY = X.T @ P @ Y
    V = (X.T * r) @ X + (Y.T * c) @ Y - XPY - XPY.T
    return (V + V.T) / 2.0


@dataclass
class RsganConfig:
    k: int = 1
    gamma0: Optional[float] = None
    max_iter: int = 30
    step_tol: float = 1e-6
    seed: SeedLike = 0
    U0: Optional[np.ndarray] = None
    inner: str = "exact"
    sinkhorn_reg: float = 1e-2

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if self.gamma0 is not None and not self.gamma0 > 0:
            raise InvalidInputError("gamma0 must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        if self.inner not in ("exact", "sinkhorn"):
            raise InvalidInputError(f"unknown inner solver {self.inner!r}")


@dataclass
class PrwResult:
    projection: np.ndarray
    value: float
    history: List[Tuple[float, float]] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    degenerate: bool = False

    @property
    def initial_objective(self) -> float:
        return self.history[0][0]


def default_gamma0(V: np.ndarray) -> float:
    """``2 / lambda_max(V)`` for the second-moment matrix of the first plan.

    The supergradient ``2 V U`` scales like squared distance, so the step
    size must scale inversely for the retraction step to be unit-free.
    """
    lam = float(np.linalg.eigvalsh(V)[-1])
    return 2.0 / lam if lam > 0 else 1.0


def projected_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, U: np.ndarray, inner: str = "exact",
                 reg: float = 1e-2):
    """Optimal plan and value for the squared cost between ``U``-projections."""
    if U.shape[1] == 1 and inner == "exact":
        xs, ys = mu.atoms @ U[:, 0], nu.atoms @ U[:, 0]
        plan = monotone_plan_1d(xs, mu.weights, ys, nu.weights)
        return plan, float(np.sum(plan.matrix * (xs[:, None] - ys[None, :]) ** 2))
    C = cost_matrix(mu.atoms, nu.atoms, U, 2.0)
    if inner == "sinkhorn":
        res = sinkhorn(C, mu.weights, nu.weights, reg=reg * max(C.max(), 1e-300))
        return res.plan, res.value
    return solve_exact_ot(C, mu.weights, nu.weights)


def prw2_rsgan(mu: DiscreteMeasure, nu: DiscreteMeasure, config: RsganConfig = None) -> PrwResult:
    """Order-2 PRW distance by Riemannian supergradient ascent (RSGAN).

    Each iteration solves the OT problem under the projected squared cost at
    ``U_t``, forms the supergradient ``2 V_pi U_t``, projects it onto the
    tangent space and takes a QR-retraction step of size
    ``gamma0 / sqrt(t + 1)``. The ascent is not monotone, so the best visited
    iterate is returned; ``value`` is the square root of its objective.
    """
    config = config or RsganConfig()
    if mu.dim != nu.dim:
        raise InvalidInputError("measures live in different dimensions")
    d, k = mu.dim, config.k
    if k > d:
        raise InvalidInputError(f"k={k} exceeds ambient dimension {d}")
    U = sample_uniform_stiefel(d, k, config.seed) if config.U0 is None else np.array(config.U0, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    gamma0 = config.gamma0
    X, Y = mu.atoms, nu.atoms

    history = []
    best_val, best_U = -np.inf, U
    converged = degenerate = False
    t = 0
    for t in range(config.max_iter):
        plan, val = projected_ot(mu, nu, U, config.inner, config.sinkhorn_reg)
        if val > best_val:
            best_val, best_U = val, U
        V = compute_v_pi(plan, X, Y)
        if gamma0 is None:
            gamma0 = default_gamma0(V)
        xi = tangent_project(U, 2.0 * V @ U)
        try:
            U_next = qr_retract(U, gamma0 / np.sqrt(t + 1.0) * xi)
        except DegenerateStepError:
            history.append((val, np.nan))
            degenerate = True
            break
        step = float(np.linalg.norm(U_next - U))
        history.append((val, step))
        U = U_next
        if step <= config.step_tol:
            converged = True
            break
    if not degenerate:
        # the last retraction produced an iterate whose objective is still unknown
        _, val = projected_ot(mu, nu, U, config.inner, config.sinkhorn_reg)
        if val > best_val:
            best_val, best_U = val, U
    return PrwResult(
        projection=best_U,
        value=float(np.sqrt(max(best_val, 0.0))),
        history=history,
        converged=converged,
        iterations=t + 1,
        degenerate=degenerate,
    )


def _projected_power(mu, nu, E, p):
    if E.shape[1] == 1:
        return wasserstein_1d(mu.atoms @ E[:, 0], mu.weights, nu.atoms @ E[:, 0], nu.weights, p) ** p
    _, val = solve_exact_ot(cost_matrix(mu.atoms, nu.atoms, E, p), mu.weights, nu.weights)
    return max(val, 0.0)


def iprw(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0, k: int = 1, n_proj: int = 100,
         seed: SeedLike = 0) -> float:
    """Integral PRW: ``(mean_E W_p^p(E#mu, E#nu))^(1/p)`` over Haar-random ``E``.

    The projection set depends only on ``(d, k, n_proj, seed)``, so calls
    sharing a seed average over the same subspaces.
    """
    if mu.dim != nu.dim:
        raise InvalidInputError("measures live in different dimensions")
    if not 1 <= k <= mu.dim:
        raise InvalidInputError(f"need 1 <= k <= d, got k={k}")
    if n_proj < 1:
        raise InvalidInputError("n_proj must be >= 1")
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    rng = make_rng(seed)
    total = 0.0
    for _ in range(n_proj):
        total += _projected_power(mu, nu, sample_uniform_stiefel(mu.dim, k, rng), p)
    return (total / n_proj) ** (1.0 / p)


@dataclass
class MaxSwConfig:
    K: int = 1000
    ascent_steps: int = 5
    ascent_lr: float = 1e-3
    p: float = 2.0
    seed: SeedLike = 0
    u0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.K < 1 or self.ascent_steps < 1:
            raise InvalidInputError("K and ascent_steps must be >= 1")
        if self.p < 1:
            raise InvalidInputError("p must be >= 1")


def _residual_power(res, p):
    """``|r|^p`` and its derivative, using ``sign(0) = 0``."""
    a = np.abs(res)
    return a ** p, p * a ** (p - 1.0) * np.sign(res)


def quantile_mc_objective(u, mu, nu, t, p=2.0):
    """Mean ``|Q_mu(t_k) - Q_nu(t_k)|^p`` along ``u`` and its gradient in ``u``."""
    qx = frozen_quantile(mu.atoms @ u, t, mu.weights)
    qy = frozen_quantile(nu.atoms @ u, t, nu.weights)
    val, dval = _residual_power(qx.values - qy.values, p)
    grad = (dval[:, None] * (qx.combine(mu.atoms) - qy.combine(nu.atoms))).mean(axis=0)
    return float(val.mean()), grad


def pushforward_objective(u, mu, nu, idx, p=2.0):
    """Mean ``|s_k - Q_nu(F_mu(s_k))|^p`` with ``s_k = u'x_{idx_k}``, and its gradient."""
    xs = mu.atoms @ u
    s = xs[idx]
    levels = interp_cdf(xs, mu.weights)(s)
    qy = frozen_quantile(nu.atoms @ u, levels, nu.weights)
    val, dval = _residual_power(s - qy.values, p)
    grad = (dval[:, None] * (mu.atoms[idx] - qy.combine(nu.atoms))).mean(axis=0)
    return float(val.mean()), grad


def sphere_ascent(objective, u0, steps, lr):
    """Projected gradient ascent on the unit sphere, keeping the best iterate."""
    u = np.asarray(u0, dtype=float).ravel()
    u = u / np.linalg.norm(u)
    best_val, best_u = -np.inf, u
    trace = []
    for it in range(steps + 1):
        val, grad = objective(u)
        trace.append(val)
        if val > best_val:
            best_val, best_u = val, u
        if it == steps:
            break
        v = u + lr * grad
        nv = np.linalg.norm(v)
        if nv == 0:
            break
        u = v / nv
    return sphere_tiebreak(best_u), best_val, trace


def _initial_direction(config, d, rng):
    if config.u0 is not None:
        return np.asarray(config.u0, dtype=float)
    return sample_uniform_stiefel(d, 1, rng)[:, 0]


def max_sw_quantile_mc(mu: DiscreteMeasure, nu: DiscreteMeasure, config: MaxSwConfig = None):
    """Max-sliced ``W_p`` with quantiles compared at ``K`` uniform levels.

    Returns ``(u, value)`` where ``value`` is the ``p``-th root of the best
    objective found.
    """
    config = config or MaxSwConfig()
    rng = make_rng(config.seed)
    u0 = _initial_direction(config, mu.dim, rng)
    t = rng.random(config.K)
    u, val, _ = sphere_ascent(lambda v: quantile_mc_objective(v, mu, nu, t, config.p), u0,
                              config.ascent_steps, config.ascent_lr)
    return u, max(val, 0.0) ** (1.0 / config.p)


def max_sw_pushforward(mu: DiscreteMeasure, nu: DiscreteMeasure, config: MaxSwConfig = None):
    """Max-sliced ``W_p`` through the push-forward map at ``K`` draws from ``mu``."""
    config = config or MaxSwConfig()
    rng = make_rng(config.seed)
    u0 = _initial_direction(config, mu.dim, rng)
    idx = rng.choice(mu.n, size=config.K, p=mu.weights)
    u, val, _ = sphere_ascent(lambda v: pushforward_objective(v, mu, nu, idx, config.p), u0,
                              config.ascent_steps, config.ascent_lr)
    return u, max(val, 0.0) ** (1.0 / config.p)
