"""Minimum max-sliced Wasserstein estimation for 2-D location(-scale) models.

Both estimators alternate a few projected ascent steps on the slicing
direction ``u`` with one ADAM step on the model parameters:

* MPRW, Gaussian model: objective ``f1``, the push-forward approximation
  evaluated on a grid ``S`` with the model's exact normal CDF and density.
  :func:`grad_f1` differentiates it on a fixed grid; the fit itself uses
  :func:`grad_f1_tied`, where the grid moves with the model so that the
  noisy slope of the data quantile never enters the gradient.
* MEPRW, Gaussian or elliptically contoured stable model: objectives ``f2``
  and ``f3``, the quantile approximation between data and ``m`` model samples
  at uniform levels ``t_k``. Model samples are reparameterised
  (``mean + sigma * z`` or ``loc + sqrt(A) * g``) with ``(z, A, g)`` redrawn
  once per outer iteration and held fixed inside it.

Every few outer iterations the current direction is compared with a handful
of uniform random ones and the best is kept, because the slicing objective
has several near-equal local maxima. Fits start from the coordinatewise data
median and return the average of the last iterates, which keeps them exactly
translation equivariant. Gradients treat sort orders and interpolation
weights as constants (frozen
interpolants) and carry the signed residual, so they are the exact
derivatives of the objectives they return.
"""

from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.special import ndtr

from .exact_ot import frozen_quantile
from .exceptions import InvalidInputError
from .measures import DiscreteMeasure, EcsSpec, SeedLike, ecs_components, make_rng
from .stiefel import sample_uniform_stiefel

SIGMA2_FLOOR = 1e-8


@dataclass(frozen=True)
class GaussianParams:
    mean: np.ndarray
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).ravel())
        if not self.sigma2 > 0:
            raise InvalidInputError("sigma2 must be positive")

    def as_vector(self) -> np.ndarray:
        return np.append(self.mean, self.sigma2)


@dataclass(frozen=True)
class EcsLocationParams:
    location: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, dtype=float).ravel())
        if not 0 < self.alpha < 2:
            raise InvalidInputError("alpha must lie in (0, 2)")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, dim: int, lr: float = 1e-3, **kw) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), 0, lr, **kw)


def adam_step(state: AdamState, params, grad):
    """One bias-corrected ADAM descent step; returns ``(new_state, new_params)``."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if not (params.shape == grad.shape == state.m.shape):
        raise InvalidInputError(f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), new_params


class GaussianGrad(NamedTuple):
    d_mean: np.ndarray
    d_sigma2: float
    d_u: np.ndarray
    value: float


class LocationGrad(NamedTuple):
    d_mean: np.ndarray
    d_u: np.ndarray
    value: float


def _gauss_terms(params: GaussianParams, u, S):
    sigma2 = params.sigma2
    sigma = np.sqrt(sigma2)
    a = float(u @ params.mean)
    dev = np.asarray(S, dtype=float) - a
    z = dev / sigma
    dens = np.exp(-0.5 * z**2) / np.sqrt(2.0 * np.pi * sigma2)
    return a, dev, dens, ndtr(z)


def f1_value(params: GaussianParams, u, data, S) -> float:
    """Grid approximation ``mean_s |s - Q_data(F_model(s))|^2 N(s; u'm, sigma2)``."""
    u = np.asarray(u, dtype=float)
    S = np.asarray(S, dtype=float)
    _, _, dens, cdf = _gauss_terms(params, u, S)
    q = frozen_quantile(np.asarray(data) @ u, cdf).values
    return float(np.mean((S - q) ** 2 * dens))


def grad_f1(params: GaussianParams, u, data, S, residual_terms: bool = True) -> GaussianGrad:
    """Value and gradient of :func:`f1_value` in ``(mean, sigma2, u)``.

    With ``residual_terms=False`` only the derivative of the density factor
    is returned, i.e. the gradient with the squared residual held fixed.
    The full gradient also differentiates the residual through the model CDF
    and through the data projection (sort order frozen).
    """
    u = np.asarray(u, dtype=float)
    data = np.asarray(data, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        raise InvalidInputError("evaluation grid S is empty")
    m = params.mean
    sigma2 = params.sigma2
    a, dev, dens, cdf = _gauss_terms(params, u, S)
    q = frozen_quantile(data @ u, cdf)
    res = S - q.values
    R = res**2

    w = R * dens
    d_mean = np.mean(w * dev) / sigma2 * u
    d_sigma2 = float(np.mean(w * (dev**2 - sigma2))) / (2.0 * sigma2**2)
    d_u = np.mean(w * dev) / sigma2 * m
    if residual_terms:
        g = 2.0 * res * q.slope * dens**2  # dens * dR/dF * (-dF/da)
        d_mean = d_mean + np.mean(g) * u
        d_sigma2 = d_sigma2 + float(np.mean(g * dev)) / (2.0 * sigma2)
        d_u = d_u + np.mean(g) * m - (2.0 * (res * dens)[:, None] * q.combine(data)).mean(axis=0)
    return GaussianGrad(d_mean, d_sigma2, d_u, float(np.mean(w)))


def standard_nodes(K: int, halfwidth: float = 5.0) -> np.ndarray:
    return np.linspace(-halfwidth, halfwidth, K)


def grad_f1_tied(params: GaussianParams, u, data, nodes) -> GaussianGrad:
    """``f1`` on the grid ``S = u'm + sigma * nodes`` that moves with the model.

    The objective is scaled by the grid spacing ``sigma * dw`` so it is a
    quadrature of the squared 1-D ``W_2`` between ``N(u'm, sigma2)`` and the
    projected data. Because ``F_model(S)`` no longer depends on the
    parameters, the slope of the data quantile drops out of every gradient.
    """
    u = np.asarray(u, dtype=float)
    data = np.asarray(data, dtype=float)
    w = np.asarray(nodes, dtype=float)
    dw = (w[-1] - w[0]) / (w.size - 1) if w.size > 1 else 1.0
    sigma = np.sqrt(params.sigma2)
    a = float(u @ params.mean)
    q = frozen_quantile(data @ u, ndtr(w))
    res = a + sigma * w - q.values
    c = dw * np.exp(-0.5 * w**2) / np.sqrt(2.0 * np.pi)
    value = float(np.sum(c * res**2))
    da = 2.0 * np.sum(c * res)
    dsigma = 2.0 * np.sum(c * res * w)
    d_u = da * params.mean - 2.0 * (c * res) @ q.combine(data)
    return GaussianGrad(da * u, dsigma / (2.0 * sigma), d_u, value)


def _quantile_residual(model, data, u, t):
    qm = frozen_quantile(model @ u, t)
    qd = frozen_quantile(data @ u, t)
    res = qm.values - qd.values
    return res, qm, qd


def f2_value(params: GaussianParams, u, noise, data, t) -> float:
    """``mean_k |Q_model(t_k) - Q_data(t_k)|^2`` with model atoms ``mean + sigma * noise``."""
    model = params.mean + np.sqrt(params.sigma2) * np.asarray(noise)
    res, _, _ = _quantile_residual(model, np.asarray(data), np.asarray(u, dtype=float), t)
    return float(np.mean(res**2))


def grad_f2(params: GaussianParams, u, noise, data, t) -> GaussianGrad:
    """Value and gradient of :func:`f2_value`; ``noise`` are the frozen standard normals."""
    u = np.asarray(u, dtype=float)
    noise = np.asarray(noise, dtype=float)
    data = np.asarray(data, dtype=float)
    model = params.mean + np.sqrt(params.sigma2) * noise
    res, qm, qd = _quantile_residual(model, data, u, t)
    a = float(u @ params.mean)
    d_mean = 2.0 * np.mean(res) * u
    d_sigma2 = float(np.mean(res * (qm.values - a))) / params.sigma2
    d_u = (2.0 * res[:, None] * (qm.combine(model) - qd.combine(data))).mean(axis=0)
    return GaussianGrad(d_mean, d_sigma2, d_u, float(np.mean(res**2)))


def f3_value(location, u, scaled_noise, data, t) -> float:
    """``f2`` for a pure location model with atoms ``location + scaled_noise``."""
    model = np.asarray(location, dtype=float) + np.asarray(scaled_noise)
    res, _, _ = _quantile_residual(model, np.asarray(data), np.asarray(u, dtype=float), t)
    return float(np.mean(res**2))


def grad_f3(params: EcsLocationParams, u, scaled_noise, data, t) -> LocationGrad:
    """Value and gradient of :func:`f3_value`; ``scaled_noise`` rows are ``sqrt(A_i) g_i``."""
    u = np.asarray(u, dtype=float)
    data = np.asarray(data, dtype=float)
    model = params.location + np.asarray(scaled_noise, dtype=float)
    res, qm, qd = _quantile_residual(model, data, u, t)
    d_mean = 2.0 * np.mean(res) * u
    d_u = (2.0 * res[:, None] * (qm.combine(model) - qd.combine(data))).mean(axis=0)
    return LocationGrad(d_mean, d_u, float(np.mean(res**2)))


@dataclass
class FitConfig:
    outer_iters: int = 2000
    inner_ascent_steps: int = 5
    inner_lr: float = 0.1
    K: int = 500
    m_model_samples: int = 1000
    seed: SeedLike = 0
    outer_lr: float = 1e-3
    init_mean: Optional[np.ndarray] = None
    init_sigma2: float = 1.0
    grid_halfwidth: float = 5.0
    normalized_ascent: bool = True
    tail_average: float = 0.5
    restart_every: int = 10
    restart_candidates: int = 8

    def __post_init__(self):
        if min(self.outer_iters, self.inner_ascent_steps, self.K, self.m_model_samples) < 1:
            raise InvalidInputError("iteration and sample counts must be >= 1")
        if not (self.inner_lr > 0 and self.outer_lr > 0):
            raise InvalidInputError("learning rates must be positive")
        if self.restart_every < 0 or self.restart_candidates < 0:
            raise InvalidInputError("restart settings must be >= 0")
        if not 0.0 <= self.tail_average < 1.0:
            raise InvalidInputError("tail_average must lie in [0, 1)")
        if not self.init_sigma2 > 0:
            raise InvalidInputError("init_sigma2 must be positive")


@dataclass
class FitTrace:
    objective: List[float] = field(default_factory=list)
    inner_objective: List[List[float]] = field(default_factory=list)
    u: Optional[np.ndarray] = None
    sigma2_clamped: bool = False


def _data_array(data) -> np.ndarray:
    X = data.atoms if isinstance(data, DiscreteMeasure) else np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise InvalidInputError(f"expected 2-D data, got shape {X.shape}")
    return X


def _ascend(u, grad_u, steps, lr, normalized=True):
    """``steps`` projected ascent steps on the circle; returns ``(u, values)``.

    With ``normalized`` the tangent part of the gradient is rescaled to unit
    length, so every step turns ``u`` by about ``lr`` radians whatever the
    objective's scale.
    """
    values = []
    for _ in range(steps):
        val, g = grad_u(u)
        values.append(val)
        if normalized:
            g = g - (g @ u) * u
            ng = np.linalg.norm(g)
            if ng == 0:
                continue
            g = g / ng
        v = u + lr * g
        nv = np.linalg.norm(v)
        if nv > 0:
            u = v / nv
    return u, values


def _best_direction(u, grad_u, rng, candidates):
    """Keep ``u`` or jump to the best of ``candidates`` uniform directions.

    The slicing objective has several local maxima of similar height, and
    ascent alone never leaves the basin it starts in.
    """
    best, best_val = u, grad_u(u)[0]
    for _ in range(candidates):
        v = sample_uniform_stiefel(2, 1, rng)[:, 0]
        val = grad_u(v)[0]
        if val > best_val:
            best, best_val = v, val
    return best


class _TailMean:
    """Running mean of the iterates in the last ``fraction`` of the outer loop."""

    def __init__(self, iters, fraction):
        self.first = iters - max(1, int(round(fraction * iters))) if fraction > 0 else iters - 1
        self.total = None
        self.count = 0

    def add(self, it, theta):
        if it >= self.first:
            self.total = theta.copy() if self.total is None else self.total + theta
            self.count += 1

    def value(self):
        return self.total / self.count


def _start(config: FitConfig, X, rng):
    # the coordinatewise median is robust to heavy tails and moves with the data
    mean = np.median(X, axis=0) if config.init_mean is None else np.asarray(config.init_mean, dtype=float)
    u = sample_uniform_stiefel(2, 1, rng)[:, 0]
    return mean, u


def fit_mprw_gaussian(data, config: FitConfig = None):
    """MPRW estimate of ``N(mean, sigma2 I)`` from 2-D data.

    Each outer iteration runs the inner ascent on ``u`` and then one ADAM
    step on ``(mean, sigma2)``, both on :func:`grad_f1_tied` with ``K`` nodes
    spanning ``+- grid_halfwidth`` standard deviations. Returns
    ``(GaussianParams, FitTrace)``.
    """
    config = config or FitConfig()
    X = _data_array(data)
    rng = make_rng(config.seed)
    mean, u = _start(config, X, rng)
    theta = np.append(mean, config.init_sigma2)
    state = AdamState.zeros(3, lr=config.outer_lr)
    trace = FitTrace()
    nodes = standard_nodes(config.K, config.grid_halfwidth)
    tail = _TailMean(config.outer_iters, config.tail_average)
    for it in range(config.outer_iters):
        params = GaussianParams(theta[:2], theta[2])

        def grad_u(v):
            g = grad_f1_tied(params, v, X, nodes)
            return g.value, g.d_u

        if config.restart_every and it % config.restart_every == 0:
            u = _best_direction(u, grad_u, rng, config.restart_candidates)
        u, inner = _ascend(u, grad_u, config.inner_ascent_steps, config.inner_lr,
                           config.normalized_ascent)
        g = grad_f1_tied(params, u, X, nodes)
        state, theta = adam_step(state, theta, np.append(g.d_mean, g.d_sigma2))
        if theta[2] < SIGMA2_FLOOR:
            theta[2] = SIGMA2_FLOOR
            trace.sigma2_clamped = True
        tail.add(it, theta)
        trace.objective.append(g.value)
        trace.inner_objective.append(inner)
    trace.u = u
    theta = tail.value()
    return GaussianParams(theta[:2], max(theta[2], SIGMA2_FLOOR)), trace


def fit_meprw_gaussian(data, config: FitConfig = None):
    """MEPRW estimate of ``N(mean, sigma2 I)`` using ``m_model_samples`` model draws."""
    config = config or FitConfig()
    X = _data_array(data)
    rng = make_rng(config.seed)
    mean, u = _start(config, X, rng)
    theta = np.append(mean, config.init_sigma2)
    state = AdamState.zeros(3, lr=config.outer_lr)
    trace = FitTrace()
    tail = _TailMean(config.outer_iters, config.tail_average)
    for it in range(config.outer_iters):
        params = GaussianParams(theta[:2], theta[2])
        noise = rng.standard_normal((config.m_model_samples, 2))
        t = rng.random(config.K)

        def grad_u(v):
            g = grad_f2(params, v, noise, X, t)
            return g.value, g.d_u

        if config.restart_every and it % config.restart_every == 0:
            u = _best_direction(u, grad_u, rng, config.restart_candidates)
        u, inner = _ascend(u, grad_u, config.inner_ascent_steps, config.inner_lr,
                           config.normalized_ascent)
        g = grad_f2(params, u, noise, X, t)
        state, theta = adam_step(state, theta, np.append(g.d_mean, g.d_sigma2))
        if theta[2] < SIGMA2_FLOOR:
            theta[2] = SIGMA2_FLOOR
            trace.sigma2_clamped = True
        tail.add(it, theta)
        trace.objective.append(g.value)
        trace.inner_objective.append(inner)
    trace.u = u
    theta = tail.value()
    return GaussianParams(theta[:2], max(theta[2], SIGMA2_FLOOR)), trace


def fit_meprw_ecs(data, config: FitConfig = None, alpha: float = 1.5):
    """MEPRW estimate of the location of an ``alpha``-ECS law with identity scatter."""
    config = config or FitConfig()
    X = _data_array(data)
    rng = make_rng(config.seed)
    loc, u = _start(config, X, rng)
    spec = EcsSpec(alpha, np.eye(2))
    state = AdamState.zeros(2, lr=config.outer_lr)
    trace = FitTrace()
    tail = _TailMean(config.outer_iters, config.tail_average)
    for it in range(config.outer_iters):
        params = EcsLocationParams(loc, alpha)
        A, G = ecs_components(spec, config.m_model_samples, rng)
        noise = np.sqrt(A)[:, None] * G
        t = rng.random(config.K)

        def grad_u(v):
            g = grad_f3(params, v, noise, X, t)
            return g.value, g.d_u

        if config.restart_every and it % config.restart_every == 0:
            u = _best_direction(u, grad_u, rng, config.restart_candidates)
        u, inner = _ascend(u, grad_u, config.inner_ascent_steps, config.inner_lr,
                           config.normalized_ascent)
        g = grad_f3(params, u, noise, X, t)
        state, loc = adam_step(state, loc, g.d_mean)
        tail.add(it, loc)
        trace.objective.append(g.value)
        trace.inner_objective.append(inner)
    trace.u = u
    return EcsLocationParams(tail.value(), alpha), trace
