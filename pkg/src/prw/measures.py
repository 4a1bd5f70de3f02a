"""Discrete measures and the random samplers used by the experiments.

Every sampler takes a seed and draws from a fresh ``numpy.random.Generator``
(PCG64), so outputs are pure functions of ``(parameters, seed)``. Gaussian
variates come from numpy's ziggurat ``standard_normal``. Independent
streams for parallel trials are derived with :func:`trial_rng`, which hashes
``(master_seed, *indices)`` through ``numpy.random.SeedSequence``.
"""

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .exceptions import InvalidInputError

SeedLike = Union[int, np.random.Generator, Sequence[int], None]


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def trial_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Generator for trial ``indices`` under ``master_seed``.

    The stream depends only on the integers passed in, never on execution
    order, so a worker pool reproduces a sequential run exactly.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, indices)]))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i weights[i] * delta(atoms[i])`` in R^d."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.array(self.weights, dtype=float).ravel()
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise InvalidInputError(f"atoms must be a non-empty n x d array, got shape {atoms.shape}")
        if weights.shape[0] != atoms.shape[0]:
            raise InvalidInputError("weights and atoms disagree on n")
        if not np.all(np.isfinite(atoms)):
            raise InvalidInputError("atoms contain non-finite coordinates")
        check_simplex(weights, "weights")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def project(self, P: np.ndarray) -> "DiscreteMeasure":
        """Push-forward by ``x -> P.T @ x``."""
        P = np.asarray(P, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        return DiscreteMeasure(self.atoms @ P, self.weights)

    def translate(self, t) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms + np.asarray(t, dtype=float), self.weights)


def check_simplex(w: np.ndarray, name: str = "weights", tol: float = 1e-12) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInputError(f"{name} must be finite and nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise InvalidInputError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def make_empirical(samples) -> DiscreteMeasure:
    """Uniformly weighted empirical measure of the rows of ``samples``."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0 or X.shape[0] == 0:
        raise InvalidInputError("cannot build an empirical measure from zero samples")
    n = X.shape[0]
    return DiscreteMeasure(X.copy(), np.full(n, 1.0 / n))


def sample_hypercube(d: int, v: float, n: int, seed: SeedLike) -> np.ndarray:
    """``n`` i.i.d. draws from the uniform law on ``[-v, v]^d``."""
    if d < 1 or n < 1:
        raise InvalidInputError("d and n must be >= 1")
    if not v > 0:
        raise InvalidInputError(f"half-width v must be positive, got {v}")
    return make_rng(seed).uniform(-v, v, size=(n, d))


def mixture_centers(kind: int) -> np.ndarray:
    """Centers of the 8-, 12- (unit circle) or 25-component (5x5 grid) mixtures."""
    if kind in (8, 12):
        ang = 2.0 * np.pi * np.arange(kind) / kind
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if kind == 25:
        g = np.arange(-2.0, 3.0)
        xx, yy = np.meshgrid(g, g, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])
    raise InvalidInputError(f"mixture kind must be 8, 12 or 25, got {kind}")


@dataclass(frozen=True)
class MixtureSpec:
    centers: np.ndarray
    variance: float = 0.01
    scale: float = 2.0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[0] < 1 or c.shape[1] != 2:
            raise InvalidInputError("need at least one 2-D center")
        if not self.variance > 0:
            raise InvalidInputError("component variance must be positive")
        object.__setattr__(self, "centers", c)

    @classmethod
    def of_kind(cls, kind: int) -> "MixtureSpec":
        return cls(mixture_centers(kind))


def sample_gaussian_mixture(spec: MixtureSpec, n: int, seed: SeedLike) -> np.ndarray:
    """Rows ``scale * m_J + sqrt(variance) * z`` with ``J`` uniform over the centers."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = make_rng(seed)
    J = rng.integers(0, spec.centers.shape[0], size=n)
    z = rng.standard_normal((n, 2))
    return spec.scale * spec.centers[J] + np.sqrt(spec.variance) * z


def positive_stable_scale(alpha: float) -> float:
    """Scale ``2 cos(pi alpha / 4)^(2 / alpha)`` of the subordinator for an alpha-ECS law."""
    return 2.0 * np.cos(np.pi * alpha / 4.0) ** (2.0 / alpha)


def sample_positive_stable(alpha_half: float, n: int, seed: SeedLike, scale=None) -> np.ndarray:
    """Totally skewed positive stable draws via Chambers-Mallows-Stuck.

    Returns ``S_a(beta=1, gamma, delta=0)`` with ``a = alpha_half`` in the
    type-1 (Samorodnitsky-Taqqu) parameterization, whose Laplace transform is

        E[exp(-s A)] = exp(-gamma**a * s**a / cos(pi * a / 2)),  s >= 0.

    ``scale`` defaults to ``positive_stable_scale(2 * alpha_half)``; with that
    choice the transform reduces to ``exp(-(2 s)**a)``.
    """
    a = float(alpha_half)
    if not 0.0 < a < 1.0:
        raise InvalidInputError(f"alpha_half must lie in (0, 1), got {alpha_half}")
    gamma = positive_stable_scale(2.0 * a) if scale is None else float(scale)
    rng = make_rng(seed)
    # open interval keeps V away from -pi/2 where the draw degenerates to 0
    u = rng.random(n)
    u = np.where(u == 0.0, 0.5, u)
    V = np.pi * (u - 0.5)
    W = rng.standard_exponential(n)
    B = np.pi / 2.0  # arctan(tan(pi a / 2)) / a for beta = 1
    S = (1.0 + np.tan(np.pi * a / 2.0) ** 2) ** (1.0 / (2.0 * a))
    X = (
        S
        * np.sin(a * (V + B))
        / np.cos(V) ** (1.0 / a)
        * (np.cos(V - a * (V + B)) / W) ** ((1.0 - a) / a)
    )
    return gamma * np.maximum(X, np.finfo(float).tiny)


@dataclass(frozen=True)
class EcsSpec:
    """Elliptically contoured alpha-stable law with char. fn ``exp(-(t'St)^(a/2) + i t'm)``."""

    alpha: float
    Sigma: np.ndarray
    location: np.ndarray = field(default=None)

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        if S.shape[0] != S.shape[1]:
            raise InvalidInputError("Sigma must be square")
        if not 0.0 < self.alpha < 2.0:
            raise InvalidInputError(f"alpha must lie in (0, 2), got {self.alpha}")
        if np.max(np.abs(S - S.T)) > 1e-12:
            raise InvalidInputError("Sigma must be symmetric")
        if np.min(np.linalg.eigvalsh(S)) <= 0:
            raise InvalidInputError("Sigma must be positive definite")
        m = np.zeros(S.shape[0]) if self.location is None else np.asarray(self.location, dtype=float)
        if m.shape != (S.shape[0],):
            raise InvalidInputError("location must be a d-vector")
        object.__setattr__(self, "Sigma", S)
        object.__setattr__(self, "location", m)

    @property
    def dim(self) -> int:
        return self.Sigma.shape[0]

    def characteristic_function(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(t)
        quad = np.einsum("ij,jk,ik->i", t, self.Sigma, t)
        return np.exp(-quad ** (self.alpha / 2.0) + 1j * t @ self.location)


def ecs_components(spec: EcsSpec, n: int, seed: SeedLike):
    """Draw the mixing variables ``(A, G)`` with ``Y = sqrt(A) G + m``."""
    rng = make_rng(seed)
    A = sample_positive_stable(spec.alpha / 2.0, n, rng)
    L = np.linalg.cholesky(spec.Sigma)
    G = rng.standard_normal((n, spec.dim)) @ L.T
    return A, G


def sample_ecs(spec: EcsSpec, n: int, seed: SeedLike) -> np.ndarray:
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    A, G = ecs_components(spec, n, seed)
    return np.sqrt(A)[:, None] * G + spec.location
