import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prw.exceptions import DegenerateStepError, InvalidInputError
from prw.stiefel import (
    is_stiefel,
    orthonormality_error,
    qr_positive,
    qr_retract,
    sample_uniform_stiefel,
    sphere_tiebreak,
    tangency_error,
    tangent_project,
)

frames = st.tuples(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31)).filter(lambda t: t[1] <= t[0])


@settings(max_examples=60, deadline=None)
@given(frames)
def test_tangent_projection_properties(args):
    d, k, seed = args
    rng = np.random.default_rng(seed)
    Z = sample_uniform_stiefel(d, k, rng)
    G = rng.standard_normal((d, k))
    xi = tangent_project(Z, G)
    assert tangency_error(Z, xi) <= 1e-10
    assert np.linalg.norm(tangent_project(Z, xi) - xi) <= 1e-12
    # the projection is orthogonal: the removed part is normal to every tangent vector
    H = tangent_project(Z, rng.standard_normal((d, k)))
    assert abs(np.sum((G - xi) * H)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(frames)
def test_retraction_stays_on_manifold(args):
    d, k, seed = args
    rng = np.random.default_rng(seed)
    Z = sample_uniform_stiefel(d, k, rng)
    xi = tangent_project(Z, rng.standard_normal((d, k)))
    assert is_stiefel(qr_retract(Z, xi))
    assert np.array_equal(qr_retract(Z, np.zeros((d, k))), Z)


def test_retraction_is_first_order():
    rng = np.random.default_rng(0)
    Z = sample_uniform_stiefel(6, 3, rng)
    xi = tangent_project(Z, rng.standard_normal((6, 3)))
    ratios = [np.linalg.norm(qr_retract(Z, t * xi) - Z - t * xi) / t for t in (1e-2, 1e-3, 1e-4)]
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 1e-3


def test_retraction_of_frame_is_fixed_by_sign_convention():
    # QR of an orthonormal frame with positive diagonal returns the frame itself
    Z = sample_uniform_stiefel(5, 2, 1)
    assert np.allclose(qr_positive(Z)[0], Z, atol=1e-14)


def test_qr_positive_diagonal():
    A = np.random.default_rng(2).standard_normal((7, 4))
    Q, R = qr_positive(A)
    assert np.all(np.diag(R) >= 0)
    assert np.allclose(Q @ R, A)


def test_degenerate_step_raises():
    Z = np.array([[1.0], [0.0]])
    with pytest.raises(DegenerateStepError):
        qr_retract(Z, np.array([[-1.0], [0.0]]))


def test_shape_errors():
    with pytest.raises(InvalidInputError):
        tangent_project(np.eye(3)[:, :2], np.zeros((3, 1)))
    with pytest.raises(InvalidInputError):
        sample_uniform_stiefel(2, 3, 0)


def test_haar_mean_projector():
    d, k = 5, 2
    acc = np.zeros((d, d))
    rng = np.random.default_rng(3)
    for _ in range(10000):
        U = sample_uniform_stiefel(d, k, rng)
        acc += U @ U.T
    assert np.max(np.abs(acc / 10000 - k / d * np.eye(d))) < 0.05


def test_haar_first_coordinate_law():
    # for d = 3 the first coordinate of a uniform unit vector is uniform on [-1, 1]
    rng = np.random.default_rng(4)
    x = np.array([sample_uniform_stiefel(3, 1, rng)[0, 0] for _ in range(20000)])
    assert abs(x.var() - 1 / 3) < 0.01
    assert abs(np.mean(np.abs(x)) - 0.5) < 0.01


def test_orthonormality_error_detects_bad_frames():
    assert orthonormality_error(np.eye(3)) == 0.0
    assert not is_stiefel(np.ones((3, 1)))


def test_sphere_tiebreak():
    assert np.array_equal(sphere_tiebreak(np.array([0.0, -1.0])), [0.0, 1.0])
    assert np.array_equal(sphere_tiebreak(np.array([0.6, -0.8])), [0.6, -0.8])
