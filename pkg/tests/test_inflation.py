import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lorma.exceptions import ShapeError
from lorma.inflation import InflationKind, deflate_pi, inflate, inflate_pi, inflate_plus
from lorma.linalg import numerical_rank

from .oracles import exact_rank

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
square = st.integers(1, 12).flatmap(
    lambda d: arrays(np.float64, (d, d), elements=finite)
)


def test_pi_column_becomes_diagonal():
    m = np.array([[1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]])
    np.testing.assert_array_equal(inflate_pi(m), np.diag([1.0, 2.0, 3.0]))


def test_pi_rotation_direction():
    m = np.arange(9.0).reshape(3, 3)
    expected = np.array([[0.0, 1, 2], [5, 3, 4], [7, 8, 6]])
    np.testing.assert_array_equal(inflate_pi(m), expected)


def test_pi_lifts_rank_one_to_full():
    m = np.outer(np.arange(1.0, 5.0), [1.0, 0, 0, 0])
    assert exact_rank(m) == 1
    assert exact_rank(inflate_pi(m)) == 4


def test_pi_identity_size_one():
    np.testing.assert_array_equal(inflate_pi(np.array([[7.0]])), [[7.0]])


def test_pi_rejects_non_square():
    with pytest.raises(ShapeError):
        inflate_pi(np.ones((2, 3)))


@settings(max_examples=100, deadline=None)
@given(square)
def test_pi_bitwise_inverse(m):
    np.testing.assert_array_equal(deflate_pi(inflate_pi(m)), m)
    np.testing.assert_array_equal(inflate_pi(deflate_pi(m)), m)


@settings(max_examples=100, deadline=None)
@given(square)
def test_pi_preserves_frobenius_norm(m):
    assert np.sum(inflate_pi(m) ** 2) == pytest.approx(np.sum(m**2), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_pi_adjoint_law(d, seed):
    gen = np.random.default_rng(seed)
    m, g = gen.standard_normal((2, d, d))
    lhs = np.sum(inflate_pi(m) * g)
    rhs = np.sum(m * deflate_pi(g))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_pi_linearity(rng):
    m1, m2 = rng.standard_normal((2, 6, 6))
    a, b = 1.7, -0.3
    np.testing.assert_allclose(inflate_pi(a * m1 + b * m2), a * inflate_pi(m1) + b * inflate_pi(m2),
                               atol=1e-14)


def test_plus_on_zero_is_identity():
    np.testing.assert_array_equal(inflate_plus(np.zeros((4, 4)), 3.0), np.eye(4))


def test_plus_rank_lower_bound(rng):
    for _ in range(100):
        d = int(rng.integers(2, 13))
        r = int(rng.integers(1, d + 1))
        ba = rng.standard_normal((d, r)) @ rng.standard_normal((r, d))
        assert numerical_rank(inflate_plus(ba, float(rng.uniform(0.1, 3)))) >= d - r


def test_plus_can_be_singular():
    # -e1 e1^T with s=1 cancels the first diagonal entry: rank d-1 exactly
    ba = np.zeros((3, 3))
    ba[0, 0] = -1.0
    assert exact_rank(inflate_plus(ba, 1.0)) == 2


def test_plus_rejects_nonfinite_scale():
    with pytest.raises(ValueError):
        inflate_plus(np.zeros((2, 2)), float("inf"))


def test_inflate_dispatch(rng):
    m = rng.standard_normal((5, 5))
    np.testing.assert_array_equal(inflate(m, "none", 2.0), 2.0 * m)
    np.testing.assert_array_equal(inflate(m, InflationKind.PERMUTATION, 2.0), inflate_pi(2.0 * m))
    np.testing.assert_array_equal(inflate(m, "additive", 2.0), inflate_plus(m, 2.0))
    with pytest.raises(ValueError):
        inflate(m, "bogus")
