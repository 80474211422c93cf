import math

import numpy as np
import pytest

from lorma.analysis import (
    METRIC_NAMES,
    compare_updates,
    flattened_cosine,
    frobenius_distance,
    principal_angle_theta1,
    random_baseline,
    report_rows,
    top_r_eigen_ssd,
    top_r_singular_ssd,
)
from lorma.exceptions import RankDeficiencyError, ShapeError, UndefinedMetricError

from .oracles import frobenius_by_sum, jacobi_symmetric_eigenvalues


def test_frobenius_examples(rng):
    m = rng.standard_normal((3, 4))
    assert frobenius_distance(m, m) == 0.0
    assert frobenius_distance(np.zeros((2, 2)), np.eye(2)) == pytest.approx(math.sqrt(2))
    other = rng.standard_normal((3, 4))
    assert frobenius_distance(m, other) == pytest.approx(frobenius_by_sum(m, other), rel=1e-12)


def test_frobenius_shape_mismatch():
    with pytest.raises(ShapeError):
        frobenius_distance(np.ones((2, 2)), np.ones((2, 3)))


def test_frobenius_triangle_inequality(rng):
    for _ in range(50):
        a, b, c = rng.standard_normal((3, 5, 5))
        assert frobenius_distance(a, c) <= frobenius_distance(a, b) + frobenius_distance(b, c) + 1e-12


def test_cosine_examples(rng):
    m = rng.standard_normal((4, 4))
    assert flattened_cosine(m, m) == pytest.approx(1.0)
    assert flattened_cosine(m, -m) == pytest.approx(-1.0)
    e11 = np.zeros((2, 2))
    e11[0, 0] = 1
    e22 = np.zeros((2, 2))
    e22[1, 1] = 1
    assert flattened_cosine(e11, e22) == 0.0


def test_cosine_scale_invariance(rng):
    m1, m2 = rng.standard_normal((2, 5, 3))
    for c in (1e-3, 0.5, 7.0):
        assert flattened_cosine(c * m1, m2) == pytest.approx(flattened_cosine(m1, m2), rel=1e-12)


def test_cosine_zero_matrix():
    with pytest.raises(UndefinedMetricError):
        flattened_cosine(np.zeros((2, 2)), np.eye(2))


def test_singular_ssd_examples(rng):
    m = rng.standard_normal((5, 5))
    assert top_r_singular_ssd(m, m, 3) == 0.0
    assert top_r_singular_ssd(np.diag([3.0, 1.0]), np.diag([2.0, 1.0]), 1) == pytest.approx(1.0)
    a, b = rng.standard_normal((2, 8, 8))
    s1 = np.linalg.svd(a, compute_uv=False)
    s2 = np.linalg.svd(b, compute_uv=False)
    assert top_r_singular_ssd(a, b, 4) == pytest.approx(np.sum((s1[:4] - s2[:4]) ** 2), abs=1e-10)


def test_singular_ssd_r_range():
    with pytest.raises(ValueError):
        top_r_singular_ssd(np.eye(3), np.eye(3), 4)
    with pytest.raises(ValueError):
        top_r_singular_ssd(np.eye(3), np.eye(3), 0)


def test_eigen_ssd_examples(rng):
    m = rng.standard_normal((5, 5))
    assert top_r_eigen_ssd(m, m, 5) == 0.0
    assert top_r_eigen_ssd(np.diag([4.0, 1.0]), np.diag([2.0, 1.0]), 1) == pytest.approx(4.0)


def test_eigen_ssd_vs_symmetric_oracle(rng):
    a, b = rng.standard_normal((2, 6, 6))
    a, b = a + a.T, b + b.T
    ea = np.abs(jacobi_symmetric_eigenvalues(a))
    eb = np.abs(jacobi_symmetric_eigenvalues(b))
    assert top_r_eigen_ssd(a, b, 3) == pytest.approx(np.sum((ea[:3] - eb[:3]) ** 2), abs=1e-8)


def test_eigen_ssd_rejects_non_square():
    with pytest.raises(ShapeError):
        top_r_eigen_ssd(np.ones((2, 3)), np.ones((2, 3)), 1)


def test_metrics_symmetric(rng):
    a, b = rng.standard_normal((2, 6, 6))
    assert frobenius_distance(a, b) == frobenius_distance(b, a)
    assert top_r_singular_ssd(a, b, 3) == pytest.approx(top_r_singular_ssd(b, a, 3))
    assert top_r_eigen_ssd(a, b, 3) == pytest.approx(top_r_eigen_ssd(b, a, 3))
    assert principal_angle_theta1(a, b, 2) == pytest.approx(principal_angle_theta1(b, a, 2), abs=1e-12)


def test_theta1_examples(rng):
    m = rng.standard_normal((5, 3))
    assert principal_angle_theta1(m, m, 2) == pytest.approx(0.0, abs=1e-7)
    e1 = np.array([[1.0], [0.0], [0.0]])
    e2 = np.array([[0.0], [1.0], [0.0]])
    diag = np.array([[1.0], [1.0], [0.0]]) / math.sqrt(2)
    assert principal_angle_theta1(e1, e2, 1) == pytest.approx(math.pi / 2)
    assert principal_angle_theta1(e1, diag, 1) == pytest.approx(math.pi / 4)


def test_theta1_scale_invariant(rng):
    a, b = rng.standard_normal((2, 6, 4))
    base = principal_angle_theta1(a, b, 2)
    assert principal_angle_theta1(3.0 * a, 0.2 * b, 2) == pytest.approx(base, abs=1e-10)


def test_theta1_rank_error():
    with pytest.raises(RankDeficiencyError):
        principal_angle_theta1(np.outer([1.0, 2, 3], [1.0, 1]), np.eye(3)[:, :2], 2)


def test_compare_identical():
    dw = np.random.default_rng(0).standard_normal((6, 6))
    rep = compare_updates(dw, dw, 3)
    assert rep.frobenius == 0.0
    assert rep.cosine == pytest.approx(1.0)
    assert rep.sv_ssd_r == 0.0 and rep.eig_ssd_r == 0.0
    assert rep.theta1 == pytest.approx(0.0, abs=1e-7)
    assert rep.r_used == 3
    assert rep.random_baseline.frobenius > 0


def test_compare_rectangular_skips_eigen():
    gen = np.random.default_rng(1)
    rep = compare_updates(gen.standard_normal((6, 4)), gen.standard_normal((6, 4)), 2)
    assert rep.eig_ssd_r is None
    assert 0.0 <= rep.theta1 <= math.pi / 2


def test_compare_caps_subspace_dimension_at_rank():
    gen = np.random.default_rng(2)
    low = np.outer(gen.standard_normal(6), gen.standard_normal(6))
    rep = compare_updates(low, gen.standard_normal((6, 6)), 4)
    assert rep.r_used == 1


def test_random_baseline_norm_matched():
    ref = np.random.default_rng(3).standard_normal((5, 7))
    base = random_baseline(ref, seed=4)
    assert np.linalg.norm(base) == pytest.approx(np.linalg.norm(ref))
    np.testing.assert_array_equal(base, random_baseline(ref, seed=4))


def test_report_rows_layout():
    gen = np.random.default_rng(5)
    rows = report_rows(compare_updates(gen.standard_normal((4, 4)), gen.standard_normal((4, 4)), 2))
    assert [r[0] for r in rows] == [*METRIC_NAMES, "r_used"]
    assert all(len(r) == 3 for r in rows)
