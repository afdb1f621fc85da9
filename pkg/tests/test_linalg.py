import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lrm.linalg import (
    LinAlgFailure,
    as_matrix,
    format_matrix,
    frobenius_norm,
    load_matrix,
    parse_matrix,
    pinv,
    rank,
    save_matrix,
    solve_spd,
    svd,
    sym_eig,
    trace,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
shapes = st.tuples(st.integers(1, 12), st.integers(1, 12))


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError, match="two-dimensional"):
        as_matrix(np.ones(3))
    with pytest.raises(ValueError, match="NaN"):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError, match="at least one"):
        as_matrix(np.ones((0, 3)))


def test_svd_identity():
    res = svd(np.eye(3))
    np.testing.assert_allclose(res.sigma, [1, 1, 1])
    assert res.rank == 3


def test_svd_zero():
    res = svd(np.zeros((2, 3)))
    assert res.rank == 0
    assert np.all(res.sigma == 0)


def test_svd_diagonal_values():
    # eigenvalues of W^T W = diag(9, 16)
    np.testing.assert_allclose(svd([[3.0, 0.0], [0.0, 4.0]]).sigma, [4.0, 3.0])


def test_svd_random_reconstruction(rng):
    for _ in range(200):
        m, n = rng.integers(1, 21, size=2)
        w = rng.standard_normal((m, n))
        res = svd(w)
        recon = res.u @ np.diag(res.sigma) @ res.v
        assert np.linalg.norm(w - recon) <= 1e-8 * np.linalg.norm(w)
        assert np.all(np.diff(res.sigma) <= 0) and np.all(res.sigma >= 0)
        assert np.max(np.abs(res.u.T @ res.u - np.eye(res.sigma.size))) < 1e-8
        assert np.max(np.abs(res.v @ res.v.T - np.eye(res.sigma.size))) < 1e-8
        assert res.rank <= min(m, n)


def test_rank_of_product_bounded(rng):
    for s in range(1, 6):
        c = rng.standard_normal((15, s))
        a = rng.standard_normal((s, 18))
        assert rank(c @ a) == s


def test_truncated_svd():
    res = svd(np.diag([5.0, 3.0, 1.0])).truncated(2)
    assert res.sigma.tolist() == [5.0, 3.0]
    assert res.u.shape == (3, 2) and res.v.shape == (2, 3) and res.rank == 2


def test_frobenius_norm_examples():
    assert frobenius_norm(np.zeros((2, 2))) == 0.0
    assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2))
    assert frobenius_norm([[1, 2], [3, 4]]) == pytest.approx(math.sqrt(30))


def test_trace_examples():
    assert trace(np.eye(4)) == 4
    assert trace([[1, 2], [3, 4]]) == 5
    assert trace(np.zeros((3, 3))) == 0
    with pytest.raises(ValueError, match="square"):
        trace(np.ones((2, 3)))


def test_trace_of_gram_matches_frobenius(rng):
    for _ in range(100):
        b = rng.standard_normal(tuple(rng.integers(1, 10, size=2)))
        assert trace(b.T @ b) == pytest.approx(frobenius_norm(b) ** 2, rel=1e-12)


def test_solve_spd_examples():
    r = np.arange(6.0).reshape(3, 2)
    np.testing.assert_allclose(solve_spd(np.eye(3), r), r)
    np.testing.assert_allclose(solve_spd(2 * np.eye(2), [[4.0], [6.0]]), [[2.0], [3.0]])
    np.testing.assert_allclose(solve_spd([[2.0, 1.0], [1.0, 2.0]], [[3.0], [3.0]]), [[1.0], [1.0]])


def test_solve_spd_residual(rng):
    for _ in range(20):
        x = rng.standard_normal((6, 6))
        a = x @ x.T + np.eye(6)
        rhs = rng.standard_normal((6, 3))
        sol = solve_spd(a, rhs)
        assert np.linalg.norm(a @ sol - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_solve_spd_rejects_indefinite():
    with pytest.raises(LinAlgFailure):
        solve_spd([[1.0, 2.0], [2.0, 1.0]], [[1.0], [1.0]])


def test_sym_eig_examples():
    vals, _ = sym_eig(np.eye(2))
    np.testing.assert_allclose(vals, [1, 1])
    vals, vecs = sym_eig(np.diag([2.0, 5.0]))
    np.testing.assert_allclose(vals, [5, 2])
    np.testing.assert_allclose(np.abs(vecs), [[0, 1], [1, 0]])
    vals, _ = sym_eig([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(vals, [3, 1])


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        sym_eig([[1.0, 2.0], [0.0, 1.0]])


def test_sym_eig_reconstruction(rng):
    for _ in range(50):
        x = rng.standard_normal((7, 7))
        m = x + x.T
        vals, vecs = sym_eig(m)
        assert np.max(np.abs((vecs * vals) @ vecs.T - m)) < 1e-8
        assert np.max(np.abs(vecs.T @ vecs - np.eye(7))) < 1e-8


def test_pinv_matches_numpy(rng):
    w = rng.standard_normal((6, 3)) @ rng.standard_normal((3, 5))
    np.testing.assert_allclose(pinv(w), np.linalg.pinv(w), atol=1e-10)
    assert np.all(pinv(np.zeros((2, 3))) == 0)


@settings(max_examples=50, deadline=None)
@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite)))
def test_matrix_text_round_trip(a):
    np.testing.assert_array_equal(parse_matrix(format_matrix(a)), a)


def test_matrix_file_round_trip(tmp_path, rng):
    a = rng.standard_normal((4, 3)) * 1e-7
    save_matrix(a, tmp_path / "a.mat")
    assert np.max(np.abs(load_matrix(tmp_path / "a.mat") - a)) <= 1e-15 * np.max(np.abs(a))


def test_parse_matrix_errors():
    with pytest.raises(ValueError, match="empty"):
        parse_matrix("")
    with pytest.raises(ValueError, match="line 3: expected 2 values"):
        parse_matrix("2 2\n1 2\n3\n")
    with pytest.raises(ValueError, match="declares 3 rows"):
        parse_matrix("3 1\n1\n2\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_matrix("1 2\n1 x\n")
