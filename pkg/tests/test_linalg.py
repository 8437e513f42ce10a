import numpy as np
import pytest

from sparse_observer import linalg


def kron_lyapunov(a, w):
    """Independent Kronecker-vectorization oracle for a P + P a' + w = 0."""
    n = a.shape[0]
    K = np.kron(np.eye(n), a) + np.kron(a, np.eye(n))
    p = np.linalg.solve(K, -w.flatten(order="F"))
    return p.reshape((n, n), order="F")


class TestSymEig:
    def test_identity(self):
        w, V = linalg.sym_eig(np.eye(3))
        assert np.allclose(w, np.ones(3))
        assert np.allclose(V @ V.T, np.eye(3), atol=1e-12)

    def test_diagonal_sorted_ascending(self):
        w, V = linalg.sym_eig(np.diag([2.0, -1.0]))
        assert np.allclose(w, [-1.0, 2.0])

    def test_random_symmetric_reconstruction(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((6, 6))
        m = m + m.T
        w, V = linalg.sym_eig(m)
        scale = np.linalg.norm(m)
        assert np.linalg.norm(V @ np.diag(w) @ V.T - m) <= 1e-9 * scale
        assert np.linalg.norm(m @ V - V @ np.diag(w)) <= 1e-9 * scale
        assert np.linalg.norm(V @ V.T - np.eye(6)) <= 1e-9

    def test_matches_characteristic_polynomial(self):
        # 2x2: eigenvalues of [[a,b],[b,c]] solve t^2 - (a+c)t + (ac-b^2)
        m = np.array([[3.0, 1.0], [1.0, -2.0]])
        roots = np.sort(np.roots([1.0, -np.trace(m), np.linalg.det(m)]))
        w, _ = linalg.sym_eig(m)
        assert np.allclose(w, roots, atol=1e-9)
        m3 = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])
        coeffs = np.poly(m3)
        roots3 = np.sort(np.roots(coeffs).real)
        w3, _ = linalg.sym_eig(m3)
        assert np.allclose(w3, roots3, atol=1e-9)

    def test_repeated_eigenvalues(self):
        m = np.diag([2.0, 2.0, 5.0])
        w, V = linalg.sym_eig(m)
        assert np.allclose(w, [2.0, 2.0, 5.0])
        assert np.allclose(V @ np.diag(w) @ V.T, m, atol=1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            linalg.sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            linalg.sym_eig(np.ones((2, 3)))


class TestCholesky:
    def test_identity(self):
        L = linalg.cholesky(np.eye(3))
        assert np.allclose(L, np.eye(3))

    def test_hand_checked_factor(self):
        # [[2,0],[1,sqrt 2]] @ its transpose = [[4,2],[2,3]]
        m = np.array([[4.0, 2.0], [2.0, 3.0]])
        L = linalg.cholesky(m)
        expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
        assert np.allclose(L, expected, atol=1e-12)
        assert np.linalg.norm(L @ L.T - m) <= 1e-10 * np.linalg.norm(m)

    def test_indefinite_verdict(self):
        assert linalg.cholesky(np.array([[1.0, 2.0], [2.0, 1.0]])) is None
        assert not linalg.is_positive_definite(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_leading_minors_positive_when_successful(self):
        rng = np.random.default_rng(11)
        for n in (2, 3, 4):
            for _ in range(5):
                b = rng.standard_normal((n, n))
                m = b @ b.T + n * np.eye(n)
                assert linalg.cholesky(m) is not None
                for k in range(1, n + 1):
                    assert np.linalg.det(m[:k, :k]) > 0


class TestSolveLyapunov:
    def test_scalar_balance(self):
        p = linalg.solve_lyapunov(-0.5 * np.eye(2), np.eye(2))
        assert np.allclose(p, np.eye(2), atol=1e-12)

    def test_scalar_half(self):
        p = linalg.solve_lyapunov(np.array([[-1.0]]), np.array([[1.0]]))
        assert np.allclose(p, [[0.5]], atol=1e-14)

    def test_random_stable_vs_kronecker_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.standard_normal((5, 5))
            a = a - (np.max(np.linalg.eigvals(a).real) + 0.5) * np.eye(5)
            b = rng.standard_normal((5, 5))
            w = b @ b.T
            p = linalg.solve_lyapunov(a, w)
            expected = kron_lyapunov(a, w)
            assert np.allclose(p, expected, atol=1e-8 * np.linalg.norm(expected))
            res = np.linalg.norm(a @ p + p @ a.T + w)
            bound = 1e-8 * (np.linalg.norm(a) * np.linalg.norm(p)
                            + np.linalg.norm(w))
            assert res <= bound

    def test_output_symmetric_psd(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((4, 4))
        a = a - (np.max(np.linalg.eigvals(a).real) + 1.0) * np.eye(4)
        b = rng.standard_normal((4, 2))
        p = linalg.solve_lyapunov(a, b @ b.T)
        assert np.linalg.norm(p - p.T) <= 1e-10
        assert np.min(np.linalg.eigvalsh(p)) >= -1e-8

    def test_unstable_rejected(self):
        with pytest.raises(linalg.UnstableMatrixError, match="unstable"):
            linalg.solve_lyapunov(np.array([[1.0]]), np.array([[1.0]]))


def test_check_matrix_rejects_nonfinite():
    with pytest.raises(ValueError, match="finite"):
        linalg.check_matrix(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_symmetrize_absorbs_roundoff():
    m = np.array([[1.0, 2.0], [2.0 + 1e-14, 1.0]])
    s = linalg.symmetrize(m)
    assert np.allclose(s, s.T)
