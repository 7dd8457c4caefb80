import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_mat_pow, random_spd, taylor_expm
from dwellcert import linalg
from dwellcert.errors import InvalidInput, NotPositiveDefinite


class TestSymEig:
    def test_identity(self):
        w, q = linalg.sym_eig(np.eye(3))
        assert np.allclose(w, [1, 1, 1])
        assert np.max(np.abs(q.T @ q - np.eye(3))) <= 1e-10

    def test_diagonal(self):
        w, _ = linalg.sym_eig(np.diag([-2.0, 5.0]))
        assert np.allclose(w, [-2, 5])

    def test_offdiagonal_pair(self):
        # characteristic polynomial lambda^2 - 1 by hand
        w, _ = linalg.sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(w, [-1, 1], atol=1e-12)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInput):
            linalg.sym_eig(np.array([[np.nan, 0], [0, 1.0]]))

    def test_reconstruction_500_seeded(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            dim = int(rng.integers(1, 9))
            s = linalg.symmetrize(rng.standard_normal((dim, dim)) * 10 ** rng.uniform(-1, 1))
            w, q = linalg.sym_eig(s)
            tol = 1e-9 * (1 + linalg.max_abs(s))
            assert np.max(np.abs(q @ np.diag(w) @ q.T - s)) <= tol
            assert np.max(np.abs(q.T @ q - np.eye(dim))) <= 1e-10
            assert np.max(np.abs(s @ q - q @ np.diag(w))) <= tol
            assert np.all(np.diff(w) >= -1e-14)


class TestMinEig:
    def test_identity(self):
        assert linalg.min_eig(np.eye(2)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert linalg.min_eig(np.diag([-3.0, 7.0])) == pytest.approx(-3.0)

    def test_two_by_two(self):
        # eigenvalues 1 and 3 by hand
        assert linalg.min_eig(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(1.0)


class TestSpectralRadius:
    def test_identity(self):
        assert linalg.spectral_radius(np.eye(4)) == pytest.approx(1.0)

    def test_complex_pair(self):
        # lambda^2 + 0.25 = 0, |lambda| = 0.5
        a = np.array([[0.0, 1.0], [-0.25, 0.0]])
        assert linalg.spectral_radius(a) == pytest.approx(0.5, abs=1e-8)

    def test_dwell5_product_unstable(self, ex1):
        a1, a2 = ex1.modes[0].A, ex1.modes[1].A
        product = naive_mat_pow(a1, 5) @ naive_mat_pow(a2, 5)
        assert linalg.spectral_radius(product) > 1.0

    def test_transpose_symmetry_seeded(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            dim = int(rng.integers(1, 9))
            a = rng.standard_normal((dim, dim))
            assert linalg.spectral_radius(a) == pytest.approx(
                linalg.spectral_radius(a.T), abs=1e-8
            )

    def test_rejects_rectangular(self):
        with pytest.raises(InvalidInput):
            linalg.spectral_radius(np.ones((2, 3)))


class TestMatPow:
    def test_zeroth_power_is_identity(self):
        a = np.array([[2.0, 1.0], [0.0, 3.0]])
        assert np.array_equal(linalg.mat_pow(a, 0), np.eye(2))

    def test_diagonal_cubes(self):
        assert np.allclose(linalg.mat_pow(np.diag([2.0, 3.0]), 3), np.diag([8.0, 27.0]))

    def test_matches_sequential_multiplication(self, ex1):
        a2 = ex1.modes[1].A
        assert np.max(np.abs(linalg.mat_pow(a2, 5) - naive_mat_pow(a2, 5))) <= 1e-12

    def test_negative_power_rejected(self):
        with pytest.raises(InvalidInput):
            linalg.mat_pow(np.eye(2), -1)

    @given(st.integers(0, 16), st.integers(0, 16), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_power_composition(self, j, k, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 7))
        a = rng.uniform(-1.0, 1.0, (dim, dim))
        left = linalg.mat_pow(a, j + k)
        right = linalg.mat_pow(a, j) @ linalg.mat_pow(a, k)
        scale = max(linalg.max_abs(left), 1.0)
        assert np.max(np.abs(left - right)) <= 1e-10 * scale


class TestExpm:
    def test_zero_matrix(self):
        assert np.array_equal(linalg.expm(np.zeros((2, 2))), np.eye(2))

    def test_diagonal(self):
        out = linalg.expm(np.diag([math.log(2.0), 0.0]))
        assert np.allclose(out, np.diag([2.0, 1.0]), rtol=1e-12)

    def test_half_step_against_taylor_oracle(self):
        b1 = np.array([[0.0, 1.0], [-10.0, -1.0]])
        ours = linalg.expm(b1 * 0.5)
        oracle = taylor_expm(b1 * 0.5)
        assert np.max(np.abs(ours - oracle)) <= 1e-10 * linalg.max_abs(oracle)

    def test_random_against_taylor_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            dim = int(rng.integers(1, 7))
            a = rng.uniform(-1, 1, (dim, dim)) * rng.uniform(0.1, 3.0)
            ours = linalg.expm(a)
            oracle = taylor_expm(a)
            assert np.max(np.abs(ours - oracle)) <= 1e-10 * (1 + linalg.max_abs(oracle))

    def test_inverse_identity_seeded(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            dim = int(rng.integers(1, 6))
            a = rng.uniform(-5, 5, (dim, dim)) * rng.uniform(0.01, 1.0)
            product = linalg.expm(a) @ linalg.expm(-a)
            assert np.max(np.abs(product - np.eye(dim))) <= 1e-8


class TestSolveSpd:
    def test_identity(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.allclose(linalg.solve_spd(np.eye(2), b), b)

    def test_diagonal(self):
        out = linalg.solve_spd(np.diag([2.0, 4.0]), np.eye(2))
        assert np.allclose(out, np.diag([0.5, 0.25]))

    def test_residual_on_random_spd(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            s = random_spd(rng, 5)
            b = rng.standard_normal((5, 3))
            x = linalg.solve_spd(s, b)
            assert np.max(np.abs(s @ x - b)) <= 1e-9 * (1 + linalg.max_abs(b))

    def test_vector_rhs(self):
        rng = np.random.default_rng(29)
        s = random_spd(rng, 4)
        b = rng.standard_normal(4)
        x = linalg.solve_spd(s, b)
        assert x.shape == (4,)
        assert np.max(np.abs(s @ x - b)) <= 1e-9 * (1 + linalg.max_abs(b))

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.solve_spd(np.diag([1.0, -1.0]), np.eye(2))
