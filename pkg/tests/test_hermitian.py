import numpy as np
import pytest

from rgsbeam.hermitian import (
    HermitianMatrix,
    RealSymmetricMatrix,
    embed,
    embed_array,
    min_eigenvalue,
    project_psd,
    unembed_array,
)


def random_hermitian(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return HermitianMatrix(scale * (m + m.conj().T) / 2)


class TestHermitianStorage:
    def test_exact_conjugate_symmetry(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        h = HermitianMatrix(m)
        a = h.array
        # exact, not approximate: lower triangle is rebuilt from the upper one
        assert np.array_equal(a, a.conj().T)
        assert np.all(a.diagonal().imag == 0.0)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            HermitianMatrix(np.zeros((2, 3)))

    def test_strict_mode_rejects_asymmetric(self):
        m = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            HermitianMatrix(m, symmetrize=False)
        # Hermitian input passes strict mode
        HermitianMatrix(np.array([[1.0, 1j], [-1j, 2.0]]), symmetrize=False)

    def test_array_is_read_only(self):
        h = HermitianMatrix(np.eye(2))
        with pytest.raises(ValueError):
            h.array[0, 0] = 5.0

    def test_trace_real(self):
        h = HermitianMatrix(np.array([[1.0, 1j], [-1j, 2.0]]))
        assert h.trace() == pytest.approx(3.0)


class TestEmbed:
    def test_identity(self):
        # 2x2 identity embeds to the 4x4 identity
        e = embed(HermitianMatrix(np.eye(2)))
        assert isinstance(e, RealSymmetricMatrix)
        assert np.array_equal(e.array, np.eye(4))

    def test_trace_doubles(self):
        h = HermitianMatrix(np.diag([1.0, 2.0]) + 0j)  # trace 3
        assert np.trace(embed(h).array) == pytest.approx(6.0)

    def test_pauli_like_spectrum(self):
        # A = [[0, i], [-i, 0]] has eigenvalues +-1; the embedding has
        # {1, 1, -1, -1}, frozen here from a dense eigendecomposition.
        a = HermitianMatrix(np.array([[0.0, 1j], [-1j, 0.0]]))
        w = np.linalg.eigvalsh(embed(a).array)
        assert np.allclose(np.sort(w), [-1.0, -1.0, 1.0, 1.0], atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(1)
        a = random_hermitian(rng, 4)
        b = random_hermitian(rng, 4)
        alpha, beta = 0.7, -2.5
        lhs = embed_array((alpha * a + beta * b).array)
        rhs = alpha * embed(a).array + beta * embed(b).array
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_eigenvalues_doubled(self):
        rng = np.random.default_rng(2)
        for n in (2, 3, 5, 6):
            a = random_hermitian(rng, n)
            w_c = np.linalg.eigvalsh(a.array)
            w_e = np.linalg.eigvalsh(embed(a).array)
            assert np.allclose(np.sort(np.repeat(w_c, 2)), np.sort(w_e), atol=1e-10)

    def test_unembed_roundtrip(self):
        rng = np.random.default_rng(3)
        a = random_hermitian(rng, 5)
        back = unembed_array(embed_array(a.array))
        assert np.allclose(back, a.array, atol=1e-14)

    def test_unembed_projects_unstructured(self):
        # On an arbitrary symmetric matrix, unembed + embed acts as the
        # orthogonal projection onto the embedding subspace.
        rng = np.random.default_rng(4)
        s = rng.standard_normal((6, 6))
        s = (s + s.T) / 2
        a = unembed_array(s)
        p = embed_array(a)
        # projection: embed(unembed(s)) is the closest structured matrix,
        # so re-projecting changes nothing
        assert np.allclose(embed_array(unembed_array(p)), p, atol=1e-14)
        # and the residual is orthogonal to the structured part
        assert abs(np.tensordot(s - p, p)) < 1e-10


class TestProjectPsd:
    def test_psd_fixed_point(self):
        rng = np.random.default_rng(5)
        a = random_hermitian(rng, 4)
        psd = project_psd(a)
        again = project_psd(psd)
        assert np.linalg.norm(again.array - psd.array) < 1e-12

    def test_diagonal_clipping(self):
        a = HermitianMatrix(np.diag([1.0, -2.0]) + 0j)
        p = project_psd(a)
        assert np.allclose(p.array, np.diag([1.0, 0.0]), atol=1e-12)

    def test_matches_clip_reconstruct_oracle(self):
        # independent oracle: complex eigendecomposition, clip, reconstruct
        rng = np.random.default_rng(6)
        for n in (2, 3, 4, 6):
            a = random_hermitian(rng, n, scale=3.0)
            w, v = np.linalg.eigh(a.array)
            oracle = (v * np.clip(w, 0, None)) @ v.conj().T
            p = project_psd(a)
            assert np.linalg.norm(p.array - oracle) < 1e-10

    def test_projection_lands_in_cone(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = random_hermitian(rng, 5, scale=2.0)
            assert min_eigenvalue(project_psd(a)) >= -1e-12


class TestMinEigenvalue:
    def test_identity(self):
        assert min_eigenvalue(HermitianMatrix(np.eye(3))) == pytest.approx(1.0)

    def test_diagonal(self):
        a = HermitianMatrix(np.diag([3.0, -5.0]) + 0j)
        assert min_eigenvalue(a) == pytest.approx(-5.0)

    def test_matches_full_spectrum_oracle(self):
        rng = np.random.default_rng(8)
        for n in (2, 4, 6, 8):
            a = random_hermitian(rng, n, scale=4.0)
            oracle = float(np.linalg.eigvalsh(a.array)[0])
            spectral = float(np.max(np.abs(np.linalg.eigvalsh(a.array))))
            assert abs(min_eigenvalue(a) - oracle) <= 1e-10 * max(1.0, spectral)
