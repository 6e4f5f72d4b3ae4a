"""Complex Hermitian linear algebra and the real symmetric embedding.

The conic solver in this package is purely real-valued.  Hermitian
matrices are mapped onto real symmetric ones through the standard
embedding

    A = X + iY  ->  [[X, -Y],
                     [Y,  X]]

which doubles every eigenvalue's multiplicity and preserves positive
semidefiniteness, so PSD tests and projections can be carried out on the
embedding.  All matrices here are small and dense (a few dozen rows at
most); there is deliberately no sparse path.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "HermitianMatrix",
    "RealSymmetricMatrix",
    "embed",
    "embed_array",
    "unembed_array",
    "project_psd",
    "min_eigenvalue",
]


def _hermitian_part(a):
    """Average a square complex array with its conjugate transpose."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.conj().T)


def _canonical_hermitian(a):
    """Rebuild ``a`` from its upper triangle so conjugate symmetry is exact.

    The lower triangle is written as the conjugate of the upper one and the
    diagonal imaginary part is dropped, so ``entry(i, j) == conj(entry(j, i))``
    holds bit-for-bit rather than up to rounding.
    """
    upper = np.triu(a, k=1)
    diag = np.diag(a.real.diagonal())
    full = upper + upper.conj().T + diag
    full.flags.writeable = False
    return full


class HermitianMatrix:
    """Immutable complex Hermitian matrix with exact conjugate symmetry.

    Construction symmetrizes the input (averaging with its conjugate
    transpose) and then canonicalizes storage from the upper triangle, so
    the Hermitian invariants cannot drift under arithmetic.

    Parameters
    ----------
    data : array_like
        Square complex matrix.  Mild asymmetry from rounding is absorbed
        by the symmetrization; pass ``symmetrize=False`` to require the
        input to be Hermitian up to ``atol`` instead.
    symmetrize : bool
        When False, raise if the input deviates from Hermitian by more
        than ``atol`` (entrywise) instead of silently averaging.
    """

    __slots__ = ("_a",)

    def __init__(self, data, symmetrize=True, atol=1e-9):
        a = np.asarray(data, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not symmetrize:
            dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
            if dev > atol:
                raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
        self._a = _canonical_hermitian(_hermitian_part(a))

    @property
    def dim(self):
        return self._a.shape[0]

    @property
    def array(self):
        """Read-only dense complex array."""
        return self._a

    def entry(self, i, j):
        return self._a[i, j]

    def trace(self):
        """Trace as a real number (the imaginary part is exactly zero)."""
        return float(self._a.diagonal().real.sum())

    def __add__(self, other):
        if isinstance(other, HermitianMatrix):
            return HermitianMatrix(self._a + other._a)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, HermitianMatrix):
            return HermitianMatrix(self._a - other._a)
        return NotImplemented

    def __mul__(self, scalar):
        return HermitianMatrix(float(scalar) * self._a)

    __rmul__ = __mul__

    def __repr__(self):
        return f"HermitianMatrix(dim={self.dim})"


class RealSymmetricMatrix:
    """Immutable real symmetric matrix (solver-internal representation)."""

    __slots__ = ("_a",)

    def __init__(self, data):
        a = np.asarray(data, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        sym = 0.5 * (a + a.T)
        sym.flags.writeable = False
        self._a = sym

    @property
    def dim(self):
        return self._a.shape[0]

    @property
    def array(self):
        return self._a

    def entry(self, i, j):
        return self._a[i, j]

    def __repr__(self):
        return f"RealSymmetricMatrix(dim={self.dim})"


def embed_array(a):
    """Real symmetric embedding of a complex array: [[X, -Y], [Y, X]].

    Works on plain ndarrays and accepts rectangular input (used for
    congruence factors); for Hermitian input the result is symmetric.
    """
    a = np.asarray(a, dtype=complex)
    x, y = a.real, a.imag
    return np.block([[x, -y], [y, x]])


def unembed_array(s):
    """Inverse of :func:`embed_array` on (possibly unstructured) input.

    Given a real ``2n x 2n`` matrix ``[[S11, S12], [S21, S22]]``, returns
    the complex matrix ``(S11 + S22)/2 + i (S21 - S12)/2``.  This is the
    orthogonal projection onto the embedding subspace followed by
    un-embedding, so it is exact on structured input and maps PSD
    matrices to Hermitian PSD matrices in general.
    """
    s = np.asarray(s, dtype=float)
    n2 = s.shape[0]
    if s.ndim != 2 or s.shape[1] != n2 or n2 % 2:
        raise ValueError(f"expected a square even-dimension matrix, got {s.shape}")
    n = n2 // 2
    s11, s12 = s[:n, :n], s[:n, n:]
    s21, s22 = s[n:, :n], s[n:, n:]
    return 0.5 * (s11 + s22) + 0.5j * (s21 - s12)


def embed(a):
    """Embed a :class:`HermitianMatrix` as a :class:`RealSymmetricMatrix`.

    The output has dimension ``2 * a.dim``, twice the trace of ``a``, and
    each eigenvalue of ``a`` with doubled multiplicity; in particular
    ``a`` is PSD iff the embedding is.
    """
    return RealSymmetricMatrix(embed_array(a.array))


def min_eigenvalue(a):
    """Smallest eigenvalue of a Hermitian matrix.

    Computed with a dense symmetric eigensolver on the real embedding.
    """
    emb = embed_array(a.array) if isinstance(a, HermitianMatrix) else np.asarray(a)
    return float(np.linalg.eigvalsh(emb)[0])


def project_psd(a):
    """Frobenius-norm projection of a Hermitian matrix onto the PSD cone.

    Eigendecomposes the real embedding, clips negative eigenvalues to
    zero, and un-embeds the reconstruction.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the eigendecomposition fails to converge.
    """
    emb = embed_array(a.array)
    w, v = np.linalg.eigh(emb)
    w_clipped = np.clip(w, 0.0, None)
    proj = (v * w_clipped) @ v.T
    return HermitianMatrix(unembed_array(proj))
