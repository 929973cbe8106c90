"""Symmetric-matrix primitives: deterministic eigendecomposition, spectral maps, CSV I/O.

Conventions used throughout the package:
  * matrices are symmetrized as (A + A')/2 on construction,
  * eigenvalues are returned in ascending order,
  * each eigenvector is scaled so its largest-magnitude entry is positive,
  * an eigenvalue counts as zero iff it is <= dim * eps * max(eigenvalue, 0).
"""

import numpy as np

from .errors import DimensionError, InputError, SingularityError


def as_matrix(a):
    """Coerce input to a float ndarray with finite entries."""
    m = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    return m


def symmetrize(a):
    """Return (A + A')/2 for a square matrix A."""
    m = as_matrix(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("expected a square matrix, got shape %s" % (m.shape,))
    if m.shape[0] < 1:
        raise DimensionError("matrix dimension must be at least 1")
    return 0.5 * (m + m.T)


class SymmetricMatrix:
    """Square real matrix stored in symmetrized form."""

    def __init__(self, values):
        if isinstance(values, SymmetricMatrix):
            self.values = values.values.copy()
        else:
            self.values = symmetrize(values)
        self.dim = self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.values.astype(dtype)
        return self.values


def as_symmetric(a):
    return a if isinstance(a, SymmetricMatrix) else SymmetricMatrix(a)


def zero_tolerance(eigenvalues):
    """Relative threshold below which an eigenvalue is treated as zero."""
    lam = np.asarray(eigenvalues, dtype=float)
    top = max(float(lam[-1]) if lam.size else 0.0, 0.0)
    return lam.size * np.finfo(float).eps * top


class SpectralDecomposition:
    """Eigensystem of a symmetric matrix with fixed ordering and sign conventions."""

    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.eigenvectors = np.asarray(eigenvectors, dtype=float)
        self.dim = self.eigenvalues.size
        self.zero_tolerance = zero_tolerance(self.eigenvalues)
        self.rank = int(np.sum(self.eigenvalues > self.zero_tolerance))

    def reconstruct(self):
        u = self.eigenvectors
        return SymmetricMatrix(u @ np.diag(self.eigenvalues) @ u.T)


def eigh(matrix):
    """Decompose a symmetric matrix, fixing eigenvector signs deterministically.

    Eigenvalues come back ascending; each eigenvector column is flipped if
    needed so that its largest-magnitude entry (first such, on ties) is positive.
    """
    sym = as_symmetric(matrix)
    lam, vec = np.linalg.eigh(sym.values)
    lead = np.argmax(np.abs(vec), axis=0)
    signs = np.sign(vec[lead, np.arange(vec.shape[1])])
    signs[signs == 0] = 1.0
    return SpectralDecomposition(lam, vec * signs)


def spectral_apply(matrix, fn):
    """Apply a scalar map to the spectrum: U diag(fn(lambda)) U'.

    `matrix` may be a SymmetricMatrix, a square array, or a SpectralDecomposition.
    Raises SingularityError if fn produces a non-finite value, naming the
    offending eigenvalue.
    """
    decomp = matrix if isinstance(matrix, SpectralDecomposition) else eigh(matrix)
    mapped = np.asarray([float(fn(v)) for v in decomp.eigenvalues])
    bad = ~np.isfinite(mapped)
    if np.any(bad):
        idx = int(np.nonzero(bad)[0][0])
        raise SingularityError(
            "spectral map undefined at eigenvalue %d (value %.6g)"
            % (idx, decomp.eigenvalues[idx])
        )
    u = decomp.eigenvectors
    return SymmetricMatrix(u @ np.diag(mapped) @ u.T)


def _guarded(matrix, fn, what):
    decomp = matrix if isinstance(matrix, SpectralDecomposition) else eigh(matrix)
    tol = decomp.zero_tolerance
    small = decomp.eigenvalues <= tol
    if np.any(small):
        idx = int(np.nonzero(small)[0][0])
        raise SingularityError(
            "%s requires a positive definite matrix; eigenvalue %d is %.6g"
            % (what, idx, decomp.eigenvalues[idx])
        )
    return spectral_apply(decomp, fn)


def spectral_inverse(matrix):
    """Inverse through the eigensystem; positive definite input required."""
    return _guarded(matrix, lambda v: 1.0 / v, "inverse")


def spectral_inv_sqrt(matrix):
    """Inverse square root through the eigensystem; positive definite input required."""
    return _guarded(matrix, lambda v: v ** -0.5, "inverse square root")


def spectral_sqrt(matrix):
    """Symmetric square root; eigenvalues below the zero tolerance are clamped to 0."""
    decomp = matrix if isinstance(matrix, SpectralDecomposition) else eigh(matrix)
    tol = decomp.zero_tolerance
    low = decomp.eigenvalues < -tol
    if np.any(low):
        idx = int(np.nonzero(low)[0][0])
        raise SingularityError(
            "square root requires a positive semidefinite matrix; eigenvalue %d is %.6g"
            % (idx, decomp.eigenvalues[idx])
        )
    return spectral_apply(decomp, lambda v: np.sqrt(max(v, 0.0)))


def sample_covariance(data):
    """Second-moment matrix Z'Z / n for an n-by-p data matrix Z (rows = samples)."""
    z = as_matrix(data)
    if z.ndim != 2:
        raise DimensionError("data must be a 2-d array, got shape %s" % (z.shape,))
    n, p = z.shape
    if n < 1 or p < 1:
        raise DimensionError("data must have at least one row and one column")
    return SymmetricMatrix(z.T @ z / n)


class EmpiricalSpectralDistribution:
    """Step-function CDF placing mass 1/p at each eigenvalue."""

    def __init__(self, eigenvalues):
        lam = np.asarray(eigenvalues, dtype=float).ravel()
        if lam.size < 1:
            raise DimensionError("need at least one eigenvalue")
        if not np.all(np.isfinite(lam)):
            raise InputError("eigenvalues must be finite")
        self.support = np.sort(lam)

    def cdf(self, x):
        pos = np.searchsorted(self.support, np.asarray(x, dtype=float), side="right")
        out = pos / self.support.size
        return float(out) if np.isscalar(x) else out
