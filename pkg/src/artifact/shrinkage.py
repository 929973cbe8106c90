"""Rotation-invariant eigenvalue shrinkage for sample covariance matrices.

The estimator keeps the sample eigenvectors and replaces each sample
eigenvalue x by a nonlinear map delta(x) built from a smoothed score of the
whole spectrum.  Two regimes exist: fewer variables than samples (p < n,
kernel averaged over all p eigenvalues) and more variables than samples
(p >= n, kernel averaged with divisor n over the nonzero eigenvalues, plus a
separate constant for the null space).
"""

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    InputError,
    RegimeError,
    SingularityError,
)
from .spectral import SymmetricMatrix, as_symmetric, eigh, zero_tolerance

# Lower bound on the inverse shrunk eigenvalue, relative to 1/x.  Evaluations
# hitting it are counted so callers can see when the raw rule went negative.
CLAMP_FLOOR = 1e-8


def default_bandwidth(n, p):
    """Closed-form kernel bandwidth (p/n)^0.7 * p^(-0.35)."""
    if int(n) != n or int(p) != p:
        raise DomainError("n and p must be integers")
    n, p = int(n), int(p)
    if n < 1 or p < 1:
        raise DomainError("n and p must be positive")
    return (p / n) ** 0.7 * p ** (-0.35)


def _check_kernel(eigenvalues, h, divisor):
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if lam.size < 1:
        raise DimensionError("kernel needs at least one eigenvalue")
    if not np.all(np.isfinite(lam)):
        raise InputError("kernel eigenvalues must be finite")
    if np.any(lam <= 0):
        raise DomainError("kernel eigenvalues must be strictly positive")
    if not (h > 0):
        raise DomainError("bandwidth h must be positive")
    if not (divisor > 0):
        raise DomainError("divisor must be positive")
    return lam


def stein_transform(x, eigenvalues, h, divisor):
    """Smoothed spectral score at x.

    Sum over kernel eigenvalues lam_k of
        lam_k^-1 (lam_k^-1 - x) / ((lam_k^-1 - x)^2 + h^2 lam_k^-2),
    divided by `divisor`.  Accepts scalar or 1-d x.
    """
    lam = _check_kernel(eigenvalues, h, divisor)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    inv = 1.0 / lam
    u = inv[None, :] - xv[:, None]
    out = np.sum(inv * u / (u * u + (h * inv[None, :]) ** 2), axis=1) / divisor
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


def stein_transform_derivative(x, eigenvalues, h, divisor):
    """d/dx of stein_transform with the kernel held fixed."""
    lam = _check_kernel(eigenvalues, h, divisor)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    inv = 1.0 / lam
    u = inv[None, :] - xv[:, None]
    b2 = (h * inv[None, :]) ** 2
    out = np.sum(inv * (u * u - b2) / (u * u + b2) ** 2, axis=1) / divisor
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


class ShrinkageRule:
    """Frozen eigenvalue map for one (spectrum, n, p, h) configuration.

    regime is "under" when p < n (kernel over all p eigenvalues, divisor p)
    and "over" when p >= n (kernel over the nonzero eigenvalues, divisor n).
    In the over regime, zero sample eigenvalues map to `zero_rule_value`,
    which is None when p == n (the constant is undefined there).

    Instances are immutable after construction; evaluation is pure and
    returns clamp counts to the caller instead of mutating state.
    """

    def __init__(self, eigenvalues, n, p, h):
        lam = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
        if lam.size != p:
            raise DimensionError(
                "expected %d eigenvalues, got %d" % (p, lam.size)
            )
        if int(n) != n or n < 1:
            raise DomainError("n must be a positive integer")
        if not np.all(np.isfinite(lam)):
            raise InputError("eigenvalues must be finite")
        if not (h > 0) or not np.isfinite(h):
            raise DomainError("bandwidth h must be positive and finite")
        n = int(n)
        tol = zero_tolerance(lam)
        if lam.size and lam[-1] <= 0:
            raise SingularityError("spectrum has no positive eigenvalue")
        if np.any(lam < -max(tol, 0.0)):
            raise InputError("spectrum has a negative eigenvalue (%.6g)" % lam[0])

        self.n = n
        self.p = int(p)
        self.h = float(h)
        self.aspect = self.p / self.n

        if self.p < self.n:
            self.regime = "under"
            small = lam <= tol
            if np.any(small):
                idx = int(np.nonzero(small)[0][0])
                raise SingularityError(
                    "eigenvalue %d is numerically zero (%.6g) but p < n requires "
                    "a full-rank spectrum" % (idx, lam[idx])
                )
            self.kernel = lam
            self.divisor = self.p
            self.zero_count = 0
            self.zero_rule_value = None
        else:
            self.regime = "over"
            keep = lam > tol
            self.kernel = lam[keep]
            if self.kernel.size == 0:
                raise SingularityError("spectrum has no nonzero eigenvalue")
            self.divisor = self.n
            self.zero_count = int(np.sum(~keep))
            if self.p > self.n:
                inv_delta0 = (self.aspect - 1.0) * np.sum(1.0 / self.kernel) / self.n
                self.zero_rule_value = float(1.0 / inv_delta0)
            else:
                # p == n: the null-space constant is undefined
                self.zero_rule_value = None

    def _evaluate_masked(self, x):
        """Map positive eigenvalues through the regime rule.

        Returns (values, clamped) where clamped marks entries whose raw
        bracket fell below the floor.  x may be scalar or 1-d; entries must
        be strictly positive (zeros are the caller's job via zero_rule_value).
        """
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xv <= 0) or not np.all(np.isfinite(xv)):
            raise DomainError("rule evaluation needs strictly positive finite x")
        inv_x = 1.0 / xv
        g = stein_transform(inv_x, self.kernel, self.h, self.divisor)
        g = np.atleast_1d(g)
        if self.regime == "under":
            bracket = (1.0 - self.aspect) * inv_x + 2.0 * self.aspect * inv_x * g
        else:
            bracket = (self.aspect - 1.0) * inv_x + 2.0 * inv_x * g
        floor = CLAMP_FLOOR * inv_x
        clamped = bracket < floor
        bracket = np.where(clamped, floor, bracket)
        return 1.0 / bracket, clamped

    def _evaluate(self, x):
        """Like _evaluate_masked but returns (values, clamp_count)."""
        values, clamped = self._evaluate_masked(x)
        return values, int(np.sum(clamped))


def delta_star_under(x, rule):
    """Shrunk eigenvalue in the p < n regime."""
    if rule.regime != "under":
        raise RegimeError("rule was built for the over regime")
    values, _ = rule._evaluate(x)
    return float(values[0]) if np.ndim(x) == 0 else values


def delta_star_over(x, rule):
    """Shrunk eigenvalue for nonzero sample eigenvalues in the p >= n regime."""
    if rule.regime != "over":
        raise RegimeError("rule was built for the under regime")
    values, _ = rule._evaluate(x)
    return float(values[0]) if np.ndim(x) == 0 else values


def zero_eigenvalue_value(rule):
    """Shrunk value assigned to null-space directions (p > n only)."""
    if rule.regime != "over" or rule.zero_rule_value is None:
        raise RegimeError("zero-eigenvalue rule requires p > n")
    return rule.zero_rule_value


class ShrunkCovariance:
    """Shrunk covariance in factored form: sample eigenvectors, new eigenvalues."""

    def __init__(self, decomposition, values, rule, clamp_count):
        self.decomposition = decomposition
        self.values = np.asarray(values, dtype=float)
        self.rule = rule
        self.clamp_count = int(clamp_count)
        if np.any(self.values <= 0) or not np.all(np.isfinite(self.values)):
            raise SingularityError("shrunk eigenvalues must be positive and finite")

    def matrix(self):
        u = self.decomposition.eigenvectors
        return SymmetricMatrix(u @ np.diag(self.values) @ u.T)

    def inverse(self):
        u = self.decomposition.eigenvectors
        return SymmetricMatrix(u @ np.diag(1.0 / self.values) @ u.T)


def _shrink_spectrum(decomp, n, p, h):
    """Shared kernel: build the rule and push the whole spectrum through it."""
    rule = ShrinkageRule(decomp.eigenvalues, n, p, h)
    lam = decomp.eigenvalues
    tol = zero_tolerance(lam)
    values = np.empty(p)
    clamps = 0
    positive = lam > tol
    if np.any(positive):
        mapped, clamps = rule._evaluate(lam[positive])
        values[positive] = mapped
    if np.any(~positive):
        if rule.zero_rule_value is None:
            raise SingularityError(
                "zero sample eigenvalues need p > n; got p == %d, n == %d" % (p, n)
            )
        values[~positive] = rule.zero_rule_value
    return ShrunkCovariance(decomp, values, rule, clamps)


def shrink_covariance(s, n, h=None):
    """Shrink a sample covariance matrix given its sample count n.

    s is the p-by-p second-moment matrix (Z'Z / n).  h defaults to
    default_bandwidth(n, p).  p == n is rejected: neither regime's formulas
    are complete there.
    """
    sym = as_symmetric(s)
    p = sym.dim
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    n = int(n)
    if p == n:
        raise RegimeError(
            "aspect ratio p == n (%d) is unsupported; add or drop a sample" % p
        )
    if h is None:
        h = default_bandwidth(n, p)
    decomp = eigh(sym)
    return _shrink_spectrum(decomp, n, p, h)


def empirical_loss(true_inverse, estimate_inverse, s, degree=1):
    """Relative savings loss (1/p) tr[(A - B)^2 S^degree].

    A and B are inverse matrices (truth and estimate), S the sample
    second-moment matrix.  degree must be a nonnegative integer.
    """
    a = as_symmetric(true_inverse).values
    b = as_symmetric(estimate_inverse).values
    sm = as_symmetric(s).values
    if int(degree) != degree or degree < 0:
        raise DomainError("degree must be a nonnegative integer")
    p = a.shape[0]
    if b.shape[0] != p or sm.shape[0] != p:
        raise DimensionError("all matrices must share the same dimension")
    diff = a - b
    weight = np.linalg.matrix_power(sm, int(degree))
    return float(np.trace(diff @ diff @ weight)) / p
