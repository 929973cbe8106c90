"""Multi-source linear regression with covariance-shrinkage coefficient pooling.

A bundle holds one shared design X (N samples by p predictors) and one
response per source (N by n).  Per-source least squares gives a coefficient
matrix whose rows are then shrunk toward zero along directions learned from
the cross-source spread, either with a single pooled covariance (global) or
with a finite scale mixture fitted by a seeded Gibbs-style sampler (local).
"""

import numpy as np

from .errors import (
    DegeneracyError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    NumericalError,
    RegimeError,
    SingularityError,
)
from .shrinkage import ShrinkageRule, _shrink_spectrum, default_bandwidth, shrink_covariance
from .spectral import (
    SymmetricMatrix,
    as_matrix,
    eigh,
    spectral_inv_sqrt,
    spectral_inverse,
    spectral_sqrt,
)
from .tuning import default_bandwidth_grid, select_bandwidth

MAX_DESIGN_CONDITION = 1e12
NOISE_FLOOR = 1e-12


class SourceBundle:
    """Shared design plus per-source responses, validated once."""

    def __init__(self, design, responses):
        x = as_matrix(design)
        y = as_matrix(responses)
        if x.ndim != 2 or y.ndim != 2:
            raise DimensionError("design and responses must be 2-d arrays")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(
                "design has %d rows but responses have %d" % (x.shape[0], y.shape[0])
            )
        samples, predictors = x.shape
        sources = y.shape[1]
        if sources < 1:
            raise DimensionError("need at least one source")
        if samples <= predictors:
            raise InsufficientDataError(
                "need more samples than predictors (N=%d, p=%d)" % (samples, predictors)
            )
        gram = x.T @ x
        if np.linalg.cond(gram) >= MAX_DESIGN_CONDITION:
            raise SingularityError("design is numerically collinear")
        self.design = x
        self.responses = y
        self.n_samples = samples
        self.n_predictors = predictors
        self.n_sources = sources
        self.gram = SymmetricMatrix(gram)


class NoiseModel:
    """Pooled noise scale and the whitening factors of the coefficient noise."""

    def __init__(self, sigma2, q):
        self.sigma2 = float(sigma2)
        self.q = SymmetricMatrix(q)
        self.q_half = spectral_sqrt(self.q)
        self.q_half_inv = spectral_inv_sqrt(self.q)


class CoefficientEstimate:
    """Coefficient matrix (sources by predictors) with its provenance."""

    def __init__(self, coefficients, method, diagnostics=None):
        self.coefficients = as_matrix(coefficients)
        self.method = str(method)
        self.diagnostics = dict(diagnostics or {})


def fit_ols(bundle):
    """Per-source least squares; returns (estimate, noise model).

    Coefficient rows are beta_hat for each source.  The noise variance is
    pooled across sources (mean of per-source residual variances with
    denominator N - p) and floored at NOISE_FLOOR; the coefficient noise
    covariance is sigma2 (X'X)^-1.
    """
    x, y = bundle.design, bundle.responses
    coef = np.linalg.solve(bundle.gram.values, x.T @ y)  # p by n
    resid = y - x @ coef
    dof = bundle.n_samples - bundle.n_predictors
    sigma2 = float(np.mean(np.sum(resid * resid, axis=0) / dof))
    sigma2 = max(sigma2, NOISE_FLOOR)
    q = sigma2 * spectral_inverse(bundle.gram).values
    estimate = CoefficientEstimate(coef.T, "ols", {"sigma2": sigma2})
    return estimate, NoiseModel(sigma2, q)


def standardize(estimate, noise):
    """Whiten coefficient rows: each beta_hat is mapped to Q^{-1/2} beta_hat."""
    b = estimate.coefficients
    if b.shape[1] != noise.q.dim:
        raise DimensionError("coefficient width does not match the noise model")
    return b @ noise.q_half_inv.values


def _coefficient_second_moment(standardized):
    n = standardized.shape[0]
    return SymmetricMatrix(standardized.T @ standardized / n)


def _resolve_bandwidth(s, n, p, h):
    """Translate an h policy into a value.  Returns (h, policy, fell_back)."""
    if isinstance(h, str):
        policy = h.lower()
        if policy == "default":
            return default_bandwidth(n, p), policy, False
        if policy == "auto":
            if n > p + 1:
                chosen = select_bandwidth(s, n, default_bandwidth_grid(n, p))
                return chosen.h, policy, False
            return default_bandwidth(n, p), policy, True
        raise DomainError("unknown bandwidth policy %r" % h)
    hv = float(h)
    if not (hv > 0) or not np.isfinite(hv):
        raise DomainError("bandwidth must be positive and finite")
    return hv, "fixed", False


def global_shrink(bundle, h="default"):
    """Shrink all coefficient rows with one pooled covariance of the spread.

    h may be a positive number, "default" (closed-form bandwidth), or "auto"
    (risk-minimizing bandwidth when the source count allows it, else the
    default with a fallback note in the diagnostics).
    """
    estimate, noise = fit_ols(bundle)
    bstar = standardize(estimate, noise)
    n, p = bundle.n_sources, bundle.n_predictors
    if p == n:
        raise RegimeError(
            "source count equals predictor count (%d); the pooled rule is undefined" % p
        )
    s = _coefficient_second_moment(bstar)
    hv, policy, fell_back = _resolve_bandwidth(s, n, p, h)
    shrunk = shrink_covariance(s, n, hv)
    rotate = noise.q_half.values @ shrunk.inverse().values @ noise.q_half_inv.values
    coef = estimate.coefficients @ (np.eye(p) - rotate).T
    if not np.all(np.isfinite(coef)):
        raise NumericalError("shrunk coefficients are non-finite")
    diagnostics = {
        "sigma2": noise.sigma2,
        "h": hv,
        "h_policy": policy,
        "h_fallback": fell_back,
        "clamp_count": shrunk.clamp_count,
    }
    return CoefficientEstimate(coef, "global", diagnostics)


class MixtureState:
    """Labels, mixing proportions, and per-component covariances for one sweep."""

    def __init__(self, labels, proportions, covariances):
        self.labels = np.asarray(labels, dtype=int)
        self.proportions = np.asarray(proportions, dtype=float)
        self.covariances = list(covariances)
        k = len(self.covariances)
        if self.proportions.size != k:
            raise DimensionError("one proportion per component required")
        if np.any(self.proportions < 0) or abs(self.proportions.sum() - 1.0) > 1e-9:
            raise DomainError("proportions must form a probability vector")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= k):
            raise DomainError("labels must index the components")


def _log_density_rows(standardized, decomp, values):
    """Row-wise log N(b; 0, U diag(values) U') using a factored covariance."""
    rotated = standardized @ decomp.eigenvectors
    quad = np.sum(rotated * rotated / values, axis=1)
    logdet = float(np.sum(np.log(values)))
    p = standardized.shape[1]
    return -0.5 * (p * np.log(2.0 * np.pi) + logdet + quad)


def mixture_posterior_weights(standardized, state):
    """Posterior component probabilities for each standardized row."""
    b = as_matrix(standardized)
    if b.ndim != 2:
        raise DimensionError("standardized coefficients must be 2-d")
    logs = np.empty((b.shape[0], len(state.covariances)))
    for k, cov in enumerate(state.covariances):
        pk = state.proportions[k]
        if pk <= 0:
            logs[:, k] = -np.inf
            continue
        decomp = eigh(cov)
        if np.any(decomp.eigenvalues <= decomp.zero_tolerance):
            raise SingularityError("component %d covariance is singular" % k)
        logs[:, k] = np.log(pk) + _log_density_rows(b, decomp, decomp.eigenvalues)
    top = np.max(logs, axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DegeneracyError("a row has zero posterior mass under every component")
    w = np.exp(logs - top)
    return w / np.sum(w, axis=1, keepdims=True)


def _component_shrunk(standardized_rows, count, p):
    """Shrink one component's second moment, allowing the p >= count regime."""
    s = SymmetricMatrix(standardized_rows.T @ standardized_rows / count)
    decomp = eigh(s)
    h = default_bandwidth(count, p)
    return _shrink_spectrum(decomp, count, p, h)


def _initial_labels(standardized, k):
    """Rank rows by norm and cut into k contiguous, near-equal groups."""
    norms = np.linalg.norm(standardized, axis=1)
    order = np.argsort(norms, kind="stable")
    labels = np.empty(standardized.shape[0], dtype=int)
    for g, chunk in enumerate(np.array_split(order, k)):
        labels[chunk] = g
    return labels


def _mixture_sweeps(coefficients, standardized, noise, labels, gumbels, burn_in):
    """Run the label/estimate sweeps with explicit Gumbel variates.

    gumbels has shape (sweeps, rows, components); sweep s resamples labels by
    argmax_k of (log posterior numerator + gumbels[s, :, k]), so permuting the
    component axis together with the initial labels permutes the whole
    trajectory.  Returns the averaged post-burn-in coefficient matrix and a
    diagnostics dict.
    """
    sweeps, rows, k = gumbels.shape
    n, p = standardized.shape
    if rows != n:
        raise DimensionError("one Gumbel row per coefficient row required")
    labels = np.asarray(labels, dtype=int).copy()

    pooled = _component_shrunk(standardized, n, p)
    eye = np.eye(p)
    q_half = noise.q_half.values
    q_half_inv = noise.q_half_inv.values

    accum = np.zeros_like(coefficients)
    kept = 0
    pooled_resets = 0
    clamp_total = 0
    for s in range(sweeps):
        decomps = []
        values = []
        for comp in range(k):
            members = standardized[labels == comp]
            count = members.shape[0]
            if count < 2:
                shrunk = pooled
                pooled_resets += 1
            else:
                try:
                    shrunk = _component_shrunk(members, count, p)
                except SingularityError:
                    shrunk = pooled
                    pooled_resets += 1
            clamp_total += shrunk.clamp_count
            decomps.append(shrunk.decomposition)
            values.append(shrunk.values)

        counts = np.bincount(labels, minlength=k).astype(float)
        floored = np.maximum(counts, 0.5)  # emptied components stay reachable
        proportions = floored / floored.sum()

        logs = np.empty((n, k))
        for comp in range(k):
            logs[:, comp] = np.log(proportions[comp]) + _log_density_rows(
                standardized, decomps[comp], values[comp]
            )
        top = np.max(logs, axis=1, keepdims=True)
        weights = np.exp(logs - top)
        weights /= np.sum(weights, axis=1, keepdims=True)

        estimate = np.zeros_like(coefficients)
        for comp in range(k):
            u = decomps[comp].eigenvectors
            inv = u @ np.diag(1.0 / values[comp]) @ u.T
            rotate = q_half @ inv @ q_half_inv
            shrunk_rows = coefficients @ (eye - rotate).T
            estimate += weights[:, comp, None] * shrunk_rows
        if s >= burn_in:
            accum += estimate
            kept += 1

        labels = np.argmax(logs + gumbels[s], axis=1)

    if kept < 1:
        raise DomainError("burn-in leaves no sweeps to average")
    diagnostics = {
        "sweeps": sweeps,
        "burn_in": burn_in,
        "pooled_resets": pooled_resets,
        "clamp_count": clamp_total,
        "final_component_sizes": np.bincount(labels, minlength=k).tolist(),
    }
    return accum / kept, diagnostics


def local_shrink(bundle, n_components, sweeps=200, burn_in=50, seed=0):
    """Shrink coefficient rows under a fitted finite scale mixture.

    Rows are assigned latent component labels; each component carries its own
    shrunk covariance of the member rows (per-component bandwidth from the
    member count).  Labels are resampled from the row-wise posterior each
    sweep with a seeded generator, and the returned coefficients average the
    per-sweep posterior means after burn_in.  Components that empty out or
    lose their spectrum borrow the pooled all-rows covariance for that sweep.
    """
    k = int(n_components)
    if k != n_components or k < 1:
        raise DomainError("component count must be a positive integer")
    if int(sweeps) != sweeps or int(burn_in) != burn_in:
        raise DomainError("sweeps and burn_in must be integers")
    sweeps, burn_in = int(sweeps), int(burn_in)
    if sweeps < 1 or burn_in < 0 or burn_in >= sweeps:
        raise DomainError("need 0 <= burn_in < sweeps")
    estimate, noise = fit_ols(bundle)
    n = bundle.n_sources
    if n < 2 * k:
        raise InsufficientDataError(
            "need at least two rows per component (n=%d, components=%d)" % (n, k)
        )
    bstar = standardize(estimate, noise)
    labels = _initial_labels(bstar, k)
    rng = np.random.default_rng(seed)
    gumbels = rng.gumbel(size=(sweeps, n, k))
    coef, diagnostics = _mixture_sweeps(
        estimate.coefficients, bstar, noise, labels, gumbels, burn_in
    )
    if not np.all(np.isfinite(coef)):
        raise NumericalError("mixture-shrunk coefficients are non-finite")
    diagnostics.update({"sigma2": noise.sigma2, "n_components": k, "seed": seed})
    return CoefficientEstimate(coef, "local(%d)" % k, diagnostics)


def predictive_error(coefficients, design, responses):
    """Mean squared prediction error of a coefficient matrix on held-out data."""
    x = as_matrix(design)
    y = as_matrix(responses)
    resid = y - x @ as_matrix(coefficients).T
    return float(np.mean(resid * resid))


def select_components(bundle, candidates, holdout=0.2, sweeps=200, burn_in=50, seed=0):
    """Pick the mixture size by holdout prediction error.

    Samples (rows of the design) are split once into train and validation
    with the given seed; each candidate component count is fitted on the
    training part and scored on the validation part.  Ties prefer the
    smaller count.  Returns (best_count, table) where table maps candidate
    to its validation error.
    """
    cands = sorted(set(int(c) for c in candidates))
    if not cands:
        raise DomainError("candidate list is empty")
    if not (0.0 < holdout < 1.0):
        raise DomainError("holdout fraction must lie in (0, 1)")
    total = bundle.n_samples
    n_val = int(round(holdout * total))
    if n_val < 1 or total - n_val <= bundle.n_predictors:
        raise InsufficientDataError(
            "holdout split leaves too few rows (total=%d, validation=%d, p=%d)"
            % (total, n_val, bundle.n_predictors)
        )
    for c in cands:
        if c < 1 or bundle.n_sources < 2 * c:
            raise DomainError(
                "candidate %d violates the sampler preconditions (n=%d)"
                % (c, bundle.n_sources)
            )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(total)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    train = SourceBundle(bundle.design[train_idx], bundle.responses[train_idx])
    x_val, y_val = bundle.design[val_idx], bundle.responses[val_idx]

    table = {}
    for i, c in enumerate(cands):
        child = np.random.SeedSequence(seed, spawn_key=(i,))
        fit = local_shrink(
            train, c, sweeps=sweeps, burn_in=burn_in,
            seed=child.generate_state(1)[0],
        )
        table[c] = predictive_error(fit.coefficients, x_val, y_val)
    best = min(cands, key=lambda c: (table[c], c))
    return best, table
