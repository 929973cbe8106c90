"""Synthetic multi-source experiment harness.

Generates designs with equicorrelated predictors, coefficient matrices from
four canonical families, Gaussian responses, and runs estimator comparisons
with seeded, reproducible replication streams.  Metrics are normalized
squared error of the coefficient matrix and squared prediction error on a
fresh design.
"""

import numpy as np

from .errors import DomainError
from .regress import SourceBundle, fit_ols, global_shrink, local_shrink
from .shrinkage import _shrink_spectrum, empirical_loss, shrink_covariance
from .spectral import SymmetricMatrix, eigh, sample_covariance, spectral_inverse
from .tuning import default_bandwidth_grid, select_bandwidth

COEFFICIENT_DESIGNS = ("low-rank", "all-small", "heavy-tail", "scale-mixture")
LOW_RANK = 8
SMALL_SCALE = 0.2
MIXTURE_SCALES = (0.1, 10.0)


def equicorrelated_design(n_samples, n_predictors, rho, rng):
    """Design rows drawn N(0, (1 - rho) I + rho J)."""
    if not (0.0 <= rho < 1.0):
        raise DomainError("rho must lie in [0, 1)")
    cov = (1.0 - rho) * np.eye(n_predictors) + rho * np.ones(
        (n_predictors, n_predictors)
    )
    chol = np.linalg.cholesky(cov)
    return rng.standard_normal((n_samples, n_predictors)) @ chol.T


def coefficient_matrix(kind, n_sources, n_predictors, rng):
    """Draw the true coefficient matrix (sources by predictors)."""
    n, p = n_sources, n_predictors
    if kind == "low-rank":
        r = min(LOW_RANK, n, p)
        left = rng.standard_normal((n, r))
        right = rng.standard_normal((p, r))
        return left @ right.T
    if kind == "all-small":
        return SMALL_SCALE * rng.standard_normal((n, p))
    if kind == "heavy-tail":
        # one global scale, one heavy-tailed scale per predictor shared by all sources
        tau = rng.random()
        lam = np.abs(rng.standard_cauchy(p))
        return rng.standard_normal((n, p)) * (tau * lam)[None, :]
    if kind == "scale-mixture":
        low, high = MIXTURE_SCALES
        scale = np.where(rng.random(n) < 0.5, low, high)
        return rng.standard_normal((n, p)) * scale[:, None]
    raise DomainError("unknown coefficient design %r" % (kind,))


def simulate_sources(kind, n_sources, n_predictors, rho=0.5, n_samples=200,
                     n_test=20, rng=None):
    """One synthetic replication: bundle, truth, and a held-out design."""
    rng = np.random.default_rng(rng)
    x = equicorrelated_design(n_samples, n_predictors, rho, rng)
    truth = coefficient_matrix(kind, n_sources, n_predictors, rng)
    noise = rng.standard_normal((n_samples, n_sources))
    responses = x @ truth.T + noise
    x_test = equicorrelated_design(n_test, n_predictors, rho, rng)
    return SourceBundle(x, responses), truth, x_test


def matrix_error(coefficients, truth):
    """Mean squared entry error of the coefficient matrix."""
    diff = np.asarray(coefficients, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.mean(diff * diff))


def design_error(coefficients, truth, design):
    """Mean squared prediction gap on a held-out design (noise-free)."""
    diff = np.asarray(coefficients, dtype=float) - np.asarray(truth, dtype=float)
    gap = np.asarray(design, dtype=float) @ diff.T
    return float(np.mean(gap * gap))


def parse_method(name):
    """Validate a method token: ols, global, global-sure, or local-K."""
    if name in ("ols", "global", "global-sure"):
        return name
    if name.startswith("local-"):
        try:
            k = int(name[len("local-"):])
        except ValueError:
            raise DomainError("bad component count in method %r" % name) from None
        if k < 1:
            raise DomainError("component count must be positive in %r" % name)
        return name
    raise DomainError(
        "unknown method %r (expected ols, global, global-sure, or local-K)" % name
    )


def estimate_with_method(bundle, method, seed=0, sweeps=200, burn_in=50):
    """Dispatch one estimator by its method token."""
    parse_method(method)
    if method == "ols":
        return fit_ols(bundle)[0]
    if method == "global":
        return global_shrink(bundle, "default")
    if method == "global-sure":
        return global_shrink(bundle, "auto")
    k = int(method[len("local-"):])
    return local_shrink(bundle, k, sweeps=sweeps, burn_in=burn_in, seed=seed)


class ExperimentResult:
    """Tidy per-replication records with recomputable summaries."""

    COLUMNS = ("design", "n_sources", "n_predictors", "rho", "method",
               "replication", "mse", "pe")

    def __init__(self, records):
        self.records = list(records)

    def to_rows(self):
        return [[r[c] for c in self.COLUMNS] for r in self.records]

    def values(self, method, metric):
        return np.array([r[metric] for r in self.records if r["method"] == method])

    def summary(self):
        """Mean and sample sd of each metric per method."""
        methods = sorted({r["method"] for r in self.records})
        out = {}
        for m in methods:
            for metric in ("mse", "pe"):
                vals = self.values(m, metric)
                sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
                out[(m, metric)] = (float(np.mean(vals)), sd)
        return out


def _replication_seed(seed, *key):
    return np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))


def run_experiment(kind, n_sources, n_predictors, rho=0.5, n_samples=200,
                   n_test=20, methods=("ols", "global"), reps=20, seed=0,
                   sweeps=200, burn_in=50):
    """Replicate one design cell across methods with a split seed stream.

    Replication r draws data from spawn key (r, 0) of the root seed and
    method m (by position) samples from spawn key (r, m + 1), so adding or
    reordering methods never changes the data nor the other methods' results.
    """
    methods = [parse_method(m) for m in methods]
    if reps < 1:
        raise DomainError("need at least one replication")
    records = []
    for rep in range(int(reps)):
        data_rng = np.random.default_rng(_replication_seed(seed, rep, 0))
        bundle, truth, x_test = simulate_sources(
            kind, n_sources, n_predictors, rho, n_samples, n_test, data_rng
        )
        for m_idx, method in enumerate(methods):
            child = _replication_seed(seed, rep, m_idx + 1)
            fit = estimate_with_method(
                bundle, method, seed=child.generate_state(1)[0],
                sweeps=sweeps, burn_in=burn_in,
            )
            records.append({
                "design": kind,
                "n_sources": n_sources,
                "n_predictors": n_predictors,
                "rho": rho,
                "method": method,
                "replication": rep,
                "mse": matrix_error(fit.coefficients, truth),
                "pe": design_error(fit.coefficients, truth, x_test),
            })
    return ExperimentResult(records)


def true_covariance(model, p, rho=0.5, spike=0.5):
    """Population covariance for the loss-convergence scenarios."""
    if model == "independence":
        return SymmetricMatrix(np.eye(p))
    if model == "ar1":
        idx = np.arange(p)
        return SymmetricMatrix(rho ** np.abs(idx[:, None] - idx[None, :]))
    if model == "spike":
        return SymmetricMatrix(np.eye(p) + spike * np.ones((p, p)))
    raise DomainError("unknown covariance model %r" % (model,))


def loss_convergence(model, sample_sizes, aspect_ratios, reps=10, seed=0):
    """Monte Carlo mean of the degree-1 loss across (n, c) cells.

    Returns records {model, n, c, p, replication, loss} using the default
    bandwidth at every cell.  p is round(c n) kept strictly below n.
    """
    records = []
    for ni, n in enumerate(sample_sizes):
        for ci, c in enumerate(aspect_ratios):
            p = max(1, min(int(round(c * n)), int(n) - 1))
            cov = true_covariance(model, p)
            truth_inv = spectral_inverse(cov).values
            chol = np.linalg.cholesky(cov.values)
            for rep in range(int(reps)):
                rng = np.random.default_rng(
                    _replication_seed(seed, ni, ci, rep)
                )
                z = rng.standard_normal((int(n), p)) @ chol.T
                s = sample_covariance(z)
                est = shrink_covariance(s, int(n))
                records.append({
                    "model": model,
                    "n": int(n),
                    "c": float(c),
                    "p": p,
                    "replication": rep,
                    "loss": empirical_loss(truth_inv, est.inverse(), s, 1),
                })
    return records


def factor_covariance(p, n_factors=5, rng=None):
    """Population covariance Xi Xi' + I with standard normal factor loadings."""
    rng = np.random.default_rng(rng)
    loadings = rng.standard_normal((p, int(n_factors)))
    return SymmetricMatrix(loadings @ loadings.T + np.eye(p))


def prial_experiment(np_product=2000, aspect_ratios=(0.3, 0.5, 0.7), reps=100,
                     seed=0, policies=("default", "sure", "oracle"),
                     n_factors=5, grid_size=15):
    """Percentage improvement over the raw inverse, per aspect ratio and policy.

    For each aspect ratio c, the cell uses p = round(sqrt(c * np_product)) and
    n = round(p / c), a factor-model covariance drawn once, and common random
    numbers across bandwidth policies.  The oracle minimizes the Monte Carlo
    mean loss over the shared grid (which contains the default bandwidth at
    its center), so its improvement is 100 by construction and the default
    policy can never exceed it.  A nonpositive denominator flags the cell
    undefined.
    """
    policies = list(policies)
    for pol in policies:
        if pol not in ("default", "sure", "oracle"):
            raise DomainError("unknown bandwidth policy %r" % (pol,))
    records = []
    for ci, c in enumerate(aspect_ratios):
        p = int(round(np.sqrt(c * np_product)))
        n = int(round(p / c))
        if n <= p + 1:
            raise DomainError(
                "aspect ratio %g leaves no room for risk estimation (n=%d, p=%d)"
                % (c, n, p)
            )
        cell_rng = np.random.default_rng(_replication_seed(seed, ci, 0))
        cov = factor_covariance(p, n_factors, cell_rng)
        truth_inv = spectral_inverse(cov).values
        chol = np.linalg.cholesky(cov.values)
        grid = default_bandwidth_grid(n, p, grid_size)
        mid = int(grid_size) // 2

        raw_losses = np.empty(int(reps))
        grid_losses = np.empty((int(reps), grid.size))
        sure_losses = np.empty(int(reps))
        for rep in range(int(reps)):
            rng = np.random.default_rng(_replication_seed(seed, ci, rep + 1))
            z = rng.standard_normal((n, p)) @ chol.T
            s = sample_covariance(z)
            decomp = eigh(s)
            raw_losses[rep] = empirical_loss(
                truth_inv, spectral_inverse(decomp).values, s, 1
            )
            for gi, h in enumerate(grid):
                est = _shrink_spectrum(decomp, n, p, h)
                grid_losses[rep, gi] = empirical_loss(
                    truth_inv, est.inverse(), s, 1
                )
            chosen = select_bandwidth(decomp, n, grid)
            sure_losses[rep] = grid_losses[rep, chosen.index]

        mean_raw = float(np.mean(raw_losses))
        mean_grid = np.mean(grid_losses, axis=0)
        oracle_idx = int(np.argmin(mean_grid))
        denominator = mean_raw - float(mean_grid[oracle_idx])
        policy_means = {
            "default": float(mean_grid[mid]),
            "sure": float(np.mean(sure_losses)),
            "oracle": float(mean_grid[oracle_idx]),
        }
        for pol in policies:
            mean_loss = policy_means[pol]
            undefined = denominator <= 0
            prial = np.nan if undefined else 100.0 * (mean_raw - mean_loss) / denominator
            records.append({
                "aspect": float(c),
                "n": n,
                "p": p,
                "policy": pol,
                "prial": float(prial),
                "mean_loss": mean_loss,
                "raw_mean_loss": mean_raw,
                "oracle_h": float(grid[oracle_idx]),
                "undefined": bool(undefined),
            })
    return records
