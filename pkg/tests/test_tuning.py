from types import SimpleNamespace

import numpy as np
import pytest

import artifact.tuning as tuning
from artifact.errors import (
    DimensionError,
    DomainError,
    InsufficientDataError,
    SingularityError,
    TuningError,
)
from artifact.shrinkage import (
    ShrinkageRule,
    default_bandwidth,
    delta_star_under,
    shrink_covariance,
)
from artifact.spectral import eigh, sample_covariance
from artifact.tuning import (
    default_bandwidth_grid,
    precision_diagonals,
    risk_estimate,
    select_bandwidth,
    zeta_derivative_trace,
)


# Finite-difference oracles for the derivative trace.  zeta_j is the j-th
# unnormalized eigenvalue over its shrunk value; perturbations move the
# kernel along with the evaluation point (the rule is re-built each time).

def zeta_vector(lams, n, h):
    lams = np.asarray(lams, dtype=float)
    rule = ShrinkageRule(lams, n, lams.size, h)
    return n * lams / delta_star_under(lams, rule)


def trace_fd_oracle(lams, n, h, rel_step):
    lams = np.asarray(lams, dtype=float)
    p = lams.size
    total = 0.0
    for j in range(p):
        step = rel_step * lams[j]
        up, dn = lams.copy(), lams.copy()
        up[j] += step
        dn[j] -= step
        diff = zeta_vector(up, n, h)[j] - zeta_vector(dn, n, h)[j]
        total += diff / (2.0 * n * step)
    zeta = zeta_vector(lams, n, h)
    star = n * lams
    for i in range(p):
        for j in range(p):
            if i != j:
                total += 0.5 * (zeta[j] - zeta[i]) / (star[j] - star[i])
    return total


def divergence_fd_oracle(s, n, h, step):
    """Matrix-level divergence of M -> U zeta(Lambda*) U' at the unnormalized
    second-moment matrix, perturbing every entry with symmetrization inside."""
    sm = np.asarray(s, dtype=float)
    p = sm.shape[0]

    def zeta_matrix(m):
        decomp = eigh(0.5 * (m + m.T) / n)
        lam = decomp.eigenvalues
        rule = ShrinkageRule(lam, n, p, h)
        vals = n * lam / delta_star_under(lam, rule)
        u = decomp.eigenvectors
        return u @ np.diag(vals) @ u.T

    base = n * sm
    total = 0.0
    for i in range(p):
        for j in range(p):
            bump = np.zeros((p, p))
            bump[i, j] = step
            total += (zeta_matrix(base + bump)[i, j] - zeta_matrix(base - bump)[i, j]) / (
                2.0 * step
            )
    return total


# precision diagonals


def test_precision_single_column_closed_form():
    y = np.array([[1.0], [2.0], [-1.0], [0.5], [3.0]])
    got = precision_diagonals(y)
    assert got.shape == (1,)
    assert got[0] == pytest.approx((5 - 2) / float(y.ravel() @ y.ravel()), rel=1e-14)


def test_precision_identity_monte_carlo_mean():
    acc = np.zeros(3)
    for rep in range(200):
        rng = np.random.default_rng(np.random.SeedSequence(4, spawn_key=(rep,)))
        acc += precision_diagonals(rng.standard_normal((500, 3)))
    acc /= 200
    assert np.max(np.abs(acc - 1.0)) <= 0.05


def test_precision_diagonal_covariance_single_draw():
    z = np.random.default_rng(1).standard_normal((1000, 2)) @ np.diag([1.0, 2.0])
    got = precision_diagonals(z)
    assert got[0] == pytest.approx(1.0, rel=0.1)
    assert got[1] == pytest.approx(0.25, rel=0.1)


def test_precision_preconditions():
    rng = np.random.default_rng(2)
    with pytest.raises(InsufficientDataError):
        precision_diagonals(rng.standard_normal((4, 3)))
    z = rng.standard_normal((20, 2))
    z = np.column_stack([z, z[:, 0]])  # third column duplicates the first
    with pytest.raises(SingularityError):
        precision_diagonals(z)
    with pytest.raises(DimensionError):
        precision_diagonals(np.ones(5))


def test_precision_outputs_positive():
    z = np.random.default_rng(3).standard_normal((60, 4))
    assert np.all(precision_diagonals(z) > 0)


# derivative trace


def test_trace_single_eigenvalue_is_zero():
    """With one eigenvalue the shrunk value is a fixed multiple of it, so the
    ratio zeta is constant and its derivative vanishes identically."""
    for lam, n, h in ((2.5, 10, 0.3), (0.2, 50, 1.0)):
        got = zeta_derivative_trace(eigh(np.array([[lam]])), n, h)
        assert abs(got) <= 1e-12
        assert abs(trace_fd_oracle([lam], n, h, 1e-6)) <= 1e-6


def test_trace_two_eigenvalues_matches_finite_differences():
    got = zeta_derivative_trace(eigh(np.diag([1.0, 2.0])), 10, 0.7)
    assert got == pytest.approx(trace_fd_oracle([1.0, 2.0], 10, 0.7, 1e-5), rel=1e-5)


def test_trace_matches_matrix_level_divergence():
    rng = np.random.default_rng(21)
    a = rng.standard_normal((12, 3))
    s = sample_covariance(a)
    n, h = 12, 0.5
    got = zeta_derivative_trace(eigh(s), n, h)
    fd = divergence_fd_oracle(s.values, n, h, 1e-6 * float(np.mean(np.abs(s.values))))
    assert got == pytest.approx(fd, rel=1e-6)


def test_trace_equal_eigenvalues_finite():
    got = zeta_derivative_trace(eigh(np.eye(3) * 2.0), 12, 0.4)
    assert np.isfinite(got)


def test_trace_continuous_through_near_ties():
    tied = zeta_derivative_trace(eigh(np.diag([1.0, 1.0, 2.0])), 15, 0.6)
    near = zeta_derivative_trace(eigh(np.diag([1.0, 1.0 + 1e-12, 2.0])), 15, 0.6)
    assert np.isfinite(tied) and np.isfinite(near)
    assert near == pytest.approx(tied, rel=1e-6)


def test_trace_accepts_plain_matrices_and_checks_n():
    s = np.diag([1.0, 2.0, 4.0])
    assert zeta_derivative_trace(s, 20, 0.5) == pytest.approx(
        zeta_derivative_trace(eigh(s), 20, 0.5), abs=0
    )
    with pytest.raises(InsufficientDataError):
        zeta_derivative_trace(s, 4, 0.5)


# risk estimate


def test_risk_assembly_identity_exact():
    z = np.random.default_rng(5).standard_normal((40, 6))
    s = sample_covariance(z)
    diags = precision_diagonals(z)
    r = risk_estimate(s, 40, 0.3, diags)
    n, p = r.n, r.p
    expect = (
        r.quadratic / n
        - 2.0 * (n - p - 1) * r.inverse_sum / n
        - 4.0 * r.derivative_trace / n
        + r.diagonal_sum
    )
    assert r.value == expect


def test_risk_components_recompute_from_shrunk_spectrum():
    z = np.random.default_rng(6).standard_normal((30, 4))
    s = sample_covariance(z)
    h = 0.4
    r = risk_estimate(s, 30, h)
    est = shrink_covariance(s, 30, h)
    lam = est.decomposition.eigenvalues
    assert r.quadratic == pytest.approx(np.sum(30 * lam / est.values ** 2), rel=1e-12)
    assert r.inverse_sum == pytest.approx(np.sum(1.0 / est.values), rel=1e-12)
    assert r.derivative_trace == pytest.approx(
        zeta_derivative_trace(eigh(s), 30, h), abs=0
    )
    assert r.diagonal_sum is None


def test_risk_anchor_term_constant_in_h():
    z = np.random.default_rng(7).standard_normal((50, 5))
    s = sample_covariance(z)
    diags = precision_diagonals(z)
    r1 = risk_estimate(s, 50, 0.1, diags)
    r2 = risk_estimate(s, 50, 1.0, diags)
    assert r1.diagonal_sum == r2.diagonal_sum == pytest.approx(np.sum(diags), abs=0)
    without = risk_estimate(s, 50, 0.1)
    assert r1.value - without.value == pytest.approx(np.sum(diags), rel=1e-12)


def test_risk_scalar_closed_chain():
    rng = np.random.default_rng(8)
    y = rng.standard_normal((30, 1))
    s = sample_covariance(y)
    lam = float(s.values[0, 0])
    diags = precision_diagonals(y)
    r = risk_estimate(s, 30, 0.25, diags)
    delta = lam * 30 / 29
    expect = (30 * lam / delta ** 2) / 30 - 2 * 28 * (1 / delta) / 30 + diags[0]
    assert r.value == pytest.approx(expect, rel=1e-12)


def test_risk_reports_clamping():
    q, _ = np.linalg.qr(np.random.default_rng(9).standard_normal((4, 4)))
    s = q @ np.diag([0.95, 1.0, 1.0, 1.0]) @ q.T
    r = risk_estimate(s, 7, 0.001)
    assert r.clamp_count >= 1
    assert np.isfinite(r.value)


# grid


def test_grid_centers_on_default_bandwidth_exactly():
    grid = default_bandwidth_grid(100, 20)
    h0 = default_bandwidth(100, 20)
    assert grid.size == 15
    assert grid[7] == h0
    assert grid[0] == pytest.approx(h0 / 10, rel=1e-12)
    assert grid[-1] == pytest.approx(10 * h0, rel=1e-12)
    assert np.all(np.diff(grid) > 0)


def test_grid_even_size_and_span():
    grid = default_bandwidth_grid(60, 12, size=8, span=4.0)
    h0 = default_bandwidth(60, 12)
    assert grid.size == 8
    assert grid[0] == pytest.approx(h0 / 4, rel=1e-12)
    assert grid[-1] == pytest.approx(4 * h0, rel=1e-12)


def test_grid_validation():
    with pytest.raises(DomainError):
        default_bandwidth_grid(50, 5, size=1)
    with pytest.raises(DomainError):
        default_bandwidth_grid(50, 5, span=1.0)


# selection


def test_select_single_point_grid():
    s = sample_covariance(np.random.default_rng(10).standard_normal((25, 3)))
    chosen = select_bandwidth(s, 25, [0.37])
    assert chosen.h == 0.37
    assert chosen.index == 0
    assert chosen.risks.shape == (1,)


def test_select_achieves_grid_minimum():
    s = sample_covariance(np.random.default_rng(11).standard_normal((60, 8)))
    h0 = default_bandwidth(60, 8)
    grid = [h0 / 4, h0, 4 * h0]
    chosen = select_bandwidth(s, 60, grid)
    risks = [risk_estimate(s, 60, h).value for h in grid]
    assert chosen.h == grid[int(np.argmin(risks))]
    assert np.allclose(chosen.risks, risks)


def test_select_grid_order_invariance():
    s = sample_covariance(np.random.default_rng(12).standard_normal((40, 5)))
    grid = default_bandwidth_grid(40, 5, size=7)
    shuffled = grid[[3, 0, 6, 1, 5, 2, 4]]
    assert select_bandwidth(s, 40, grid).h == select_bandwidth(s, 40, shuffled).h


def fake_risks(values):
    def fake(s, n, h, diagonals=None):
        return SimpleNamespace(value=values[float(h)])
    return fake


def test_select_tie_break_prefers_larger_h(monkeypatch):
    s = np.diag([1.0, 2.0])
    monkeypatch.setattr(
        tuning, "risk_estimate", fake_risks({1.0: 1.5, 2.0: 1.5, 3.0: 2.0})
    )
    assert select_bandwidth(s, 30, [1.0, 2.0, 3.0]).h == 2.0


def test_select_skips_non_finite_risks(monkeypatch):
    s = np.diag([1.0, 2.0])
    monkeypatch.setattr(
        tuning, "risk_estimate", fake_risks({1.0: np.nan, 2.0: 5.0})
    )
    assert select_bandwidth(s, 30, [1.0, 2.0]).h == 2.0
    monkeypatch.setattr(
        tuning, "risk_estimate", fake_risks({1.0: np.nan, 2.0: np.inf})
    )
    with pytest.raises(TuningError):
        select_bandwidth(s, 30, [1.0, 2.0])


def test_select_validation():
    s = np.diag([1.0, 2.0])
    with pytest.raises(DomainError):
        select_bandwidth(s, 30, [])
    with pytest.raises(DomainError):
        select_bandwidth(s, 30, [0.5, -1.0])
    with pytest.raises(InsufficientDataError):
        select_bandwidth(np.eye(4), 5, [0.5])
