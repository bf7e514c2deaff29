"""Kernel transform checks against slow, independently coded references."""

import numpy as np
import pytest

from fracmle.errors import ResourceError
from fracmle.grid import TimeGrid
from fracmle.kernel import (KernelTable, compute_qh, compute_z,
                            fundamental_martingale, kernel_integral, kernel_kh,
                            norros_constants, weight_omega)
from fracmle.models import DiffusionSpec, DriftModel


def _mp_constants(H):
    """High-precision reference for (kappa, lambda)."""
    import mpmath
    mpmath.mp.dps = 40
    H = mpmath.mpf(H)
    kappa = 2 * H * mpmath.gamma(mpmath.mpf(3) / 2 - H) * mpmath.gamma(H + mpmath.mpf(1) / 2)
    lam = (2 * H * mpmath.gamma(3 - 2 * H) * mpmath.gamma(H + mpmath.mpf(1) / 2)
           / mpmath.gamma(mpmath.mpf(3) / 2 - H))
    return float(kappa), float(lam)


@pytest.mark.parametrize("H", [0.51, 0.6, 0.7, 0.8, 0.9, 0.99])
def test_constants_against_high_precision(H):
    c = norros_constants(H)
    kappa, lam = _mp_constants(H)
    assert c.kappa == pytest.approx(kappa, rel=1e-12)
    assert c.lam == pytest.approx(lam, rel=1e-12)


def test_gamma_agrees_with_reference_on_interval():
    import math

    import mpmath
    mpmath.mp.dps = 30
    for x in np.linspace(0.1, 3.0, 59):
        assert math.gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-12)


def test_constants_are_unity_at_half():
    c = norros_constants(0.5)
    assert c.kappa == pytest.approx(1.0, rel=1e-15)
    assert c.lam == pytest.approx(1.0, rel=1e-15)


def test_kernel_domain_and_half_case():
    with pytest.raises(ValueError):
        kernel_kh(1.0, 0.0, 0.7)
    with pytest.raises(ValueError):
        kernel_kh(1.0, 1.0, 0.7)
    with pytest.raises(ValueError):
        kernel_kh(1.0, 1.5, 0.7)
    assert kernel_kh(1.0, 0.3, 0.5) == pytest.approx(1.0, rel=1e-15)


def test_omega_power_law():
    H = 0.7
    c = norros_constants(H)
    t = np.array([0.0, 0.5, 2.0])
    expected = t ** (2 - 2 * H) / c.lam
    assert np.allclose(weight_omega(t, H), expected, rtol=1e-15)
    assert weight_omega(1.0, 0.5) == pytest.approx(1.0)


def test_kernel_integral_interior_sum_brute_force():
    # independent double loop over i = 2..k-1
    H, grid = 0.7, TimeGrid(1.0, 20)
    rng = np.random.default_rng(5)
    ratio = rng.normal(size=grid.steps + 1)
    for k in (0, 1, 2, 3, 11, 20):
        if k <= 2:
            assert kernel_integral(ratio, grid, k, H) == 0.0
            continue
        acc = 0.0
        for i in range(2, k):
            acc += kernel_kh(grid.points[k], grid.points[i], H) * ratio[i] * grid.dt
        assert kernel_integral(ratio, grid, k, H) == pytest.approx(acc, rel=1e-13)


def test_table_rows_match_scalar_kernel():
    H, grid = 0.85, TimeGrid(2.0, 16)
    tab = KernelTable(grid, H)
    W = tab.weights_matrix
    for k in range(grid.steps + 1):
        for i in range(grid.steps + 1):
            if 2 <= i <= k - 1:
                assert W[k, i] == pytest.approx(
                    kernel_kh(grid.points[k], grid.points[i], H), rel=1e-13)
            else:
                assert W[k, i] == 0.0
    assert np.all(np.isfinite(W))


def test_integral_series_matches_scalar_integral():
    H, grid = 0.6, TimeGrid(1.0, 25)
    tab = KernelTable(grid, H)
    rng = np.random.default_rng(3)
    ratio = rng.normal(size=grid.steps + 1)
    series = tab.integral_series(ratio)
    for k in range(grid.steps + 1):
        assert series[k] == pytest.approx(kernel_integral(ratio, grid, k, H),
                                          rel=1e-12, abs=1e-15)


def test_zero_drift_gives_zero_series():
    grid = TimeGrid(1.0, 10)
    tab = KernelTable(grid, 0.7)
    series = tab.integral_series(np.zeros(11))
    assert np.array_equal(series, np.zeros(11))
    q = tab.q_from_integral(series)
    assert np.array_equal(q, np.zeros(11))


def test_z_transform_brute_force():
    H, grid = 0.75, TimeGrid(1.0, 12)
    tab = KernelTable(grid, H)
    rng = np.random.default_rng(8)
    g = rng.normal(size=grid.steps)  # scaled increments, index i = 0..n-1
    z = tab.z_from_increments(g)
    for k in range(grid.steps + 1):
        acc = sum(tab.weights_matrix[k, i] * g[i] for i in range(2, k))
        assert z[k] == pytest.approx(acc, rel=1e-12, abs=1e-15)


def test_z_transform_columns_independent():
    grid = TimeGrid(1.0, 12)
    tab = KernelTable(grid, 0.7)
    rng = np.random.default_rng(2)
    G = rng.normal(size=(grid.steps, 3))
    Z = tab.z_from_increments(G)
    for j in range(3):
        assert np.allclose(Z[:, j], tab.z_from_increments(G[:, j]))


def test_q_is_omega_difference_quotient():
    grid = TimeGrid(2.0, 8)
    tab = KernelTable(grid, 0.7)
    integral = np.cumsum(np.linspace(0.0, 1.0, 9))
    q = tab.q_from_integral(integral)
    assert q[0] == 0.0
    assert np.allclose(q[1:], np.diff(integral) / tab.domega)


def test_refinement_consistency_of_kernel_integral():
    # smooth integrand: the discrete integral at T settles as the grid refines
    H, T = 0.7, 1.0
    f = lambda t: np.sin(t) + 2.0
    vals = []
    for n in (100, 200, 400, 800, 1600):
        grid = TimeGrid(T, n)
        vals.append(kernel_integral(f(grid.points), grid, n, H))
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] < diffs[:-1])  # monotone shrinking gaps
    assert diffs[-1] < diffs[0] / 4


def test_compute_z_and_qh_wrappers():
    grid = TimeGrid(1.0, 16)
    rng = np.random.default_rng(21)
    values = np.cumsum(np.concatenate([[0.0], rng.normal(size=16)]))
    sigma = DiffusionSpec.constant(2.0)
    drift = DriftModel.affine(1.0, 0.5)
    z = compute_z(values, sigma, 0.7, grid=grid)
    tab = KernelTable(grid, 0.7)
    assert np.allclose(z.values, tab.z_from_increments(np.diff(values) / 2.0))
    q = compute_qh(values, drift, sigma, 0.7, table=tab)
    ratio = drift(values) / 2.0
    assert np.allclose(q.values, tab.q_from_integral(tab.integral_series(ratio)))
    assert np.array_equal(q.weights, tab.omega)


def test_fundamental_martingale_is_kernel_transform_of_fbm():
    from fracmle.fbm import generate_fbm_paths
    grid = TimeGrid(1.0, 32)
    path = generate_fbm_paths(grid, 0.8, 1, master_seed=17)[0]
    tab = KernelTable(grid, 0.8)
    m = fundamental_martingale(path, tab)
    assert np.allclose(m.values, tab.z_from_increments(np.diff(path.values)))
    assert m.values[0] == 0.0


def test_table_size_guard():
    with pytest.raises(ResourceError):
        KernelTable(TimeGrid(1.0, 20000), 0.7)
