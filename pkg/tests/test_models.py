import numpy as np
import pytest

from fracmle.grid import TimeGrid
from fracmle.models import DiffusionSpec, DriftModel


def test_constant_drift_vectorizes():
    b = DriftModel.constant(2.5)
    x = np.array([-1.0, 0.0, 3.0])
    assert np.array_equal(b(x), np.full(3, 2.5))
    assert b.is_constant


def test_affine_drift():
    b = DriftModel.affine(1.0, -0.5)
    assert np.allclose(b(np.array([0.0, 2.0])), [1.0, 0.0])
    assert not b.is_constant


def test_callable_growth_bound_enforced():
    b = DriftModel.from_callable(lambda x: x ** 2, growth_bound=1.0)
    # quadratic growth breaks |b(x)| <= K(1+|x|) once |x| is large
    with pytest.raises(ValueError):
        b(np.array([10.0]))
    ok = DriftModel.from_callable(np.sin, growth_bound=1.0)
    assert np.allclose(ok(np.array([0.3])), np.sin(0.3))


def test_drift_descriptor_roundtrip():
    for b in (DriftModel.constant(-0.8), DriftModel.affine(5.0, 5.0)):
        rebuilt = DriftModel.from_descriptor(b.describe())
        x = np.linspace(-2, 2, 7)
        assert np.array_equal(rebuilt(x), b(x))


def test_callable_descriptor_not_rebuildable():
    b = DriftModel.from_callable(np.sin, growth_bound=1.0)
    with pytest.raises(ValueError):
        DriftModel.from_descriptor(b.describe())


def test_diffusion_positive():
    with pytest.raises(ValueError):
        DiffusionSpec.constant(0.0)
    with pytest.raises(ValueError):
        DiffusionSpec.constant(-1.0)
    with pytest.raises(ValueError):
        DiffusionSpec.tabulated(np.array([1.0, 0.0, 1.0]))


def test_tabulated_diffusion_length_check():
    grid = TimeGrid(1.0, 4)
    spec = DiffusionSpec.tabulated(np.linspace(1.0, 2.0, 5))
    assert spec.at_grid(grid).shape == (5,)
    with pytest.raises(ValueError):
        spec.at_grid(TimeGrid(1.0, 8))


def test_constant_diffusion_at_grid():
    grid = TimeGrid(2.0, 10)
    assert np.array_equal(DiffusionSpec.constant(0.7).at_grid(grid),
                          np.full(11, 0.7))
