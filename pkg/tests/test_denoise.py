import numpy as np
import pytest

from conftest import pure_noise
from sarscale.denoise import (ESA_K, SIMULATION_BASELINE_K, DenoiseConfig, apply, scale_grid,
                              static_defaults)
from sarscale.errors import GeometryMismatch
from sarscale.estimate import estimate_scaling
from sarscale.fixtures import as_raster, textured_scene
from sarscale.noise_field import SceneRaster
from sarscale.objective import ObjectiveParams

KEEP = DenoiseConfig(negative_policy="keep")


@pytest.fixture
def scene(small_field):
    rng = np.random.default_rng(0)
    return as_raster(textured_scene(rng, small_field.shape, level=80.0) + small_field.values)


def test_k_zero_is_identity(scene, small_field):
    out = apply(scene, small_field, np.zeros(5), KEEP)
    np.testing.assert_array_equal(out.values, scene.values)


def test_k_one_is_plain_subtraction(scene, small_field):
    out = apply(scene, small_field, ESA_K, KEEP)
    np.testing.assert_array_equal(out.values, scene.values - small_field.values)


def test_per_subswath_scaling(scene, small_field):
    k = np.array([1.5, 0.8, 1.0, 1.1, 0.9])
    out = apply(scene, small_field, k, KEEP)
    for a in range(5):
        m = small_field.labels == a
        np.testing.assert_allclose(out.values[m], scene.values[m] - k[a] * small_field.values[m])


def test_exact_scale_denoises_to_zero(medium_cal, medium_field):
    x = pure_noise(medium_field, 1.3)
    est, _ = estimate_scaling(x, medium_field, medium_cal,
                              ObjectiveParams(epsilon=8, lambdas=(0.0,) * 5))
    out = apply(x, medium_field, est.k, DenoiseConfig(negative_policy="clamp_zero"))
    assert np.max(np.abs(out.values)) < 1e-6 * medium_field.values.max()


def test_clamp_and_dn_units(small_field):
    x = SceneRaster(np.full(small_field.shape, 100.0), np.ones(small_field.shape, bool))
    k = np.full(5, 2.0)
    dn = apply(x, small_field, k, DenoiseConfig(output_units="dn"))
    assert dn.values.min() >= 0
    expected = np.sqrt(np.maximum(100.0 - 2 * small_field.values, 0))
    np.testing.assert_allclose(dn.values, expected)
    dn2 = apply(x, small_field, k, DenoiseConfig(output_units="dn2"))
    assert dn2.values.min() < 0  # keep is the dn2 default
    clamped = apply(x, small_field, k, DenoiseConfig(negative_policy="clamp_zero"))
    assert clamped.values.min() == 0.0


def test_masked_cells_pass_through(scene, small_field):
    mask = scene.valid_mask.copy()
    mask[5:9, 20:60] = False
    raster = SceneRaster(scene.values, mask)
    out = apply(raster, small_field, np.full(5, 3.0), DenoiseConfig(output_units="dn2",
                                                                     negative_policy="clamp_zero"))
    np.testing.assert_array_equal(out.values[~mask], scene.values[~mask])
    np.testing.assert_array_equal(out.valid_mask, mask)


def test_linearity(scene, small_field):
    k1 = np.array([1.2, 0.9, 1.0, 1.05, 0.97])
    k2 = np.array([0.1, -0.2, 0.3, 0.0, 0.5])
    zero = SceneRaster(np.zeros(small_field.shape), scene.valid_mask)
    lhs = apply(scene, small_field, k1, KEEP).values + apply(zero, small_field, k2, KEEP).values
    np.testing.assert_allclose(lhs, apply(scene, small_field, k1 + k2, KEEP).values,
                               rtol=1e-12, atol=1e-9)


def test_static_defaults_verbatim():
    assert static_defaults("HV") == (1.438, 0.942, 0.980, 1.010, 0.999)
    assert static_defaults("vh") == (1.37, 0.932, 0.969, 0.993, 1.000)
    assert SIMULATION_BASELINE_K == (1.4, 0.925, 0.985, 1.0, 1.0)
    with pytest.raises(ValueError):
        static_defaults("HH")


def test_config_validation():
    with pytest.raises(ValueError):
        DenoiseConfig(mode="static")
    with pytest.raises(ValueError):
        DenoiseConfig(output_units="db")
    assert DenoiseConfig(output_units="dn").policy == "clamp_zero"
    assert DenoiseConfig().policy == "keep"


def test_shape_mismatch(small_field):
    with pytest.raises(GeometryMismatch):
        apply(as_raster(np.ones((3, 3))), small_field, ESA_K)


def test_scale_grid_zero_outside(small_field):
    grid = scale_grid(small_field, np.arange(1.0, 6.0))
    assert set(np.unique(grid)) <= {1.0, 2.0, 3.0, 4.0, 5.0, 0.0}
    with pytest.raises(ValueError):
        scale_grid(small_field, [1, 2, np.nan, 4, 5])
