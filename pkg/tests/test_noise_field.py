import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import banded_cal, uniform_cal
from sarscale.calibration import (AzimuthNoiseVector, CalibrationSet, RangeNoiseVector,
                                  SubswathRectangle)
from sarscale.errors import GeometryMismatch
from sarscale.noise_field import (NO_SUBSWATH, SceneRaster, azimuth_line_means,
                                  build_noise_field, half_burst_period)

# A 12-line x 20-sample excerpt in the layout of an EW noise annotation:
# two range vectors, one azimuth block, knots spaced irregularly.
EXCERPT = CalibrationSet(
    range_vectors=(
        RangeNoiseVector(2, (0, 7, 13, 19), (231.5, 198.25, 204.0, 246.75)),
        RangeNoiseVector(10, (0, 7, 13, 19), (239.0, 201.5, 210.5, 251.0)),
    ),
    azimuth_vectors=(
        AzimuthNoiseVector("EW2", 0, 11, 0, 19, (0, 4, 9, 11), (1.1, 0.9, 1.05, 1.0)),
    ),
    rectangles=(SubswathRectangle("EW2", 0, 11, 0, 19),),
    burst_counts={"EW2": 2},
    scene_rows=12,
    scene_cols=20,
)


def _lerp(x0, y0, x1, y1, x):
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def _hand_value(i, j):
    """Scalar bilinear evaluation written out for the excerpt above."""
    def along_range(rv):
        px, val = rv.range_pixels, rv.noise_values
        for a in range(len(px) - 1):
            if px[a] <= j <= px[a + 1]:
                return _lerp(px[a], val[a], px[a + 1], val[a + 1], j)
        raise AssertionError

    top, bottom = EXCERPT.range_vectors
    r = _lerp(top.azimuth_line, along_range(top), bottom.azimuth_line, along_range(bottom),
              min(max(i, 2), 10))
    av = EXCERPT.azimuth_vectors[0]
    lines, d = av.azimuth_lines, av.noise_values
    for a in range(len(lines) - 1):
        if lines[a] <= i <= lines[a + 1]:
            return r * _lerp(lines[a], d[a], lines[a + 1], d[a + 1], i)
    raise AssertionError


def test_hand_interpolated_patch():
    field = build_noise_field(EXCERPT)
    # rows 0-1 exercise the constant hold above the first range vector
    rows, cols = range(0, 10, 2), range(3, 18, 3)
    for i in rows:
        for j in cols:
            want = _hand_value(i, j)
            assert field.values[i, j] == pytest.approx(want, rel=1e-9)


def test_known_cell_by_hand():
    # row 6 is halfway between vectors; column 10 halfway between knots 7 and 13
    r_top = (198.25 + 204.0) / 2
    r_bot = (201.5 + 210.5) / 2
    d = 0.9 + (1.05 - 0.9) * (6 - 4) / 5
    field = build_noise_field(EXCERPT)
    assert field.values[6, 10] == pytest.approx((r_top + r_bot) / 2 * d, rel=1e-12)


def test_constant_tables_give_uniform_field():
    field = build_noise_field(uniform_cal(7, 9, range_value=3.5, gain=0.4))
    np.testing.assert_allclose(field.values, 1.4, rtol=1e-15)


def test_midpoint_between_range_vectors():
    cal = CalibrationSet(
        (RangeNoiseVector(0, (0, 3), (0.0, 0.0)), RangeNoiseVector(10, (0, 3), (2.0, 2.0))),
        (), (SubswathRectangle("EW1", 0, 10, 0, 3),), {"EW1": 1}, 11, 4)
    field = build_noise_field(cal)
    np.testing.assert_allclose(field.values[5], 1.0)


def test_knots_reproduced(small_cal, small_field):
    gain = {}
    for av in small_cal.azimuth_vectors:
        for line, d in zip(av.azimuth_lines, av.noise_values):
            for j in (av.first_range_sample, av.last_range_sample):
                gain[(line, j)] = d
    checked = 0
    for rv in small_cal.range_vectors:
        for px, val in zip(rv.range_pixels, rv.noise_values):
            key = (rv.azimuth_line, px)
            if key in gain:
                assert small_field.values[key] == pytest.approx(val * gain[key], rel=1e-12)
                checked += 1
    assert checked > 10


def test_values_bounded_by_knot_products(small_cal, small_field):
    r = [v for rv in small_cal.range_vectors for v in rv.noise_values]
    d = [v for av in small_cal.azimuth_vectors for v in av.noise_values]
    inside = small_field.valid
    assert small_field.values[inside].min() >= min(r) * min(d) * (1 - 1e-12)
    assert small_field.values[inside].max() <= max(r) * max(d) * (1 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_bilinear_convexity(data):
    """Each cell lies between the smallest and largest bracketing knot products."""
    vals = data.draw(st.lists(st.floats(0, 1e4), min_size=6, max_size=6))
    gains = data.draw(st.lists(st.floats(0.1, 3), min_size=2, max_size=2))
    cal = CalibrationSet(
        (RangeNoiseVector(1, (0, 4, 9), tuple(vals[:3])),
         RangeNoiseVector(8, (0, 4, 9), tuple(vals[3:]))),
        (AzimuthNoiseVector("EW3", 0, 9, 0, 9, (0, 9), tuple(gains)),),
        (SubswathRectangle("EW3", 0, 9, 0, 9),), {"EW3": 1}, 10, 10)
    f = build_noise_field(cal).values
    lo = min(vals) * min(gains)
    hi = max(vals) * max(gains)
    assert np.all(f >= lo - 1e-9 * max(hi, 1)) and np.all(f <= hi + 1e-9 * max(hi, 1))


def test_cells_outside_rectangles_invalid():
    cal = CalibrationSet(uniform_cal(6, 8).range_vectors, (),
                         (SubswathRectangle("EW1", 0, 5, 0, 3),), {"EW1": 1}, 6, 8)
    field = build_noise_field(cal)
    assert np.all(field.labels[:, 4:] == NO_SUBSWATH)
    assert np.all(field.values[:, 4:] == 0)
    assert field.valid[:, :4].all()


def test_rectangle_outside_scene_is_geometry_mismatch():
    cal = CalibrationSet(uniform_cal(6, 8).range_vectors, (),
                         (SubswathRectangle("EW1", 0, 6, 0, 7),), {"EW1": 1}, 6, 8)
    with pytest.raises(GeometryMismatch):
        build_noise_field(cal)


# --- half burst period -------------------------------------------------------


@pytest.mark.parametrize("n_az, n_burst, rho", [(10000, 50, 100), (2, 1, 1), (9999, 50, 100),
                                               (10, 50, 1), (30, 4, 4)])
def test_half_burst_period(n_az, n_burst, rho):
    cal = banded_cal(n_az, [2], bursts={"EW1": n_burst})
    assert half_burst_period(cal, "EW1") == rho


@pytest.mark.parametrize("n_az", [17, 240, 1001, 9999])
@pytest.mark.parametrize("n_burst", [1, 3, 7, 50])
def test_half_period_consistency(n_az, n_burst):
    cal = banded_cal(n_az, [2], bursts={"EW1": n_burst})
    rho = half_burst_period(cal, "EW1")
    if n_az >= 2 * n_burst:
        assert abs(2 * rho * n_burst - n_az) <= n_burst
    assert rho >= 1


def test_half_period_uses_total_extent_of_all_rectangles(small_cal, small_field):
    for a in small_cal.subswaths:
        assert small_cal.azimuth_extent(a) == small_cal.scene_rows
        n = small_cal.burst_counts[a]
        assert small_field.half_period[a] == max(1, int(np.floor(64 / (2 * n) + 0.5)))


# --- azimuth line means ------------------------------------------------------


def test_line_means_of_ones():
    cal = banded_cal(5, [3, 4])
    field = build_noise_field(cal)
    lm = azimuth_line_means(SceneRaster.from_values(np.ones((5, 7))), field, "EW2")
    np.testing.assert_array_equal(lm.x, 1.0)
    assert lm.count.tolist() == [4] * 5


def test_line_means_skip_masked_half():
    cal = banded_cal(2, [8])
    field = build_noise_field(cal)
    x = np.arange(16, dtype=float).reshape(2, 8) + 1
    mask = np.ones_like(x, bool)
    mask[0, 4:] = False
    lm = azimuth_line_means(SceneRaster(x, mask), field, "EW1")
    assert lm.x[0] == pytest.approx(np.mean([1, 2, 3, 4]))
    assert lm.x[1] == pytest.approx(np.mean(np.arange(9, 17)))


def test_line_means_flag_empty_lines():
    cal = banded_cal(3, [4])
    field = build_noise_field(cal)
    mask = np.ones((3, 4), bool)
    mask[1] = False
    lm = azimuth_line_means(SceneRaster(np.ones((3, 4)), mask), field, "EW1")
    assert lm.valid.tolist() == [True, False, True]


def test_line_means_brute_force():
    rng = np.random.default_rng(4)
    cal = banded_cal(8, [3, 5], levels=[2.0, 5.0])
    field = build_noise_field(cal)
    x = rng.uniform(0, 10, size=(8, 8))
    mask = rng.random((8, 8)) > 0.3
    raster = SceneRaster(x, mask)
    for label, a in enumerate(("EW1", "EW2")):
        lm = azimuth_line_means(raster, field, a)
        for i in range(8):
            xs, ys = [], []
            for j in range(8):
                if field.labels[i, j] == label and mask[i, j]:
                    xs.append(x[i, j])
                    ys.append(field.values[i, j])
            if xs:
                assert lm.x[i] == pytest.approx(sum(xs) / len(xs), rel=1e-12)
                assert lm.y[i] == pytest.approx(sum(ys) / len(ys), rel=1e-12)
            else:
                assert not lm.valid[i]


def test_mask_threshold():
    r = SceneRaster.from_values(np.array([[0.0, 1.0], [np.nan, 3.0]]), mask_threshold=1.0)
    assert r.valid_mask.tolist() == [[False, False], [False, True]]
