import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from safetree import density
from safetree.errors import DomainError


def test_silverman_matches_closed_formula_on_normal_sample():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(100)
    h = density.bandwidth_silverman(x)
    # independent evaluation of the rule of thumb
    sd = np.std(x, ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    expected = 0.9 * min(sd, (q75 - q25) / 1.34) * 100 ** (-0.2)
    assert h == pytest.approx(expected, rel=1e-12)
    assert 0.1 < h < 0.6


def test_silverman_all_equal_falls_back():
    assert density.bandwidth_silverman([2.5] * 10) == pytest.approx(1e-3)


def test_silverman_scaling_homogeneity():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(50)
    assert density.bandwidth_silverman(2 * x) == pytest.approx(
        2 * density.bandwidth_silverman(x), rel=1e-12
    )


def test_silverman_needs_two_samples():
    with pytest.raises(DomainError):
        density.bandwidth_silverman([1.0])


def test_kde_single_sample_peak_height():
    curve = density.kde_estimate([0.0], bandwidth=1.0, grid_size=256)
    nearest = int(np.argmin(np.abs(curve.grid)))
    assert curve.density[nearest] == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-3)
    assert int(np.argmax(curve.density)) == nearest


def test_kde_integral_is_one():
    rng = np.random.default_rng(1)
    for sample in [rng.standard_normal(200), rng.uniform(0, 5, 400), [0.3, 7.0]]:
        h = density.bandwidth_silverman(sample)
        curve = density.kde_estimate(sample, h, 256)
        integral = np.trapezoid(curve.density, curve.grid)
        assert abs(integral - 1.0) < 0.02


def test_kde_two_separated_samples_bimodal():
    curve = density.kde_estimate([-10.0, 10.0], bandwidth=0.5, grid_size=256)
    modes = density.detect_modes(curve, 0.05)
    assert len(modes) == 2
    positions = curve.grid[modes]
    assert positions[0] == pytest.approx(-10, abs=0.2)
    assert positions[1] == pytest.approx(10, abs=0.2)


def test_kde_rejects_bad_inputs():
    with pytest.raises(DomainError):
        density.kde_estimate([1.0], bandwidth=0.0)
    with pytest.raises(DomainError):
        density.kde_estimate([1.0], bandwidth=1.0, grid_size=8)
    with pytest.raises(DomainError):
        density.kde_estimate([], bandwidth=1.0)


def test_kde_translation_equivariance():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(150)
    a = density.kde_estimate(x, 0.4, 128)
    b = density.kde_estimate(x + 3.5, 0.4, 128)
    assert np.allclose(a.grid + 3.5, b.grid)
    assert np.allclose(a.density, b.density)


def test_detect_modes_unimodal():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(400)
    curve = density.kde_estimate(x, density.bandwidth_silverman(x), 256)
    modes = density.detect_modes(curve, 0.05)
    assert len(modes) == 1
    assert curve.grid[modes[0]] == pytest.approx(0.0, abs=0.4)


def test_detect_modes_minor_bump_excluded():
    # mixture with a second bump at about 1% of the main peak height
    grid = np.linspace(-5, 15, 512)
    main = np.exp(-0.5 * grid**2)
    bump = 0.01 * np.exp(-0.5 * ((grid - 10) / 0.3) ** 2)
    curve = density.DensityCurve(grid=grid, density=main + bump, bandwidth=1.0)
    modes = density.detect_modes(curve, 0.05)
    # oracle: direct grid scan for maxima above the floor
    dens = curve.density
    floor = 0.05 * dens.max()
    scan = [
        i
        for i in range(1, len(dens) - 1)
        if dens[i] > dens[i - 1] and dens[i] > dens[i + 1] and dens[i] >= floor
    ]
    assert modes == scan
    assert len(modes) == 1


def test_detect_modes_scaling_invariance():
    rng = np.random.default_rng(11)
    x = np.concatenate([rng.normal(-3, 0.5, 300), rng.normal(3, 0.5, 300)])
    curve = density.kde_estimate(x, 0.4, 256)
    scaled = density.DensityCurve(
        grid=curve.grid, density=curve.density * 7.3, bandwidth=curve.bandwidth
    )
    assert density.detect_modes(curve, 0.05) == density.detect_modes(scaled, 0.05)


def test_partition_single_mode_spans_samples():
    x = np.array([0.2, 0.4, 0.9])
    curve = density.kde_estimate(x, 0.3, 64)
    ivs = density.partition_intervals(x, curve, [int(np.argmax(curve.density))], dim=0)
    assert len(ivs) == 1
    assert ivs.intervals[0] == (0.2, 0.9)


def test_partition_two_clusters_brackets_each():
    rng = np.random.default_rng(4)
    left = rng.normal(-10, 0.05, 200)
    right = rng.normal(10, 0.05, 200)
    x = np.concatenate([left, right])
    curve = density.kde_estimate(x, 0.5, 256)
    modes = density.detect_modes(curve, 0.05)
    assert len(modes) == 2
    ivs = density.partition_intervals(x, curve, modes, dim=3)
    assert ivs.dim == 3
    assert len(ivs) == 2
    assert ivs.intervals[0] == (left.min(), left.max())
    assert ivs.intervals[1] == (right.min(), right.max())


def test_partition_all_identical_samples():
    x = np.full(20, 1.5)
    curve = density.kde_estimate(x, 1e-3, 64)
    modes = density.detect_modes(curve, 0.05)
    ivs = density.partition_intervals(x, curve, modes, dim=0)
    assert len(ivs) == 1
    assert ivs.intervals[0] == (1.5, 1.5)


def test_partition_empty_samples_rejected():
    curve = density.kde_estimate([0.0, 1.0], 0.3, 64)
    with pytest.raises(DomainError):
        density.partition_intervals([], curve, [0], dim=0)


@given(st.lists(st.floats(-50, 50), min_size=5, max_size=60))
@settings(max_examples=60, deadline=None)
def test_partition_covers_every_sample(values):
    x = np.asarray(values)
    if np.ptp(x) == 0:
        h = 1e-3
    else:
        h = density.bandwidth_silverman(x)
    curve = density.kde_estimate(x, h, 64)
    modes = density.detect_modes(curve, 0.05)
    ivs = density.partition_intervals(x, curve, modes, dim=0)
    for v in x:
        assert sum(1 for lo, hi in ivs.intervals if lo <= v <= hi) >= 1
    # and each sample sits in exactly one interval unless intervals touch
    interiors = sum(
        1 for v in x for lo, hi in ivs.intervals if lo < v < hi
    )
    assert interiors <= len(x) * len(ivs)


def test_impurity_full_cover_is_one():
    ivs = density.IntervalSet(intervals=((0.0, 1.0),), dim=0)
    assert density.impurity(ivs, 0.0, 1.0) == pytest.approx(1.0)


def test_impurity_arithmetic():
    ivs = density.IntervalSet(intervals=((0.1, 0.3), (0.7, 0.9)), dim=0)
    assert density.impurity(ivs, 0.0, 1.0) == pytest.approx(0.4)


def test_impurity_zero_width_parent_rejected():
    ivs = density.IntervalSet(intervals=((0.0, 0.0),), dim=0)
    with pytest.raises(DomainError):
        density.impurity(ivs, 0.0, 0.0)


def test_interval_set_rejects_overlap():
    with pytest.raises(DomainError):
        density.IntervalSet(intervals=((0.0, 0.5), (0.4, 0.9)), dim=0)
    # touching endpoints are allowed
    ivs = density.IntervalSet(intervals=((0.0, 0.5), (0.5, 0.9)), dim=0)
    assert len(ivs) == 2
