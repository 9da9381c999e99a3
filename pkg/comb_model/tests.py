import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from comb_model.comb_service import (
    analytic_echo_efficiency,
    auto_spectral_grid,
    build_depth_profile,
    check_spectral_grid,
    comb_finesse,
    export_depth_profile,
    max_chirped_duration,
    multimode_capacity,
)
from comb_model.models import CombSpec, SpectralGrid
from core.exceptions import (
    DomainError,
    GridCoverageError,
    GridError,
    GridResolutionError,
    NoStorageWindowError,
)

TWO_PI = 2 * math.pi


def comb(width_hz, spacing_hz, count, depth):
    return CombSpec(TWO_PI * width_hz, TWO_PI * spacing_hz, count, depth)


@pytest.fixture
def pr_comb():
    return comb(25e3, 100e3, 40, 4)


@pytest.fixture
def narrow_comb():
    return comb(1e3, 4e3, 1000, 4)


@pytest.fixture
def eu_comb():
    return comb(2e3, 20e3, 600, 40)


def chirped_gate(bandwidth, chirp_product):
    """T_cut = 7 tau_c with Delta_max = Gamma/2"""
    return 7 * chirp_product / (bandwidth / 2)


def test_derived_quantities(pr_comb, eu_comb):
    assert pr_comb.bandwidth == pytest.approx(TWO_PI * 4e6)
    assert pr_comb.echo_time == pytest.approx(10e-6)
    assert pr_comb.mode_duration == pytest.approx(1.5e-6)
    assert eu_comb.bandwidth == pytest.approx(TWO_PI * 12e6)
    assert eu_comb.echo_time == pytest.approx(50e-6)
    assert eu_comb.mode_duration == pytest.approx(0.5e-6)


def test_finesse(pr_comb, eu_comb):
    assert comb_finesse(pr_comb) == pytest.approx(4)
    assert comb_finesse(eu_comb) == pytest.approx(10)
    # touching peaks are still a valid comb
    assert comb_finesse(comb(10e3, 10e3, 5, 1)) == pytest.approx(1)


def test_comb_validation():
    with pytest.raises(DomainError):
        comb(10e3, 5e3, 10, 1)
    with pytest.raises(DomainError):
        comb(0, 5e3, 10, 1)
    with pytest.raises(DomainError):
        comb(1e3, 5e3, 0, 1)
    with pytest.raises(DomainError):
        comb(1e3, 5e3, 10, -1)


def test_capacity_without_gate(pr_comb):
    real, integer = multimode_capacity(pr_comb, 0.0)
    assert real == pytest.approx(20 / 3)
    assert integer == 6


def test_capacity_short_chirped_gate(pr_comb):
    t_cut = chirped_gate(pr_comb.bandwidth, 2)
    assert t_cut == pytest.approx(1.114e-6, rel=1e-3)
    real, integer = multimode_capacity(pr_comb, t_cut)
    assert real == pytest.approx(5.93, abs=0.01)
    assert integer in (5, 6)


def test_capacity_narrow_comb(narrow_comb):
    long_real, long_int = multimode_capacity(narrow_comb, chirped_gate(narrow_comb.bandwidth, 15.7))
    short_real, short_int = multimode_capacity(narrow_comb, chirped_gate(narrow_comb.bandwidth, 2))
    assert long_real == pytest.approx(160.8, abs=0.05)
    assert long_int == 160
    assert short_real == pytest.approx(165.9, abs=0.05)
    assert short_int in (165, 166)


def test_capacity_limit(eu_comb):
    assert multimode_capacity(eu_comb, 0.0) == (pytest.approx(100), 100)


def test_capacity_errors(pr_comb):
    with pytest.raises(DomainError):
        multimode_capacity(pr_comb, -1e-9)
    with pytest.raises(NoStorageWindowError):
        multimode_capacity(pr_comb, pr_comb.echo_time)


@given(st.floats(min_value=0, max_value=9.9e-6), st.floats(min_value=0, max_value=9.9e-6))
def test_capacity_decreases_with_gate(t_a, t_b):
    spec = comb(25e3, 100e3, 40, 4)
    low, high = sorted((t_a, t_b))
    assert multimode_capacity(spec, low)[0] >= multimode_capacity(spec, high)[0]
    assert multimode_capacity(spec, low)[1] >= multimode_capacity(spec, high)[1]


def test_max_chirped_duration(eu_comb):
    tau_max = max_chirped_duration(eu_comb)
    assert tau_max == pytest.approx((50e-6 - 0.5e-6) / 7)
    assert multimode_capacity(eu_comb, 7 * tau_max)[1] == 1


def test_analytic_echo_efficiency(pr_comb, eu_comb):
    assert analytic_echo_efficiency(pr_comb, 'forward') == pytest.approx(0.25, abs=0.01)
    assert analytic_echo_efficiency(eu_comb, 'backward') == pytest.approx(0.90, abs=0.01)
    assert analytic_echo_efficiency(comb(25e3, 100e3, 40, 0), 'forward') == 0.0
    with pytest.raises(DomainError):
        analytic_echo_efficiency(pr_comb, 'sideways')


def test_auto_grid_sizes(pr_comb, eu_comb):
    pr_grid = auto_spectral_grid(pr_comb)
    assert pr_grid.sample_count == 8192
    assert pr_grid.span == pytest.approx(4 * pr_comb.bandwidth)
    assert pr_grid.spacing <= pr_comb.peak_width / 8
    assert auto_spectral_grid(eu_comb).sample_count == 262144


def test_auto_grid_honours_min_duration(pr_comb):
    grid = auto_spectral_grid(pr_comb, min_duration=2e-3)
    assert TWO_PI / grid.spacing >= 2e-3
    assert grid.sample_count == 32768


def test_grid_checks(pr_comb):
    with pytest.raises(GridResolutionError):
        check_spectral_grid(pr_comb, SpectralGrid.centered(1024, pr_comb.peak_width / 2))
    with pytest.raises(GridCoverageError):
        check_spectral_grid(pr_comb, SpectralGrid.centered(2048, pr_comb.peak_width / 8))
    with pytest.raises(GridCoverageError):
        check_spectral_grid(pr_comb, auto_spectral_grid(pr_comb), center=pr_comb.bandwidth)
    with pytest.raises(GridError):
        SpectralGrid.centered(1000, 1.0)


def test_depth_profile_peaks(pr_comb):
    grid = auto_spectral_grid(pr_comb)
    profile = build_depth_profile(pr_comb, grid)
    omega = grid.frequencies
    assert profile.depth.max() == pytest.approx(4, rel=0.01)
    # midway between the two central peaks only the Gaussian tails remain
    midway = np.argmin(np.abs(omega - pr_comb.peak_centers()[20] + pr_comb.peak_spacing / 2))
    assert profile.depth[midway] == pytest.approx(8 * 2.0 ** -16, rel=0.05)
    outside = np.abs(omega) > pr_comb.bandwidth / 2 + 7 * pr_comb.peak_width
    assert np.all(profile.depth[outside] == 0)
    assert np.all(np.abs(profile.transfer_function()) <= 1)


def test_depth_profile_is_symmetric(pr_comb):
    grid = auto_spectral_grid(pr_comb)
    profile = build_depth_profile(pr_comb, grid)
    # index n/2 is zero frequency, so reverse the positive half against the negative half
    half = grid.sample_count // 2
    np.testing.assert_allclose(profile.depth[half + 1:], profile.depth[1:half][::-1], atol=1e-9)
    # dispersion phase is odd in frequency
    np.testing.assert_allclose(profile.phase[half + 1:], -profile.phase[1:half][::-1], atol=1e-6)


def test_empty_comb_is_transparent():
    spec = comb(25e3, 100e3, 40, 0)
    profile = build_depth_profile(spec, auto_spectral_grid(spec))
    np.testing.assert_allclose(profile.transfer_function(), 1.0)


def test_export_depth_profile(tmp_path, pr_comb):
    profile = build_depth_profile(pr_comb, auto_spectral_grid(pr_comb))
    path = export_depth_profile(profile, tmp_path / 'comb.csv', config_sha='f00')
    lines = path.read_text().splitlines()
    assert lines[0] == '# config_sha256=f00'
    header = next(line for line in lines if not line.startswith('#'))
    assert header == 'omega_rad_s,depth,phase_rad'
    assert sum(1 for line in lines if not line.startswith('#')) == 8192 + 1


def test_depth_profile_is_periodic(pr_comb):
    # 32 samples per peak spacing keeps gamma/8 resolution and an integer period
    grid = SpectralGrid.centered(4096, pr_comb.peak_spacing / 32)
    depth = build_depth_profile(pr_comb, grid).depth
    omega = grid.frequencies
    interior = np.flatnonzero(np.abs(omega) <= pr_comb.bandwidth / 2 - 4 * pr_comb.peak_spacing)
    np.testing.assert_allclose(depth[interior + 32], depth[interior], atol=1e-12)


def test_transfer_function_is_causal(pr_comb):
    profile = build_depth_profile(pr_comb, auto_spectral_grid(pr_comb))
    # h(t_m) = sum_w H(w) exp(-i w t_m); indices above n/2 are negative times
    response = np.fft.fft(np.fft.ifftshift(profile.transfer_function()))
    energy = np.abs(response) ** 2
    half = profile.grid.sample_count // 2
    assert energy[half + 1:].sum() / energy.sum() < 1e-4


@given(st.integers(min_value=2, max_value=200))
def test_capacity_doubles_with_peak_count(count):
    single = multimode_capacity(comb(25e3, 100e3, count, 4), 0.0)[0]
    double = multimode_capacity(comb(25e3, 100e3, 2 * count, 4), 0.0)[0]
    assert double == pytest.approx(2 * single)


@given(st.integers(min_value=-400, max_value=400))
def test_frequency_shift_moves_profile_only(shift):
    spec = comb(25e3, 100e3, 40, 4)
    grid = auto_spectral_grid(spec)
    base = build_depth_profile(spec, grid)
    moved = build_depth_profile(spec, grid, center=shift * grid.spacing)
    np.testing.assert_allclose(moved.depth, np.roll(base.depth, shift), atol=1e-9)
    np.testing.assert_allclose(moved.phase, np.roll(base.phase, shift), atol=1e-6)
    assert comb_finesse(moved.spec) == comb_finesse(base.spec)
    assert multimode_capacity(moved.spec, 0.0) == multimode_capacity(base.spec, 0.0)
