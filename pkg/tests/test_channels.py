import numpy as np
import pytest

from pass_sr.channels import (build_channels, free_space_channel, pa_positions_3d,
                              waveguide_response)
from pass_sr.config import Geometry, SystemConfig, waveguide_y_grid

from conftest import random_geometry, random_layout


def test_kappa_matches_constant_arithmetic(default_cfg):
    # c / (4 pi * 28e9) with SI speed of light
    assert abs(default_cfg.kappa - 8.521e-4) < 1e-6


def test_free_space_magnitude_at_unit_distance(default_cfg):
    h = free_space_channel(np.zeros(3), np.array([1.0, 0.0, 0.0]), default_cfg)
    assert abs(abs(h) - default_cfg.kappa) < 1e-18


def test_free_space_inverse_distance_law(default_cfg):
    p = np.zeros(3)
    h1 = free_space_channel(p, np.array([0.0, 0.0, 3.7]), default_cfg)
    h2 = free_space_channel(p, np.array([0.0, 0.0, 7.4]), default_cfg)
    assert abs(abs(h2) / abs(h1) - 0.5) < 1e-12


def test_free_space_full_wavelength_phase_wrap(default_cfg):
    lam = default_cfg.wavelength_m
    h = free_space_channel(np.zeros(3), np.array([lam, 0.0, 0.0]), default_cfg)
    assert h.imag == pytest.approx(0.0, abs=1e-12)
    assert h.real == pytest.approx(default_cfg.kappa / lam, rel=1e-12)


def test_free_space_magnitude_law_random_positions(default_cfg, rng):
    pa = rng.uniform(-10, 10, size=(50, 3))
    rx = rng.uniform(-10, 10, size=(50, 3))
    h = free_space_channel(pa, rx, default_cfg)
    r = np.linalg.norm(rx - pa, axis=-1)
    assert np.allclose(np.abs(h) * r, default_cfg.kappa, rtol=1e-12)


def test_free_space_zero_distance_raises(default_cfg):
    with pytest.raises(ValueError):
        free_space_channel(np.ones(3), np.ones(3), default_cfg)


def test_waveguide_response_zero_position(default_cfg):
    g = waveguide_response(np.zeros(default_cfg.num_pas_per_waveguide), default_cfg)
    assert np.allclose(g, default_cfg.amplitudes)


def test_waveguide_response_guided_wavelength_wrap(default_cfg):
    x = default_cfg.wavelength_m / default_cfg.effective_refractive_index
    g = waveguide_response(np.full(3, x), default_cfg)
    assert np.allclose(g.imag, 0.0, atol=1e-12)
    assert np.allclose(g.real, default_cfg.amplitudes, rtol=1e-10)


def test_waveguide_response_unit_power_split(default_cfg, rng):
    x = rng.uniform(0, default_cfg.region_x_m, size=default_cfg.num_pas_per_waveguide)
    g = waveguide_response(x, default_cfg)
    assert np.linalg.norm(g) ** 2 == pytest.approx(1.0, rel=1e-12)


def test_build_channels_single_element_collapse(rng):
    cfg = SystemConfig(num_waveguides=1, num_prs=1, num_pas_per_waveguide=1,
                       amplitude_profile=(1.0,))
    geom = random_geometry(cfg, rng)
    x = np.array([[11.3]])
    chs = build_channels(x, geom, cfg)
    pa = np.array([11.3, geom.waveguide_y_m[0], cfg.pa_height_m])
    expected = free_space_channel(pa, geom.pr_positions_m[0], cfg) \
        * np.exp(-1j * cfg.beta_g * 11.3)
    assert chs.h_eq_pr.shape == (1, 1)
    assert chs.h_eq_pr[0, 0] == pytest.approx(expected, rel=1e-12)


def test_build_channels_pr_permutation_symmetry(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    swapped = Geometry(waveguide_y_m=geom.waveguide_y_m,
                       pr_positions_m=geom.pr_positions_m[::-1],
                       ir_position_m=geom.ir_position_m,
                       bd_position_m=geom.bd_position_m)
    x = random_layout(small_cfg, rng)
    a = build_channels(x, geom, small_cfg)
    b = build_channels(x, swapped, small_cfg)
    assert np.allclose(a.h_eq_pr, b.h_eq_pr[::-1])
    assert np.allclose(a.f_bd_pr, b.f_bd_pr[::-1])
    assert np.allclose(a.h_eq_bd, b.h_eq_bd)


def _dense_assembly(x, geom, cfg):
    """Independent NM-dimensional oracle: full receiver row times block-diag G."""
    n, m = x.shape
    rows = {}
    for label, rx in [("pr", geom.pr_positions_m), ("bd", geom.bd_position_m[None, :])]:
        out = []
        for p in rx:
            h_row = np.empty(n * m, dtype=complex)
            for ni in range(n):
                for mi in range(m):
                    pa = np.array([x[ni, mi], geom.waveguide_y_m[ni], cfg.pa_height_m])
                    r = np.linalg.norm(p - pa)
                    h_row[ni * m + mi] = cfg.kappa * np.exp(-1j * cfg.beta_h * r) / r
            g_blk = np.zeros((n * m, n), dtype=complex)
            for ni in range(n):
                for mi in range(m):
                    g_blk[ni * m + mi, ni] = cfg.amplitudes[mi] \
                        * np.exp(-1j * cfg.beta_g * x[ni, mi])
            out.append(h_row @ g_blk)
        rows[label] = np.array(out)
    return rows


@pytest.mark.parametrize("n,m", [(1, 2), (2, 2), (2, 3), (3, 4)])
def test_build_channels_matches_dense_assembly(n, m, rng):
    cfg = SystemConfig(num_waveguides=n, num_prs=min(n, 2), num_pas_per_waveguide=m)
    geom = random_geometry(cfg, rng)
    x = random_layout(cfg, rng)
    chs = build_channels(x, geom, cfg)
    dense = _dense_assembly(x, geom, cfg)
    assert np.allclose(chs.h_eq_pr, dense["pr"], rtol=1e-12)
    assert np.allclose(chs.h_eq_bd, dense["bd"][0], rtol=1e-12)


def test_build_channels_cascades_are_exact_scalar_multiples(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    chs = build_channels(random_layout(small_cfg, rng), geom, small_cfg)
    for k in range(small_cfg.num_prs):
        assert np.array_equal(chs.cascade_pr[k], chs.f_bd_pr[k] * chs.h_eq_bd)
    assert np.array_equal(chs.cascade_ir, chs.f_bd_ir * chs.h_eq_bd)


def test_build_channels_batch_matches_individual(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    batch = np.stack([random_layout(small_cfg, rng) for _ in range(5)])
    chs = build_channels(batch, geom, small_cfg)
    for i in range(5):
        single = build_channels(batch[i], geom, small_cfg)
        assert np.allclose(chs.h_eq_pr[i], single.h_eq_pr)
        assert np.allclose(chs.h_eq_bd[i], single.h_eq_bd)


def test_equivalent_channel_magnitude_bound(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    x = random_layout(small_cfg, rng)
    chs = build_channels(x, geom, small_cfg)
    bound = chs.magnitude_bound(x, geom, small_cfg)
    assert np.all(np.abs(chs.h_eq_pr) <= bound)
    assert np.all(np.abs(chs.h_eq_bd) <= bound)


def test_pa_positions_3d_layout(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    x = random_layout(small_cfg, rng)
    pa = pa_positions_3d(x, geom, small_cfg)
    assert pa.shape == x.shape + (3,)
    assert np.all(pa[..., 2] == small_cfg.pa_height_m)
    assert np.allclose(pa[..., 1], geom.waveguide_y_m[:, None])
