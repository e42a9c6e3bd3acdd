import numpy as np
import pytest

from pass_sr.channels import build_channels
from pass_sr.config import SystemConfig
from pass_sr.detection import detection_metric, kl_requirement
from pass_sr.objective import feasibility_check, penalty_objective
from pass_sr.rates import sum_rate

from conftest import random_beam, random_geometry, random_layout


def test_inactive_penalty_equals_negative_sum_rate(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    chs = build_channels(random_layout(small_cfg, rng), geom, small_cfg)
    for _ in range(10):
        w = random_beam(small_cfg, rng, power=small_cfg.max_power_w)
        if float(detection_metric(chs, w, small_cfg).kl) >= kl_requirement(small_cfg):
            f = penalty_objective(chs, w, small_cfg, xi=10.0)
            assert float(f) == pytest.approx(-float(sum_rate(chs, w, small_cfg).sum_rate),
                                             rel=1e-12)
            return
    pytest.fail("no detection-feasible random beam found")


def test_zero_beam_fully_violated_penalty(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    chs = build_channels(random_layout(small_cfg, rng), geom, small_cfg)
    xi = 10.0
    f = penalty_objective(chs, np.zeros((2, 2), complex), small_cfg, xi)
    assert float(f) == pytest.approx(xi * kl_requirement(small_cfg) ** 2, rel=1e-12)
    assert float(f) == pytest.approx(xi * 1.805 ** 2, rel=1e-9)  # defaults: 2 * 0.95^2


def test_penalty_objective_recomposition(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    chs = build_channels(random_layout(small_cfg, rng), geom, small_cfg)
    w = random_beam(small_cfg, rng, power=1e-9 * small_cfg.max_power_w)
    xi = 3.5
    expected = -float(sum_rate(chs, w, small_cfg).sum_rate) + xi * max(
        0.0, kl_requirement(small_cfg) - float(detection_metric(chs, w, small_cfg).kl)) ** 2
    assert float(penalty_objective(chs, w, small_cfg, xi)) == pytest.approx(expected, rel=1e-12)


def test_penalty_objective_rejects_nonpositive_weight(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    chs = build_channels(random_layout(small_cfg, rng), geom, small_cfg)
    with pytest.raises(ValueError):
        penalty_objective(chs, random_beam(small_cfg, rng), small_cfg, xi=0.0)


def test_feasibility_residuals_tight_cases(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    m = small_cfg.num_pas_per_waveguide
    x = np.tile(1.0 + small_cfg.min_spacing_m * np.arange(m), (2, 1))
    chs = build_channels(x, geom, small_cfg)
    w = random_beam(small_cfg, rng, power=small_cfg.max_power_w)
    rep = feasibility_check(x, w, chs, small_cfg)
    assert rep.spacing_residual == pytest.approx(0.0, abs=1e-12)
    assert rep.power_residual == pytest.approx(0.0, abs=1e-12)
    assert rep.range_residual == pytest.approx(1.0, abs=1e-12)


def test_feasibility_flags_violations(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    x = np.array([[1.0, 1.05], [0.5, 31.0]])  # spacing 0.05 < 0.1, x beyond S_x
    chs = build_channels(x, geom, small_cfg)
    w = random_beam(small_cfg, rng, power=4.0 * small_cfg.max_power_w)
    rep = feasibility_check(x, w, chs, small_cfg)
    assert rep.spacing_residual == pytest.approx(0.05 - 0.1, abs=1e-12)
    assert rep.range_residual == pytest.approx(30.0 - 31.0, abs=1e-12)
    assert rep.power_residual == pytest.approx(-3.0 * small_cfg.max_power_w, rel=1e-9)
    assert not rep.is_feasible()


def test_feasibility_vacuous_positions(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    chs = build_channels(random_layout(small_cfg, rng), geom, small_cfg)
    w = random_beam(small_cfg, rng, power=small_cfg.max_power_w)
    rep = feasibility_check(None, w, chs, small_cfg)
    assert rep.spacing_residual == 0.0 and rep.range_residual == 0.0
    cfg1 = SystemConfig(num_waveguides=1, num_prs=1, num_pas_per_waveguide=1)
    geom1 = random_geometry(cfg1, rng)
    chs1 = build_channels(np.array([[3.0]]), geom1, cfg1)
    rep1 = feasibility_check(np.array([[3.0]]), random_beam(cfg1, rng), chs1, cfg1)
    assert rep1.spacing_residual == 0.0
