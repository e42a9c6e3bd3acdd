import numpy as np
import pytest

from pass_sr.channels import build_channels
from pass_sr.config import SystemConfig
from pass_sr.detection import kl_requirement
from pass_sr.lgd import (Adam, LgdConfig, LgdState, adam_step, lgd_gradient,
                         normalize_offsets, offsets_to_positions,
                         positions_to_offsets, project_power, solve_lgd)
from pass_sr.objective import penalty_objective
from pass_sr.rates import sum_rate

from conftest import random_beam, random_geometry, random_layout


# -- reparameterizations ------------------------------------------------------

def test_offsets_zero_gives_tight_packing(small_cfg):
    m = small_cfg.num_pas_per_waveguide
    x = offsets_to_positions(np.zeros((2, m)), small_cfg)
    assert np.allclose(x, small_cfg.min_spacing_m * np.arange(m))


def test_offsets_shift_by_first_entry():
    cfg = SystemConfig(num_pas_per_waveguide=3, min_spacing_m=0.1)
    dx = np.array([[1.0, 0.0, 0.0]])
    assert np.allclose(offsets_to_positions(dx, cfg), [[1.0, 1.1, 1.2]])


def test_offsets_always_spacing_feasible(small_cfg, rng):
    dx = rng.uniform(0, 5.0, size=(10_000, 2, small_cfg.num_pas_per_waveguide))
    x = offsets_to_positions(dx, small_cfg)
    assert np.min(np.diff(x, axis=-1)) >= small_cfg.min_spacing_m - 1e-12


def test_offset_roundtrip_identity(small_cfg, rng):
    x = np.stack([random_layout(small_cfg, rng) for _ in range(50)])
    back = offsets_to_positions(positions_to_offsets(x, small_cfg), small_cfg)
    assert np.allclose(back, x, atol=1e-12)


def test_normalize_offsets_inactive_rows_pass_through(small_cfg):
    budget = small_cfg.offset_budget_m
    dx = np.full((2, small_cfg.num_pas_per_waveguide), budget / 4)
    assert np.array_equal(normalize_offsets(dx, small_cfg), dx)


def test_normalize_offsets_single_entry_rescale(small_cfg):
    budget = small_cfg.offset_budget_m
    dx = np.zeros((1, small_cfg.num_pas_per_waveguide))
    dx[0, 0] = 2 * budget
    out = normalize_offsets(dx, small_cfg)
    assert out[0, 0] == pytest.approx(budget, rel=1e-12)
    assert np.all(out[0, 1:] == 0.0)


def test_normalize_offsets_bounds_last_position(small_cfg, rng):
    dx = rng.uniform(0, 40.0, size=(500, 2, small_cfg.num_pas_per_waveguide))
    x = offsets_to_positions(normalize_offsets(dx, small_cfg), small_cfg)
    assert np.max(x[..., -1]) <= small_cfg.region_x_m + 1e-9


def test_project_power_boundary_and_scaling(small_cfg, rng):
    w = random_beam(small_cfg, rng, power=small_cfg.max_power_w)
    assert np.array_equal(project_power(w, small_cfg), w)
    w4 = random_beam(small_cfg, rng, power=4.0 * small_cfg.max_power_w)
    out = project_power(w4, small_cfg)
    assert np.allclose(out, w4 / 2.0)
    assert np.sum(np.abs(out) ** 2) == pytest.approx(small_cfg.max_power_w, rel=1e-12)


def test_project_power_idempotent(small_cfg, rng):
    for _ in range(20):
        w = random_beam(small_cfg, rng) * rng.uniform(0.1, 5.0)
        once = project_power(w, small_cfg)
        assert np.array_equal(project_power(once, small_cfg), once)


# -- Adam ---------------------------------------------------------------------

def test_adam_zero_gradient_is_noop():
    opt = Adam(3, lr=0.1)
    params = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(opt.step(params, np.zeros(3)), params)


def test_adam_constant_gradient_sign_step():
    opt = Adam(1, lr=1e-3)
    p = np.array([0.0])
    prev = p.copy()
    for _ in range(500):
        p_new = opt.step(p, np.array([7.3]))
        step = p - p_new
        prev, p = p, p_new
    # second moment saturates at g^2, so the late update approaches lr * sign(g)
    assert step[0] == pytest.approx(1e-3, rel=0.02)


def test_adam_matches_hand_traced_recursion():
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    opt = Adam(1, lr=lr, beta1=b1, beta2=b2, eps=eps)
    theta = np.array([1.0])
    m = v = 0.0
    for t in range(1, 4):
        g = 2.0 * theta[0]  # gradient of theta^2
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        expected = theta[0] - lr * m_hat / (np.sqrt(v_hat) + eps)
        theta = opt.step(theta, np.array([g]))
        assert theta[0] == pytest.approx(expected, rel=1e-15)


def test_adam_step_postprocessing_keeps_iterates_feasible(small_cfg, rng):
    n, m, k = 2, small_cfg.num_pas_per_waveguide, 2
    state = LgdState(offsets=rng.uniform(0, 10, (n, m)),
                     w=random_beam(small_cfg, rng, power=small_cfg.max_power_w),
                     adam=Adam(n * m + 2 * n * k, lr=0.5))
    for _ in range(200):
        grad = rng.standard_normal(n * m + 2 * n * k) * 10.0
        adam_step(state, grad, small_cfg)
        assert np.all(state.offsets >= 0.0)
        x = offsets_to_positions(state.offsets, small_cfg)
        assert np.min(np.diff(x, axis=-1)) >= small_cfg.min_spacing_m - 1e-12
        assert np.max(x) <= small_cfg.region_x_m + 1e-9
        assert np.min(x) >= 0.0
        assert np.sum(np.abs(state.w) ** 2) <= small_cfg.max_power_w * (1 + 1e-12)


# -- gradients ----------------------------------------------------------------

def fd_gradient(dx, w, geom, cfg, xi):
    """Central finite differences of the public objective path."""
    def f(dx_, w_):
        x = offsets_to_positions(dx_, cfg)
        return float(penalty_objective(build_channels(x, geom, cfg), w_, cfg, xi))

    g_dx = np.zeros_like(dx)
    for idx in np.ndindex(dx.shape):
        h = 1e-6 * (1.0 + abs(dx[idx]))
        dp, dm = dx.copy(), dx.copy()
        dp[idx] += h
        dm[idx] -= h
        g_dx[idx] = (f(dp, w) - f(dm, w)) / (2 * h)
    g_w = np.zeros(w.shape, dtype=complex)
    for idx in np.ndindex(w.shape):
        for comp in (1.0, 1.0j):
            h = 1e-6 * (1.0 + abs(w[idx]))
            wp, wm = w.copy(), w.copy()
            wp[idx] += comp * h
            wm[idx] -= comp * h
            val = (f(dx, wp) - f(dx, wm)) / (2 * h)
            g_w[idx] += comp * val
    return g_dx, g_w


def rel_err(a, b):
    denom = np.maximum(1e-8, np.maximum(np.abs(a), np.abs(b)))
    return np.max(np.abs(a - b) / denom)


def make_state(cfg, rng):
    dx = rng.uniform(0, 3.0, (cfg.num_waveguides, cfg.num_pas_per_waveguide))
    w = random_beam(cfg, rng) * 0.4
    n_par = dx.size + 2 * w.size
    return LgdState(offsets=dx, w=w, adam=Adam(n_par, lr=1e-4))


def test_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(1, 3))
        cfg = SystemConfig(num_waveguides=n, num_prs=int(rng.integers(1, n + 1)),
                           num_pas_per_waveguide=int(rng.integers(1, 4)))
        geom = random_geometry(cfg, rng)
        state = make_state(cfg, rng)
        xi = 10.0
        flat = lgd_gradient(state, geom, cfg, xi)
        g_dx = flat[:state.offsets.size].reshape(state.offsets.shape)
        g_w = flat[state.offsets.size:].view(np.complex128).reshape(state.w.shape)
        fd_dx, fd_w = fd_gradient(state.offsets, state.w, geom, cfg, xi)
        worst = max(worst, rel_err(g_dx, fd_dx),
                    rel_err(g_w.real, fd_w.real), rel_err(g_w.imag, fd_w.imag))
    assert worst < 1e-4


def test_gradient_zero_for_deactivated_pa(rng):
    cfg = SystemConfig(num_waveguides=1, num_prs=1, num_pas_per_waveguide=2,
                       amplitude_profile=(1.0, 0.0))
    geom = random_geometry(cfg, rng)
    state = make_state(cfg, rng)
    flat = lgd_gradient(state, geom, cfg, xi=10.0)
    g_dx = flat[:2].reshape(1, 2)
    # the cumulative-sum reparameterization makes the dead PA's own offset
    # matter only through itself, so its column entry must vanish
    assert g_dx[0, 1] == 0.0


def test_penalty_gradient_inactive_when_detection_met(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    for _ in range(20):
        state = make_state(small_cfg, rng)
        state.w = random_beam(small_cfg, rng, power=small_cfg.max_power_w)
        x = offsets_to_positions(state.offsets, small_cfg)
        chs = build_channels(x, geom, small_cfg)
        from pass_sr.detection import detection_metric
        if float(detection_metric(chs, state.w, small_cfg).kl) >= kl_requirement(small_cfg):
            g1 = lgd_gradient(state, geom, small_cfg, xi=1.0)
            g2 = lgd_gradient(state, geom, small_cfg, xi=100.0)
            assert np.array_equal(g1, g2)
            return
    pytest.fail("no detection-feasible state sampled")


# -- solver -------------------------------------------------------------------

def test_single_user_converges_to_full_power_capacity(rng):
    cfg = SystemConfig(num_waveguides=1, num_prs=1, num_pas_per_waveguide=1,
                       bd_reflection_pr=0.0, bd_reflection_ir=0.0)
    geom = random_geometry(cfg, rng)
    rep = solve_lgd(geom, cfg, LgdConfig(seed=5, max_iterations=3000))
    assert np.sum(np.abs(rep.w) ** 2) == pytest.approx(cfg.max_power_w, rel=1e-3)
    chs = build_channels(rep.x, geom, cfg)
    capacity = np.log2(1.0 + cfg.max_power_w * np.abs(chs.h_eq_pr[0, 0]) ** 2
                       / cfg.noise_power_w_pr)
    assert rep.sum_rate == pytest.approx(float(capacity), rel=1e-3)


def test_trace_smoothed_monotone_over_seeds(small_cfg):
    # after a window-10 moving average, any uphill step stays within 3% of the
    # total descent (calibrated over these 20 seeds; raw Adam iterates wiggle)
    window = 10
    for seed in range(20):
        geom = random_geometry(small_cfg, np.random.default_rng(100 + seed))
        rep = solve_lgd(geom, small_cfg, LgdConfig(seed=seed, max_iterations=400))
        f_trace = -rep.objective_trace  # minimized objective
        ma = np.convolve(f_trace, np.ones(window) / window, mode="valid")
        descent = f_trace.max() - f_trace.min()
        assert np.all(np.diff(ma) <= 0.03 * descent)


def test_same_seed_bit_identical(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    cfg_run = LgdConfig(seed=9, max_iterations=300)
    a = solve_lgd(geom, small_cfg, cfg_run)
    b = solve_lgd(geom, small_cfg, cfg_run)
    assert np.array_equal(a.objective_trace, b.objective_trace)
    assert np.array_equal(a.w, b.w)
    assert np.array_equal(a.x, b.x)


def test_final_output_feasible(small_cfg):
    for seed in range(5):
        geom = random_geometry(small_cfg, np.random.default_rng(500 + seed))
        rep = solve_lgd(geom, small_cfg, LgdConfig(seed=seed, max_iterations=600))
        assert rep.residuals.min_residual() >= -1e-6


def test_penalty_weight_pushes_toward_detection_feasibility():
    """On runs ending violated, larger xi should reduce the violation (majority)."""
    cfg = SystemConfig(bd_reflection_ir=5.0)  # detection unreachable at full power
    wins = 0
    trials = 10
    for seed in range(trials):
        geom = random_geometry(cfg, np.random.default_rng(900 + seed))
        residuals = []
        for xi in (1.0, 10.0, 100.0):
            rep = solve_lgd(geom, cfg, LgdConfig(seed=seed, penalty_weight=xi,
                                                 max_iterations=800))
            residuals.append(rep.residuals.detection_residual)
        assert all(r < 0 for r in residuals)  # genuinely unreachable
        if residuals[2] >= residuals[0] - 1e-12:
            wins += 1
    assert wins > trials / 2


def test_custom_init_respected(small_cfg, rng):
    geom = random_geometry(small_cfg, rng)
    dx0 = rng.uniform(0, 1.0, (2, small_cfg.num_pas_per_waveguide))
    w0 = random_beam(small_cfg, rng, power=small_cfg.max_power_w)
    rep = solve_lgd(geom, small_cfg, LgdConfig(seed=0, max_iterations=5),
                    init=(dx0, w0))
    assert rep.iterations <= 5
