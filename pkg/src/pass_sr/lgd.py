"""Learning-aided gradient descent on the penalized sum-rate objective.

The PA positions are reparameterized as non-negative offsets whose cumulative
sum satisfies the minimum-spacing constraint by construction; the waveguide
length constraint is enforced by a proportional row rescale and the transmit
power constraint by projection onto the Frobenius ball. The remaining
detection constraint enters the objective as a squared hinge penalty, and all
learnable parameters (offsets plus the beamforming matrix as interleaved
real/imaginary pairs) are updated by Adam.

Gradients are exact: the chain rule through offsets -> positions -> channels
-> objective is evaluated in closed form (Wirtinger calculus for the complex
blocks) and validated against central finite differences in the test suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet, build_channels
from .config import Geometry, SystemConfig
from .detection import detection_metric, gamma_b_requirement, kl_requirement
from .objective import feasibility_check, penalty_objective
from .rates import sum_rate
from .report import SolveReport, SolverAbort

LN2 = np.log(2.0)


@dataclass(frozen=True)
class LgdConfig:
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    penalty_weight: float = 10.0   # xi
    max_iterations: int = 5000
    convergence_tol: float = 1e-5  # on |F_i - F_{i-1}|
    patience: int = 20             # consecutive small changes required to stop
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.learning_rate <= 0 or self.penalty_weight <= 0:
            raise ValueError("learning rate and penalty weight must be positive")


# -- constraint-handling reparameterizations --------------------------------

def offsets_to_positions(dx: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Cumulative-sum realization of the offset reparameterization.

    x_{n,1} = dx_{n,1}, x_{n,m} = (m-1) d_min + sum_{j<=m} dx_{n,j}; any
    non-negative offset matrix therefore yields spacing-feasible positions.
    """
    dx = np.asarray(dx, dtype=float)
    steps = cfg.min_spacing_m * np.arange(dx.shape[-1])
    return np.cumsum(dx, axis=-1) + steps


def positions_to_offsets(x: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Inverse offset extraction; exact left inverse of offsets_to_positions."""
    x = np.asarray(x, dtype=float)
    shifted = x - cfg.min_spacing_m * np.arange(x.shape[-1])
    dx = np.diff(shifted, axis=-1, prepend=0.0)
    dx[..., 0] = shifted[..., 0]
    return dx


def normalize_offsets(dx: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Proportionally rescale rows whose offset sum exceeds Delta_max.

    Compliant rows pass through unchanged, so the map is idempotent and the
    resulting positions never overrun the waveguide.
    """
    dx = np.asarray(dx, dtype=float)
    budget = cfg.offset_budget_m
    row_sum = dx.sum(axis=-1, keepdims=True)
    scale = np.where(row_sum > budget, budget / np.where(row_sum > 0, row_sum, 1.0), 1.0)
    return dx * scale


def project_power(w: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Project the beam onto the Frobenius ball tr(W W^H) <= P_max.

    The boundary comparison carries a relative 1e-12 slack so that beams
    sitting on the ball (e.g. just projected) pass through bit-identically.
    """
    w = np.asarray(w, dtype=complex)
    power = np.sum(np.abs(w) ** 2)
    if power <= cfg.max_power_w * (1.0 + 1e-12):
        return w
    return w * np.sqrt(cfg.max_power_w / power)


# -- Adam -------------------------------------------------------------------

class Adam:
    """Standard bias-corrected Adam on a flat real parameter vector."""

    def __init__(self, num_params: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(num_params)
        self.v = np.zeros(num_params)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class LgdState:
    """Learnable parameters plus optimizer accumulators and objective trace."""

    offsets: np.ndarray            # (N, M) non-negative
    w: np.ndarray                  # (N, K) complex
    adam: Adam
    iteration: int = 0
    trace: list = field(default_factory=list)  # penalized objective F per iteration

    def params_vector(self) -> np.ndarray:
        return np.concatenate([self.offsets.ravel(), self.w.ravel().view(np.float64)])

    def load_vector(self, vec: np.ndarray) -> None:
        n_off = self.offsets.size
        self.offsets = vec[:n_off].reshape(self.offsets.shape).copy()
        self.w = vec[n_off:].view(np.complex128).reshape(self.w.shape).copy()


# -- exact gradient of the penalized objective ------------------------------

def _forward_backward(dx: np.ndarray, w: np.ndarray, geom: Geometry,
                      cfg: SystemConfig, xi: float):
    """Objective F(dx, W) and its exact gradient w.r.t. offsets and beam.

    Returns (F, grad_dx, grad_w) where grad_w is complex with real part
    dF/dRe(W) and imaginary part dF/dIm(W).
    """
    n, m_pas = dx.shape
    k = cfg.num_prs
    x = offsets_to_positions(dx, cfg)                        # (N, M)
    noise = cfg.noise_power_w_pr

    # channel forward with cached intermediates
    rx = np.vstack([geom.pr_positions_m, geom.bd_position_m[None, :]])   # (K+1, 3)
    pa = np.empty((n, m_pas, 3))
    pa[..., 0] = x
    pa[..., 1] = geom.waveguide_y_m[:, None]
    pa[..., 2] = cfg.pa_height_m
    diff = rx[:, None, None, :] - pa[None, :, :, :]          # (K+1, N, M, 3)
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("zero PA-receiver distance")
    amps = np.asarray(cfg.amplitudes)
    c_paths = (cfg.kappa * np.exp(-1j * cfg.beta_h * r) / r) \
        * (amps * np.exp(-1j * cfg.beta_g * x))              # (K+1, N, M)
    e_rows = c_paths.sum(axis=-1)                            # (K+1, N)

    f_bd_pr = cfg.bd_reflection_pr * cfg.kappa * np.exp(
        -1j * cfg.beta_h * np.linalg.norm(geom.pr_positions_m - geom.bd_position_m, axis=-1)) \
        / np.linalg.norm(geom.pr_positions_m - geom.bd_position_m, axis=-1)
    d_ir = np.linalg.norm(geom.ir_position_m - geom.bd_position_m)
    f_bd_ir = cfg.bd_reflection_ir * cfg.kappa * np.exp(-1j * cfg.beta_h * d_ir) / d_ir

    a1 = e_rows[:k]                                          # (K, N)
    a2 = a1 + f_bd_pr[:, None] * e_rows[k][None, :]

    def branch(a):
        mm = a @ w                                           # (K, K)
        u = np.diagonal(mm)
        v = np.sum(np.abs(mm) ** 2, axis=-1) - np.abs(u) ** 2 + noise
        s = np.abs(u) ** 2 / v
        return mm, u, v, s

    m1, u1, v1, s1 = branch(a1)
    m2, u2, v2, s2 = branch(a2)
    rates = 0.5 * np.log2(1.0 + s1) + 0.5 * np.log2(1.0 + s2)

    q = f_bd_ir * e_rows[k]                                  # (N,)
    row_w = q @ w                                            # (K,)
    gamma = float(np.sum(np.abs(row_w) ** 2))
    rho = 1.0 + gamma / cfg.noise_power_w_ir
    kl = cfg.symbol_ratio * (np.log(rho) + 1.0 / rho - 1.0)
    violation = max(0.0, kl_requirement(cfg) - kl)
    f_val = -float(rates.sum()) + xi * violation ** 2

    # backward pass
    def branch_adjoints(dcoef, mm, u, v, s, a):
        # p[k, i] = dF/ds_k * ds_k/d(m_{k,i} path); see module docstring
        p = (-s / v * dcoef)[:, None] * mm
        np.fill_diagonal(p, dcoef * u / v)
        g_w = a.conj().T @ p                                 # (N, K) cogradient wrt conj(W)
        g_a = p @ w.conj().T                                 # (K, N) cogradient wrt conj(A)
        return g_w, g_a

    d1 = -0.5 / ((1.0 + s1) * LN2)                           # dF/ds1 (F carries -sum rate)
    d2 = -0.5 / ((1.0 + s2) * LN2)
    g_w1, g_a1 = branch_adjoints(d1, m1, u1, v1, s1, a1)
    g_w2, g_a2 = branch_adjoints(d2, m2, u2, v2, s2, a2)

    g_e = np.zeros((k + 1, n), dtype=complex)
    g_e[:k] = g_a1 + g_a2
    g_e[k] = f_bd_pr.conj() @ g_a2

    dkl_dgamma = cfg.symbol_ratio * (1.0 / rho - 1.0 / rho ** 2) / cfg.noise_power_w_ir
    df_dgamma = -2.0 * xi * violation * dkl_dgamma
    g_w = g_w1 + g_w2 + df_dgamma * np.outer(q.conj(), row_w)
    g_e[k] += df_dgamma * np.conj(f_bd_ir) * (w.conj() @ row_w)

    # through the channel phases/amplitudes to the x-coordinates
    dr_dx = (x[None, :, :] - rx[:, 0, None, None]) / r       # (K+1, N, M)
    dc_dx = c_paths * (-(1j * cfg.beta_h + 1.0 / r) * dr_dx - 1j * cfg.beta_g)
    grad_x = 2.0 * np.real(np.einsum('rn,rnm->nm', g_e, dc_dx.conj()))
    grad_dx = np.cumsum(grad_x[:, ::-1], axis=-1)[:, ::-1]   # d x_{n,m} / d dx_{n,j} = 1 for j <= m

    grad_w = 2.0 * g_w                                       # dF/dRe + j dF/dIm
    return f_val, grad_dx, grad_w


def lgd_gradient(state: LgdState, geom: Geometry, cfg: SystemConfig,
                 xi: float) -> np.ndarray:
    """Flat gradient of the penalized objective over all learnable parameters.

    Layout matches LgdState.params_vector: offsets first, then the beam as
    interleaved real/imaginary pairs. Aborts on non-finite intermediates.
    """
    f_val, grad_dx, grad_w = _forward_backward(state.offsets, state.w, geom, cfg, xi)
    flat = np.concatenate([grad_dx.ravel(), grad_w.ravel().view(np.float64)])
    if not (np.isfinite(f_val) and np.all(np.isfinite(flat))):
        raise SolverAbort("non-finite objective or gradient",
                          trace=np.asarray(state.trace))
    return flat


def adam_step(state: LgdState, grad: np.ndarray, cfg: SystemConfig) -> LgdState:
    """One Adam update followed by the constraint-enforcing activations.

    Offsets are clamped to be non-negative (ReLU) before the row rescale so
    the rescale precondition holds, then the beam is projected back onto the
    power ball; every iterate therefore satisfies the spacing, range, and
    power constraints exactly.
    """
    new_vec = state.adam.step(state.params_vector(), grad)
    state.load_vector(new_vec)
    state.offsets = normalize_offsets(np.maximum(state.offsets, 0.0), cfg)
    state.w = project_power(state.w, cfg)
    state.iteration += 1
    return state


# -- solver -----------------------------------------------------------------

def default_init(geom: Geometry, cfg: SystemConfig,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Evenly spread PAs over the waveguide; random full-power beam."""
    n, m_pas, k = cfg.num_waveguides, cfg.num_pas_per_waveguide, cfg.num_prs
    x0 = (np.arange(m_pas) + 0.5) * cfg.region_x_m / m_pas
    dx0 = positions_to_offsets(np.tile(x0, (n, 1)), cfg)
    w0 = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    w0 *= np.sqrt(cfg.max_power_w / np.sum(np.abs(w0) ** 2))
    return dx0, w0


def _detection_polish(x: np.ndarray, w: np.ndarray, geom: Geometry,
                      cfg: SystemConfig) -> np.ndarray:
    """Blend the beam toward the detection-optimal direction until KL clears 2 eps^2.

    The maximizer of the backscatter power under the power budget is all
    power on one stream along the cascade direction; scanning the blend
    weight from 0 keeps the rate loss minimal. Returns ``w`` unchanged when
    already feasible or when the constraint is unreachable at full power.
    """
    chs = build_channels(x, geom, cfg)
    need = kl_requirement(cfg)
    if float(detection_metric(chs, w, cfg).kl) >= need:
        return w
    q = np.conj(chs.cascade_ir)
    qn = np.linalg.norm(q)
    if qn == 0.0 or cfg.max_power_w * qn ** 2 < gamma_b_requirement(cfg):
        return w
    w_det = np.zeros_like(w)
    w_det[:, 0] = np.sqrt(cfg.max_power_w) * q / qn
    for tau in np.concatenate([np.geomspace(1e-6, 1.0, 60)]):
        cand = project_power(np.sqrt(1.0 - min(tau, 1.0)) * w + np.sqrt(tau) * w_det, cfg)
        if float(detection_metric(chs, cand, cfg).kl) >= need:
            return cand
    return project_power(w_det, cfg)


def solve_lgd(geom: Geometry, cfg: SystemConfig, lgd_cfg: LgdConfig | None = None,
              init: tuple[np.ndarray, np.ndarray] | None = None) -> SolveReport:
    """Run the gradient-descent solver to convergence and report Eq.-(5) rates.

    The returned objective trace is the negated penalized objective
    (ascending is better). If the detection constraint is still violated at
    the last iterate and is reachable, the beam is polished toward
    feasibility before reporting.
    """
    lgd_cfg = lgd_cfg or LgdConfig()
    rng = np.random.default_rng(lgd_cfg.seed)
    t0 = time.perf_counter()

    if init is None:
        dx0, w0 = default_init(geom, cfg, rng)
    else:
        dx0, w0 = init
    dx0 = normalize_offsets(np.maximum(np.asarray(dx0, dtype=float), 0.0), cfg)
    w0 = project_power(np.asarray(w0, dtype=complex), cfg)

    num_params = dx0.size + 2 * w0.size
    state = LgdState(offsets=dx0, w=w0,
                     adam=Adam(num_params, lgd_cfg.learning_rate, lgd_cfg.adam_beta1,
                               lgd_cfg.adam_beta2, lgd_cfg.adam_epsilon))

    xi = lgd_cfg.penalty_weight
    still = 0
    converged = False
    for _ in range(lgd_cfg.max_iterations):
        f_val, grad_dx, grad_w = _forward_backward(state.offsets, state.w, geom, cfg, xi)
        if not np.isfinite(f_val):
            raise SolverAbort("non-finite objective", trace=np.asarray(state.trace))
        grad = np.concatenate([grad_dx.ravel(), grad_w.ravel().view(np.float64)])
        if not np.all(np.isfinite(grad)):
            raise SolverAbort("non-finite gradient", trace=np.asarray(state.trace))
        if state.trace and abs(f_val - state.trace[-1]) < lgd_cfg.convergence_tol:
            still += 1
        else:
            still = 0
        state.trace.append(f_val)
        if still >= lgd_cfg.patience:
            converged = True
            break
        adam_step(state, grad, cfg)

    x = offsets_to_positions(state.offsets, cfg)
    w = _detection_polish(x, state.w, geom, cfg)
    chs = build_channels(x, geom, cfg)
    rates = sum_rate(chs, w, cfg)
    det = detection_metric(chs, w, cfg)
    residuals = feasibility_check(x, w, chs, cfg)
    return SolveReport(
        solver="lgd", x=x, w=w, rates=rates, detection=det, residuals=residuals,
        objective_trace=-np.asarray(state.trace), iterations=state.iteration,
        wall_ms=(time.perf_counter() - t0) * 1e3, seed=lgd_cfg.seed,
        converged=converged, feasible=residuals.is_feasible(),
        extra={"final_penalized_objective": float(state.trace[-1])})
