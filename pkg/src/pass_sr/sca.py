"""Successive convex approximation for the transmit beam with positions fixed.

Each fractional SINR term is a jointly convex quadratic-over-linear ratio, so
its first-order expansion at the previous iterate is a global lower bound
that is tight at the expansion point; the nonconvex detection constraint is
replaced by the tangent of the received backscatter power, which
under-estimates it, making the surrogate feasible set an inner approximation
of the true one. The resulting concave subproblem is solved by projected
gradient ascent over the intersection of the power ball and the linearized
detection half-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet, build_channels
from .config import Geometry, SystemConfig
from .detection import detection_metric, gamma_b_requirement, kl_requirement
from .lgd import project_power
from .rates import sum_rate
from .report import SolverAbort

LN2 = math.log(2.0)


class DetectionInfeasible(SolverAbort):
    """The detection constraint cannot be met at full power for this layout."""


@dataclass(frozen=True)
class ScaConfig:
    tol: float = 1e-3                    # stop when the true objective moves less
    max_outer_iterations: int = 60
    subproblem_max_steps: int = 400
    subproblem_tol: float = 1e-6         # objective-change stop of the convex solver
    subproblem_step_init: float = 1.0
    enforce_detection: bool = True

    def __post_init__(self):
        if self.tol <= 0 or self.subproblem_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class SurrogatePoint:
    """Linearization anchors of the two SINR branches and the detection term."""

    u1: np.ndarray   # (K,) h_k^eq w_k at the anchor
    v1: np.ndarray   # (K,) interference-plus-noise of the OFF branch
    u2: np.ndarray   # (K,) combined-channel version
    v2: np.ndarray   # (K,)
    w_anchor: np.ndarray  # (N, K)


def _branch_terms(rows: np.ndarray, w: np.ndarray, noise: float):
    m = rows @ w
    u = np.diagonal(m).copy()
    v = np.sum(np.abs(m) ** 2, axis=-1) - np.abs(u) ** 2 + noise
    return m, u, v


def make_anchor(chs: ChannelSet, w: np.ndarray, cfg: SystemConfig) -> SurrogatePoint:
    """Recompute all linearization anchors at the current beam."""
    _, u1, v1 = _branch_terms(chs.h_eq_pr, w, cfg.noise_power_w_pr)
    _, u2, v2 = _branch_terms(chs.h_eq_pr + chs.cascade_pr, w, cfg.noise_power_w_pr)
    return SurrogatePoint(u1=u1, v1=v1, u2=u2, v2=v2, w_anchor=w.copy())


def taylor_rate_bound(w: np.ndarray, anchor: SurrogatePoint, chs: ChannelSet,
                      cfg: SystemConfig, k: int) -> tuple[float, float]:
    """Tangent lower bounds of the two SINR ratios of PR k at beam ``w``.

    2 Re(conj(u_dot) u) / v_dot - (|u_dot|^2 / v_dot^2) v never exceeds the
    true ratio |u|^2 / v and matches it at the anchor.
    """
    _, u1, v1 = _branch_terms(chs.h_eq_pr, w, cfg.noise_power_w_pr)
    _, u2, v2 = _branch_terms(chs.h_eq_pr + chs.cascade_pr, w, cfg.noise_power_w_pr)

    def bound(ud, vd, u, v):
        return 2.0 * np.real(np.conj(ud) * u) / vd - (np.abs(ud) ** 2 / vd ** 2) * v

    t1 = bound(anchor.u1[k], anchor.v1[k], u1[k], v1[k])
    t2 = bound(anchor.u2[k], anchor.v2[k], u2[k], v2[k])
    return float(t1), float(t2)


def detection_linearization(w: np.ndarray, anchor_w: np.ndarray, chs: ChannelSet,
                            cfg: SystemConfig) -> float:
    """Tangent lower bound of the received backscatter power at ``w``.

    gamma_b(W) - varpi = ||row(W) - row(W_anchor)||^2 >= 0, with equality at
    the anchor.
    """
    row = chs.cascade_ir @ w
    row_dot = chs.cascade_ir @ anchor_w
    return float(2.0 * np.real(np.vdot(row_dot, row)) - np.linalg.norm(row_dot) ** 2)


# -- convex subproblem -------------------------------------------------------

def _surrogate_value(w: np.ndarray, anchor: SurrogatePoint, chs: ChannelSet,
                     cfg: SystemConfig) -> float:
    """Concave surrogate objective; -inf outside the log domain."""
    _, u1, v1 = _branch_terms(chs.h_eq_pr, w, cfg.noise_power_w_pr)
    _, u2, v2 = _branch_terms(chs.h_eq_pr + chs.cascade_pr, w, cfg.noise_power_w_pr)
    t1 = 2.0 * np.real(np.conj(anchor.u1) * u1) / anchor.v1 \
        - (np.abs(anchor.u1) ** 2 / anchor.v1 ** 2) * v1
    t2 = 2.0 * np.real(np.conj(anchor.u2) * u2) / anchor.v2 \
        - (np.abs(anchor.u2) ** 2 / anchor.v2 ** 2) * v2
    if np.any(1.0 + t1 <= 0.0) or np.any(1.0 + t2 <= 0.0):
        return -np.inf
    return float(0.5 * np.sum(np.log2(1.0 + t1)) + 0.5 * np.sum(np.log2(1.0 + t2)))


def _surrogate_gradient(w: np.ndarray, anchor: SurrogatePoint, chs: ChannelSet,
                        cfg: SystemConfig) -> np.ndarray:
    """Ascent direction (dS/dRe(W) + j dS/dIm(W)) of the surrogate."""

    def branch_part(rows, ud, vd):
        m, _, v = _branch_terms(rows, w, cfg.noise_power_w_pr)
        t = 2.0 * np.real(np.conj(ud) * np.diagonal(m)) / vd - (np.abs(ud) ** 2 / vd ** 2) * v
        coef = 0.5 / ((1.0 + t) * LN2)
        p = (-coef * np.abs(ud) ** 2 / vd ** 2)[:, None] * m
        np.fill_diagonal(p, coef * ud / vd)
        return rows.conj().T @ p

    g = branch_part(chs.h_eq_pr, anchor.u1, anchor.v1) \
        + branch_part(chs.h_eq_pr + chs.cascade_pr, anchor.u2, anchor.v2)
    return 2.0 * g


def _halfspace(anchor_w: np.ndarray, chs: ChannelSet, cfg: SystemConfig):
    """Linearized detection constraint as (Q, beta): Re<Q, W>_F >= beta."""
    row_dot = chs.cascade_ir @ anchor_w                       # (K,)
    q = np.outer(np.conj(chs.cascade_ir), row_dot)            # (N, K)
    beta = 0.5 * (gamma_b_requirement(cfg) + np.linalg.norm(row_dot) ** 2)
    return q, beta


def _project_intersection(w: np.ndarray, q: np.ndarray, beta: float,
                          cfg: SystemConfig, iters: int = 60) -> np.ndarray:
    """Dykstra projection onto {power ball} cap {Re<Q, W> >= beta}."""
    qn2 = np.real(np.vdot(q, q))

    def proj_half(v):
        if qn2 == 0.0:
            return v
        gap = beta - np.real(np.vdot(q, v))
        return v + (max(0.0, gap) / qn2) * q if gap > 0 else v

    ball = project_power(w, cfg)
    if np.real(np.vdot(q, ball)) >= beta - 1e-18:
        return ball
    half = proj_half(w)
    if np.sum(np.abs(half) ** 2) <= cfg.max_power_w:
        return half
    p = np.zeros_like(w)
    r = np.zeros_like(w)
    y = w
    for _ in range(iters):
        u = project_power(y + p, cfg)
        p = y + p - u
        y = proj_half(u + r)
        r = u + r - y
    return project_power(y, cfg)


def solve_sca_subproblem(anchor: SurrogatePoint, chs: ChannelSet, cfg: SystemConfig,
                         sca_cfg: ScaConfig) -> np.ndarray:
    """Maximize the concave surrogate over the feasible beams.

    Projected gradient ascent with a monotone backtracking line search,
    started at the anchor (always feasible for its own linearization), so the
    returned beam never scores below the anchor.
    """
    if sca_cfg.enforce_detection:
        q, beta = _halfspace(anchor.w_anchor, chs, cfg)
        proj = lambda v: _project_intersection(v, q, beta, cfg)
    else:
        proj = lambda v: project_power(v, cfg)

    w = proj(anchor.w_anchor.copy())
    val = _surrogate_value(w, anchor, chs, cfg)
    step = sca_cfg.subproblem_step_init
    for _ in range(sca_cfg.subproblem_max_steps):
        grad = _surrogate_gradient(w, anchor, chs, cfg)
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        improved = False
        s = step
        for _ in range(40):
            cand = proj(w + s * grad / gnorm)
            cand_val = _surrogate_value(cand, anchor, chs, cfg)
            if cand_val > val:
                improved = True
                break
            s *= 0.5
        if not improved:
            break
        gain = cand_val - val
        w, val = cand, cand_val
        step = min(s * 2.0, 1e3)
        if gain < sca_cfg.subproblem_tol:
            break
    return w


def restore_detection(chs: ChannelSet, w: np.ndarray, cfg: SystemConfig,
                      margin: float = 1e-9) -> np.ndarray:
    """Make the beam detection-feasible before SCA starts.

    One closed-form maximization of the linearized backscatter power over the
    power ball reaches the global maximizer of the true power; the returned
    beam blends the original toward it just enough to clear the constraint.
    Raises DetectionInfeasible when even full power cannot meet it.
    """
    need = kl_requirement(cfg)
    if float(detection_metric(chs, w, cfg).kl) >= need:
        return w
    qvec = np.conj(chs.cascade_ir)
    qn = np.linalg.norm(qvec)
    if qn == 0.0 or cfg.max_power_w * qn ** 2 < gamma_b_requirement(cfg) * (1.0 + margin):
        raise DetectionInfeasible(
            "detection constraint unreachable: max backscatter power "
            f"{cfg.max_power_w * qn ** 2:.3e} W below requirement "
            f"{gamma_b_requirement(cfg):.3e} W")
    row = chs.cascade_ir @ w
    q_dir = np.outer(qvec, row)
    if np.linalg.norm(q_dir) == 0.0:
        w_star = np.zeros_like(w)
        w_star[:, 0] = math.sqrt(cfg.max_power_w) * qvec / qn
    else:
        w_star = math.sqrt(cfg.max_power_w) * q_dir / np.linalg.norm(q_dir)
    for tau in np.geomspace(1e-6, 1.0, 80):
        cand = project_power(math.sqrt(1.0 - tau) * w + math.sqrt(tau) * w_star, cfg)
        if float(detection_metric(chs, cand, cfg).kl) >= need:
            return cand
    return project_power(w_star, cfg)


def sca_loop_channels(chs: ChannelSet, w0: np.ndarray, cfg: SystemConfig,
                      sca_cfg: ScaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Algorithm-1 iteration on a prebuilt channel set; returns (W, objective trace)."""
    w = project_power(np.asarray(w0, dtype=complex), cfg)
    if sca_cfg.enforce_detection:
        w = restore_detection(chs, w, cfg)
    trace = [float(sum_rate(chs, w, cfg).sum_rate)]
    for _ in range(sca_cfg.max_outer_iterations):
        anchor = make_anchor(chs, w, cfg)
        w = solve_sca_subproblem(anchor, chs, cfg, sca_cfg)
        trace.append(float(sum_rate(chs, w, cfg).sum_rate))
        if abs(trace[-1] - trace[-2]) <= sca_cfg.tol:
            break
    return w, np.asarray(trace)


def sca_loop(x: np.ndarray, w0: np.ndarray, geom: Geometry, cfg: SystemConfig,
             sca_cfg: ScaConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Optimize the transmit beam for a fixed PA layout ``x``."""
    return sca_loop_channels(build_channels(x, geom, cfg), w0, cfg,
                             sca_cfg or ScaConfig())
