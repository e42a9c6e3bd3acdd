"""Alternating two-stage solver: SCA on the beam, PSO on the PA layout.

Each outer round re-optimizes the beam for the current layout, lets the
swarm propose a new layout (scored under per-candidate best-response beams,
since the frozen stage-1 beam is phase-matched to the incumbent layout and
would under-score every alternative), and then refits the beam to the
proposal. A round whose refitted true sum rate is lower than the incumbent's
is rejected and only counts toward convergence, so the per-round objective
trace is non-decreasing by construction.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from .baselines import fixed_pa_layout
from .channels import build_channels
from .config import Geometry, SystemConfig
from .detection import detection_metric
from .lgd import project_power
from .objective import feasibility_check
from .pso import PsoConfig, repair_spacing, solve_pso, solve_pso_waveguide
from .rates import sum_rate
from .report import SolveReport
from .sca import DetectionInfeasible, ScaConfig, sca_loop_channels


def solve_sca_pso(geom: Geometry, cfg: SystemConfig,
                  sca_cfg: ScaConfig | None = None,
                  pso_cfg: PsoConfig | None = None,
                  outer_max: int = 12, outer_tol: float = 1e-3,
                  seed: int = 0) -> SolveReport:
    """Alternate the two stages from a fixed-PA / random-beam start.

    Round 0 runs the composite swarm over all waveguides at once; later
    rounds cycle the per-waveguide swarms (block updates over one row with
    the rest frozen), each followed by an SCA beam refit and the
    accept-or-reject comparison on the true sum rate.
    """
    sca_cfg = sca_cfg or ScaConfig()
    pso_cfg = pso_cfg or PsoConfig()
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()

    x = fixed_pa_layout(cfg)
    w = rng.standard_normal((cfg.num_waveguides, cfg.num_prs)) \
        + 1j * rng.standard_normal((cfg.num_waveguides, cfg.num_prs))
    w = project_power(w * np.sqrt(cfg.max_power_w) / np.linalg.norm(w), cfg)
    w, _ = sca_loop_channels(build_channels(x, geom, cfg), w, cfg, sca_cfg)
    trace = [float(sum_rate(build_channels(x, geom, cfg), w, cfg).sum_rate)]

    rounds = 0
    converged = False
    for r in range(outer_max):
        rounds += 1
        stage_cfg = replace(pso_cfg, seed=pso_cfg.seed + 7919 * r + seed)
        if r == 0:
            x_cand, _ = solve_pso(w, geom, cfg, stage_cfg, incumbent=x,
                                  adaptive_beam=True)
        else:
            wg = (r - 1) % cfg.num_waveguides
            x_cand = solve_pso_waveguide(w, geom, cfg, stage_cfg, x, wg)
        x_cand = repair_spacing(x_cand, cfg)
        if np.min(np.diff(x_cand, axis=-1), initial=np.inf) >= cfg.min_spacing_m - 1e-9:
            try:
                w_cand, _ = sca_loop_channels(build_channels(x_cand, geom, cfg), w,
                                              cfg, sca_cfg)
                cand_rate = float(sum_rate(build_channels(x_cand, geom, cfg),
                                           w_cand, cfg).sum_rate)
            except DetectionInfeasible:
                cand_rate = -np.inf
            if cand_rate >= trace[-1]:
                x, w = x_cand, w_cand
        trace.append(float(sum_rate(build_channels(x, geom, cfg), w, cfg).sum_rate))
        # converged once a full cycle of waveguide polishes brings < outer_tol
        window = 1 + cfg.num_waveguides
        if len(trace) > window and trace[-1] - trace[-1 - window] < outer_tol:
            converged = True
            break

    chs = build_channels(x, geom, cfg)
    rates = sum_rate(chs, w, cfg)
    det = detection_metric(chs, w, cfg)
    residuals = feasibility_check(x, w, chs, cfg)
    return SolveReport(
        solver="scapso", x=x, w=w, rates=rates, detection=det, residuals=residuals,
        objective_trace=np.asarray(trace), iterations=rounds,
        wall_ms=(time.perf_counter() - t0) * 1e3, seed=seed, converged=converged,
        feasible=residuals.is_feasible())
