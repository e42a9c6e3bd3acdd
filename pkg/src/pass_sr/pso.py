"""Particle swarm search over PA placements with a fixed transmit beam.

Each particle is one full N x M candidate layout (the per-waveguide swarms
share a common fitness, so they advance as synchronized blocks of one
composite particle). Spacing and detection violations are not repaired
during the search; they subtract a fixed penalty per violated constraint
from the fitness, and only the delivered global best is repaired.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .channels import build_channels
from .config import Geometry, SystemConfig
from .detection import detection_metric, gamma_b_requirement, kl_requirement
from .rates import rzf_beams, sum_rate


@dataclass(frozen=True)
class PsoConfig:
    num_particles: int = 30      # Q
    max_iterations: int = 200    # T
    cognitive: float = 1.5       # c1
    social: float = 1.5          # c2
    inertia_max: float = 0.9
    inertia_min: float = 0.4
    penalty_factor: float = 10.0  # mu, per violated constraint
    velocity_clamp_frac: float = 0.2  # of S_x
    seed: int = 0

    def __post_init__(self):
        if self.num_particles < 2:
            raise ValueError("need at least two particles")
        if not self.inertia_max >= self.inertia_min > 0:
            raise ValueError("require inertia_max >= inertia_min > 0")
        if self.penalty_factor <= 0:
            raise ValueError("penalty factor must be positive")


def pso_fitness(x_cand: np.ndarray, w: np.ndarray, geom: Geometry,
                cfg: SystemConfig, mu: float) -> np.ndarray:
    """Penalized sum rate of candidate layouts (entries must lie in [0, S_x]).

    The penalty counts violations: one per adjacent PA pair closer than
    d_min plus one when the KL detection constraint fails.
    """
    x_cand = np.asarray(x_cand, dtype=float)
    chs = build_channels(x_cand, geom, cfg)
    rates = sum_rate(chs, w, cfg).sum_rate
    kl = detection_metric(chs, w, cfg).kl
    spacing_violations = np.sum(np.diff(x_cand, axis=-1) < cfg.min_spacing_m, axis=(-2, -1))
    detect_violation = (kl < kl_requirement(cfg)).astype(float)
    return rates - mu * (spacing_violations + detect_violation)


def _adaptive_fitness(x_cand: np.ndarray, geom: Geometry, cfg: SystemConfig,
                      mu: float) -> np.ndarray:
    """Fitness under a per-candidate best-response beam surrogate.

    Rates are scored with the closed-form RZF beam of each layout, and the
    detection term penalizes layouts where the constraint is unreachable even
    at full power (a reachable one is enforced later by the beam stage).
    """
    x_cand = np.asarray(x_cand, dtype=float)
    chs = build_channels(x_cand, geom, cfg)
    rates = sum_rate(chs, rzf_beams(chs.h_eq_pr, cfg), cfg).sum_rate
    max_gamma = cfg.max_power_w * np.sum(np.abs(chs.cascade_ir) ** 2, axis=-1)
    detect_violation = (max_gamma < gamma_b_requirement(cfg) * (1 + 1e-6)).astype(float)
    spacing_violations = np.sum(np.diff(x_cand, axis=-1) < cfg.min_spacing_m, axis=(-2, -1))
    return rates - mu * (spacing_violations + detect_violation)


@dataclass
class Swarm:
    positions: np.ndarray     # (Q, N, M)
    velocities: np.ndarray    # (Q, N, M)
    pb_positions: np.ndarray  # (Q, N, M)
    pb_fitness: np.ndarray    # (Q,)
    gb_position: np.ndarray   # (N, M)
    gb_fitness: float


def init_swarm(pso_cfg: PsoConfig, cfg: SystemConfig, rng: np.random.Generator,
               fitness, incumbent: np.ndarray | None = None,
               init_radius: float | None = None) -> Swarm:
    """Sorted-uniform random layouts (plus the incumbent as particle 0).

    With ``init_radius`` the particles spread around the incumbent instead of
    the whole waveguide (local-polish mode).
    """
    q, n, m = pso_cfg.num_particles, cfg.num_waveguides, cfg.num_pas_per_waveguide
    if init_radius is not None and incumbent is not None:
        pos = incumbent[None] + rng.uniform(-init_radius, init_radius, size=(q, n, m))
        pos = np.sort(np.clip(pos, 0.0, cfg.region_x_m), axis=-1)
    else:
        pos = np.sort(rng.uniform(0.0, cfg.region_x_m, size=(q, n, m)), axis=-1)
    if incumbent is not None:
        pos[0] = incumbent
    vmax = pso_cfg.velocity_clamp_frac * cfg.region_x_m
    vel = rng.uniform(-vmax, vmax, size=(q, n, m))
    fit = fitness(pos)
    best = int(np.argmax(fit))
    return Swarm(positions=pos, velocities=vel, pb_positions=pos.copy(),
                 pb_fitness=fit.copy(), gb_position=pos[best].copy(),
                 gb_fitness=float(fit[best]))


def pso_step(swarm: Swarm, t: int, pso_cfg: PsoConfig, fitness,
             cfg: SystemConfig, rng: np.random.Generator) -> Swarm:
    """One generation: inertia-scheduled velocity update, move, clamp, re-evaluate."""
    q = swarm.positions.shape[0]
    omega0 = pso_cfg.inertia_max \
        - (pso_cfg.inertia_max - pso_cfg.inertia_min) * t / pso_cfg.max_iterations
    omega1 = rng.uniform(size=(q, 1, 1))
    omega2 = rng.uniform(size=(q, 1, 1))
    vel = omega0 * swarm.velocities \
        + omega1 * pso_cfg.cognitive * (swarm.pb_positions - swarm.positions) \
        + omega2 * pso_cfg.social * (swarm.gb_position[None] - swarm.positions)
    pos = swarm.positions + vel
    np.clip(pos, 0.0, cfg.region_x_m, out=pos)
    vmax = pso_cfg.velocity_clamp_frac * cfg.region_x_m
    np.clip(vel, -vmax, vmax, out=vel)

    fit = fitness(pos)
    improved = fit > swarm.pb_fitness
    pb_pos = np.where(improved[:, None, None], pos, swarm.pb_positions)
    pb_fit = np.where(improved, fit, swarm.pb_fitness)
    best = int(np.argmax(pb_fit))
    if pb_fit[best] > swarm.gb_fitness:
        gb_pos, gb_fit = pb_pos[best].copy(), float(pb_fit[best])
    else:
        gb_pos, gb_fit = swarm.gb_position, swarm.gb_fitness
    return Swarm(positions=pos, velocities=vel, pb_positions=pb_pos,
                 pb_fitness=pb_fit, gb_position=gb_pos, gb_fitness=gb_fit)


def solve_pso(w: np.ndarray, geom: Geometry, cfg: SystemConfig,
              pso_cfg: PsoConfig | None = None,
              incumbent: np.ndarray | None = None,
              adaptive_beam: bool = False,
              init_radius: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run the swarm for T generations; returns (global best X, best-fitness trace).

    With ``adaptive_beam`` the fitness scores each layout under its own RZF
    best-response beam instead of the frozen ``w`` (used by the alternating
    solver, whose frozen beam is phase-matched to the incumbent layout and
    would under-score every alternative).
    """
    pso_cfg = pso_cfg or PsoConfig()
    rng = np.random.default_rng(pso_cfg.seed)
    if adaptive_beam:
        fitness = lambda xs: _adaptive_fitness(xs, geom, cfg, pso_cfg.penalty_factor)
    else:
        fitness = lambda xs: pso_fitness(xs, w, geom, cfg, pso_cfg.penalty_factor)
    swarm = init_swarm(pso_cfg, cfg, rng, fitness, incumbent, init_radius)
    trace = [swarm.gb_fitness]
    for t in range(pso_cfg.max_iterations):
        swarm = pso_step(swarm, t, pso_cfg, fitness, cfg, rng)
        trace.append(swarm.gb_fitness)
    return swarm.gb_position.copy(), np.asarray(trace)


def solve_pso_waveguide(w: np.ndarray, geom: Geometry, cfg: SystemConfig,
                        pso_cfg: PsoConfig, incumbent: np.ndarray,
                        waveguide: int, adaptive_beam: bool = True) -> np.ndarray:
    """One waveguide's swarm: search row ``waveguide`` with the others frozen.

    The per-waveguide swarms share the full-layout fitness; running them as
    block updates keeps each search space M-dimensional.
    """
    rng = np.random.default_rng(pso_cfg.seed)
    incumbent = np.asarray(incumbent, dtype=float)

    def embed(rows: np.ndarray) -> np.ndarray:
        full = np.broadcast_to(incumbent, rows.shape[:-2] + incumbent.shape).copy()
        full[..., waveguide, :] = rows[..., 0, :]
        return full

    if adaptive_beam:
        fitness = lambda rows: _adaptive_fitness(embed(rows), geom, cfg,
                                                 pso_cfg.penalty_factor)
    else:
        fitness = lambda rows: pso_fitness(embed(rows), w, geom, cfg,
                                           pso_cfg.penalty_factor)

    q, m = pso_cfg.num_particles, cfg.num_pas_per_waveguide
    pos = np.sort(rng.uniform(0.0, cfg.region_x_m, size=(q, 1, m)), axis=-1)
    pos[0, 0] = incumbent[waveguide]
    vmax = pso_cfg.velocity_clamp_frac * cfg.region_x_m
    vel = rng.uniform(-vmax, vmax, size=(q, 1, m))
    fit = fitness(pos)
    best = int(np.argmax(fit))
    swarm = Swarm(positions=pos, velocities=vel, pb_positions=pos.copy(),
                  pb_fitness=fit.copy(), gb_position=pos[best].copy(),
                  gb_fitness=float(fit[best]))
    for t in range(pso_cfg.max_iterations):
        swarm = pso_step(swarm, t, pso_cfg, fitness, cfg, rng)
    return embed(swarm.gb_position[None])[0]


# -- delivery repair ----------------------------------------------------------

def _isotonic_nondecreasing(y: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto non-decreasing sequences."""
    vals = list()
    counts = list()
    for v in y:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2, c2 = vals.pop(), counts.pop()
            v1, c1 = vals.pop(), counts.pop()
            vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            counts.append(c1 + c2)
    return np.repeat(vals, counts)


def repair_spacing(x: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Nearest spacing- and range-feasible layout (no-op on feasible rows).

    Each row is sorted, projected onto the minimum-spacing cone via isotonic
    regression of the spacing-shifted coordinates, then shifted (and, in the
    rare case the repaired span overruns the waveguide, proportionally
    shrunk) back into [0, S_x].
    """
    x = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    d = cfg.min_spacing_m
    m = x.shape[-1]
    shift = d * np.arange(m)
    for row in x:
        row.sort()
        if m >= 2 and np.min(np.diff(row)) < d:
            row[:] = _isotonic_nondecreasing(row - shift) + shift
        row += max(0.0, -row[0])
        over = row[-1] - cfg.region_x_m
        if over > 0.0:
            down = min(over, row[0])
            row -= down
            over -= down
        if over > 0.0 and m >= 2:
            # span exceeds the waveguide: shrink gaps toward d_min (always
            # sufficient since (M-1) d_min <= S_x)
            gaps = np.diff(row)
            reducible = float(np.sum(gaps - d))
            gaps -= (gaps - d) * (over / reducible)
            row[0] = 0.0
            row[1:] = np.cumsum(gaps)
    return x
