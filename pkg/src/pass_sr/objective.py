"""Penalized objective and constraint residuals shared by all solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .config import SystemConfig
from .detection import detection_metric, kl_requirement
from .rates import sum_rate


def penalty_objective(chs: ChannelSet, w: np.ndarray, cfg: SystemConfig,
                      xi: float) -> float | np.ndarray:
    """F = -sum_rate + xi * max(0, 2 eps^2 - KL)^2 (to be minimized)."""
    if xi <= 0:
        raise ValueError("penalty weight xi must be positive")
    rates = sum_rate(chs, w, cfg)
    det = detection_metric(chs, w, cfg)
    violation = np.maximum(0.0, kl_requirement(cfg) - det.kl)
    return -rates.sum_rate + xi * violation ** 2


@dataclass(frozen=True)
class FeasibilityReport:
    """Signed constraint residuals; every residual >= -tol means feasible.

    Vacuous constraints (no PA positions, or M == 1 for spacing) report 0.
    """

    power_residual: float       # P_max - tr(W W^H)
    detection_residual: float   # KL - 2 eps^2
    spacing_residual: float     # min spacing slack over adjacent PA pairs
    range_residual: float       # min distance of any PA inside [0, S_x]

    def min_residual(self) -> float:
        return min(self.power_residual, self.detection_residual,
                   self.spacing_residual, self.range_residual)

    def is_feasible(self, tol: float = 1e-6) -> bool:
        return self.min_residual() >= -tol


def feasibility_check(x: np.ndarray | None, w: np.ndarray, chs: ChannelSet,
                      cfg: SystemConfig) -> FeasibilityReport:
    """Residuals of constraints (11b)-(11e) for a candidate solution."""
    power = cfg.max_power_w - float(np.sum(np.abs(w) ** 2))
    det = detection_metric(chs, w, cfg)
    detection = float(det.kl) - kl_requirement(cfg)
    if x is None:
        spacing = 0.0
        range_ = 0.0
    else:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] >= 2:
            spacing = float(np.min(np.diff(x, axis=-1))) - cfg.min_spacing_m
        else:
            spacing = 0.0
        range_ = float(min(np.min(x), np.min(cfg.region_x_m - x)))
    return FeasibilityReport(power_residual=power, detection_residual=detection,
                             spacing_residual=spacing, range_residual=range_)
