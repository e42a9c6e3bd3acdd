"""Backscatter detection performance at the IoT receiver.

After SIC the IR distinguishes noise-only from cascade-plus-noise samples;
over one BD symbol (L downlink symbols) the Kullback-Leibler divergence
between the two hypotheses is L * (ln rho + 1/rho - 1) with
rho = (gamma_b + noise) / noise, and 1 - sqrt(KL/2) upper-bounds the
detection error probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .channels import ChannelSet
from .config import SystemConfig


@dataclass(frozen=True)
class DetectionMetric:
    gamma_b: np.ndarray         # received backscatter power at the IR
    rho: np.ndarray             # (gamma_b + noise) / noise, >= 1
    kl: np.ndarray              # KL divergence between the two hypotheses
    pe_upper_bound: np.ndarray  # 1 - sqrt(kl/2), clamped to [0, 1]


def kl_from_rho(rho: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """L * (ln rho + 1/rho - 1); zero iff rho == 1, strictly increasing for rho >= 1."""
    rho = np.asarray(rho, dtype=float)
    return cfg.symbol_ratio * (np.log(rho) + 1.0 / rho - 1.0)


def kl_requirement(cfg: SystemConfig) -> float:
    """Lower bound 2 * epsilon^2 the KL divergence must meet."""
    return 2.0 * cfg.detection_threshold ** 2


def detection_metric(chs: ChannelSet, w: np.ndarray, cfg: SystemConfig) -> DetectionMetric:
    """Detection statistics of beam ``w``; broadcasts over batched channel sets."""
    row = chs.cascade_ir[..., None, :] @ w              # (..., 1, K)
    gamma_b = np.sum(np.abs(row) ** 2, axis=(-2, -1))
    rho = 1.0 + gamma_b / cfg.noise_power_w_ir
    kl = kl_from_rho(rho, cfg)
    pe = np.clip(1.0 - np.sqrt(kl / 2.0), 0.0, 1.0)
    return DetectionMetric(gamma_b=gamma_b, rho=rho, kl=kl, pe_upper_bound=pe)


def rho_root_for_target(target: float) -> float:
    """Upper root rho >= 1 of ln rho + 1/rho - 1 = target.

    The left side is strictly increasing from 0 on rho >= 1, so the root is
    unique; the lower root below 1 is discarded since rho >= 1 always.
    """
    if target <= 0.0:
        return 1.0
    f = lambda rho: np.log(rho) + 1.0 / rho - 1.0 - target
    hi = 2.0
    while f(hi) < 0.0:
        hi *= 2.0
    return float(brentq(f, 1.0, hi, xtol=1e-14, rtol=1e-12))


def detection_root(cfg: SystemConfig) -> float:
    """Threshold a1 on rho implied by the KL constraint of this config."""
    return rho_root_for_target(kl_requirement(cfg) / cfg.symbol_ratio)


def gamma_b_requirement(cfg: SystemConfig) -> float:
    """Minimum received backscatter power (a1 - 1) * noise implied by the KL constraint."""
    return (detection_root(cfg) - 1.0) * cfg.noise_power_w_ir
