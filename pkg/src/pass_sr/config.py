"""System-level configuration and deployment geometry.

All quantities are SI internally (meters, watts, Hz). dBm values are
converted exactly once at the config boundary via :func:`dbm_to_watt`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s


def dbm_to_watt(dbm: float) -> float:
    """Convert dBm to watts. Exact for integer dBm: -80 dBm -> 1e-11 W, 30 dBm -> 1 W."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    """Convert watts to dBm."""
    return 10.0 * math.log10(watt) + 30.0


def default_amplitude_profile(num_pas: int) -> tuple[float, ...]:
    """Equal in-waveguide power split across the PAs of one waveguide (unit total)."""
    return (1.0 / math.sqrt(num_pas),) * num_pas


@dataclass(frozen=True)
class SystemConfig:
    """Physical constants of the PASS-assisted symbiotic-radio downlink.

    Geometry: N waveguides parallel to the x-axis at height ``pa_height_m``,
    each carrying M pinching antennas whose x-coordinates are the pinching
    beamforming variables. K single-antenna primary receivers plus one IoT
    receiver live on the ground plane; a single backscatter device sits at
    a fixed position and embeds an on-off keyed symbol onto the downlink.
    """

    carrier_frequency_hz: float = 28e9
    effective_refractive_index: float = 1.4
    num_waveguides: int = 2            # N
    num_pas_per_waveguide: int = 3     # M
    num_prs: int = 2                   # K
    pa_height_m: float = 5.0
    region_x_m: float = 30.0           # S_x, waveguide length
    region_y_m: float = 4.0            # S_y
    min_spacing_m: float = 0.1         # d_min between adjacent PAs
    max_power_w: float = 1.0           # 30 dBm
    noise_power_w_pr: float = 1e-11    # -80 dBm
    noise_power_w_ir: float = 1e-11    # -80 dBm
    symbol_ratio: int = 50             # L, BD symbol spans L downlink symbols
    detection_threshold: float = 0.95  # epsilon, target detection probability
    bd_position_m: tuple[float, float, float] = (5.0, 2.0, 2.0)
    # Reflection magnitudes of the backscatter device toward the PRs and the
    # IR. The BD->receiver link reuses the spherical spreading model of the
    # direct links scaled by these factors; the IR-side value defaults high
    # enough that the detection constraint is attainable within max_power_w
    # anywhere in the deployment region (the double spherical path loss at
    # 28 GHz would otherwise make it unreachable by ~5 orders of magnitude).
    bd_reflection_pr: float = 0.8
    bd_reflection_ir: float = 2000.0
    # Per-PA in-waveguide amplitudes v_1..v_M; None means equal power split
    # 1/sqrt(M). An entry of 0.0 deactivates that PA.
    amplitude_profile: tuple[float, ...] | None = None

    def __post_init__(self):
        if min(self.carrier_frequency_hz, self.pa_height_m, self.region_x_m,
               self.region_y_m, self.min_spacing_m, self.max_power_w,
               self.noise_power_w_pr, self.noise_power_w_ir) <= 0:
            raise ValueError("lengths, powers and frequencies must be strictly positive")
        if self.effective_refractive_index <= 0:
            raise ValueError("effective refractive index must be positive")
        if self.num_waveguides < 1 or self.num_pas_per_waveguide < 1 or self.num_prs < 1:
            raise ValueError("N, M, K must all be >= 1")
        if self.num_waveguides < self.num_prs:
            raise ValueError("need at least as many waveguides as PRs (N >= K)")
        if self.num_pas_per_waveguide * self.min_spacing_m > self.region_x_m:
            raise ValueError("M*d_min exceeds the waveguide length S_x")
        if not 0.0 < self.detection_threshold < 1.0:
            raise ValueError("detection threshold must lie in (0, 1)")
        if self.symbol_ratio < 1:
            raise ValueError("symbol ratio L must be a positive integer")
        amps = self.amplitudes
        if len(amps) != self.num_pas_per_waveguide:
            raise ValueError("amplitude profile length must equal M")
        if any(a < 0.0 or a > 1.0 for a in amps):
            raise ValueError("amplitude profile entries must lie in [0, 1]")

    # -- derived constants -------------------------------------------------

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def kappa(self) -> float:
        """Free-space channel gain constant c / (4 pi f_c)."""
        return SPEED_OF_LIGHT / (4.0 * math.pi * self.carrier_frequency_hz)

    @property
    def beta_h(self) -> float:
        """Free-space wavenumber 2 pi / lambda."""
        return 2.0 * math.pi / self.wavelength_m

    @property
    def beta_g(self) -> float:
        """In-waveguide propagation constant 2 pi n_eff / lambda."""
        return 2.0 * math.pi * self.effective_refractive_index / self.wavelength_m

    @property
    def amplitudes(self) -> tuple[float, ...]:
        if self.amplitude_profile is None:
            return default_amplitude_profile(self.num_pas_per_waveguide)
        return tuple(float(a) for a in self.amplitude_profile)

    @property
    def offset_budget_m(self) -> float:
        """Per-waveguide offset budget Delta_max = S_x - (M-1) d_min."""
        return self.region_x_m - (self.num_pas_per_waveguide - 1) * self.min_spacing_m

    def with_power_dbm(self, dbm: float) -> "SystemConfig":
        return replace(self, max_power_w=dbm_to_watt(dbm))


def waveguide_y_grid(cfg: SystemConfig) -> np.ndarray:
    """Waveguide y-coordinates, uniformly spaced S_y/N across the region."""
    n = cfg.num_waveguides
    return (np.arange(n) + 0.5) * cfg.region_y_m / n


@dataclass(frozen=True)
class Geometry:
    """One deployment: waveguide grid plus receiver and BD placements (z=0 receivers)."""

    waveguide_y_m: np.ndarray          # (N,)
    pr_positions_m: np.ndarray         # (K, 3)
    ir_position_m: np.ndarray          # (3,)
    bd_position_m: np.ndarray          # (3,)

    def __post_init__(self):
        object.__setattr__(self, "waveguide_y_m", np.asarray(self.waveguide_y_m, dtype=float))
        object.__setattr__(self, "pr_positions_m", np.asarray(self.pr_positions_m, dtype=float))
        object.__setattr__(self, "ir_position_m", np.asarray(self.ir_position_m, dtype=float))
        object.__setattr__(self, "bd_position_m", np.asarray(self.bd_position_m, dtype=float))
        if self.pr_positions_m.ndim != 2 or self.pr_positions_m.shape[1] != 3:
            raise ValueError("pr_positions_m must have shape (K, 3)")
        dy = np.diff(self.waveguide_y_m)
        if dy.size and np.any(dy <= 0):
            raise ValueError("waveguide y-coordinates must be strictly increasing")

    def validate_region(self, cfg: SystemConfig) -> None:
        """Check receivers lie inside [0, S_x] x [0, S_y] and waveguides are on the S_y/N grid."""
        rx = np.vstack([self.pr_positions_m, self.ir_position_m[None, :]])
        if np.any(rx[:, 0] < -1e-12) or np.any(rx[:, 0] > cfg.region_x_m + 1e-12):
            raise ValueError("receiver x-coordinate outside [0, S_x]")
        if np.any(rx[:, 1] < -1e-12) or np.any(rx[:, 1] > cfg.region_y_m + 1e-12):
            raise ValueError("receiver y-coordinate outside [0, S_y]")
        expected = waveguide_y_grid(cfg)
        if self.waveguide_y_m.shape != expected.shape or not np.allclose(self.waveguide_y_m, expected):
            raise ValueError("waveguide grid does not match the uniform S_y/N layout")
