"""Line-of-sight channel assembly for the PASS downlink.

Every PA-to-receiver link follows the geometric free-space spherical model
kappa * exp(-j beta_h r) / r; the feed-to-PA segment inside waveguide n adds
the guided phase exp(-j beta_g x_{n,m}) weighted by the per-PA amplitude.
Collapsing the 1 x NM receiver row against the NM x N block-diagonal
in-waveguide response yields one equivalent complex coefficient per
waveguide, which is all the rate and detection math ever needs.

All position arguments broadcast over leading batch dimensions, so a swarm
of candidate layouts or a grid scan is a single vectorized call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Geometry, SystemConfig


def free_space_channel(pa_pos: np.ndarray, rx_pos: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Spherical-wave channel kappa * exp(-j beta_h r) / r between 3-D points.

    ``pa_pos`` and ``rx_pos`` are (..., 3) arrays broadcast against each other.
    Raises ValueError when any pair coincides (the model is singular at r=0).
    """
    diff = np.asarray(rx_pos, dtype=float) - np.asarray(pa_pos, dtype=float)
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("zero PA-receiver distance: free-space model is singular")
    return cfg.kappa * np.exp(-1j * cfg.beta_h * r) / r


def waveguide_response(x_row: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """In-waveguide response g(x_n): entry m is v_m * exp(-j beta_g x_{n,m})."""
    x_row = np.asarray(x_row, dtype=float)
    amps = np.asarray(cfg.amplitudes)
    return amps * np.exp(-1j * cfg.beta_g * x_row)


@dataclass(frozen=True)
class ChannelSet:
    """Equivalent channels of one PA layout (arrays broadcast over batch dims).

    h_eq_pr[..., k, n] is the k-th PR's equivalent coefficient on waveguide n,
    h_eq_bd[..., n] the BD's. The backscatter cascades are exact scalar
    multiples of h_eq_bd by construction.
    """

    h_eq_pr: np.ndarray    # (..., K, N) complex
    h_eq_bd: np.ndarray    # (..., N) complex
    f_bd_pr: np.ndarray    # (K,) complex, BD -> PR_k reflection links
    f_bd_ir: complex       # BD -> IR reflection link

    @property
    def cascade_pr(self) -> np.ndarray:
        """f_{b,k} = f_BD,k * h_eq_bd, shape (..., K, N)."""
        return self.f_bd_pr[:, None] * self.h_eq_bd[..., None, :]

    @property
    def cascade_ir(self) -> np.ndarray:
        """f_{b,IR} = f_BD,IR * h_eq_bd, shape (..., N)."""
        return self.f_bd_ir * self.h_eq_bd

    def magnitude_bound(self, x: np.ndarray, geom: Geometry, cfg: SystemConfig) -> float:
        """Loose physical cap on any equivalent-channel entry: kappa*M*max(v)/r_min."""
        pa = pa_positions_3d(x, geom, cfg)
        rx = np.vstack([geom.pr_positions_m, geom.bd_position_m[None, :]])
        r = np.linalg.norm(rx[:, None, None, :] - pa[None, ...], axis=-1)
        return cfg.kappa * cfg.num_pas_per_waveguide * max(cfg.amplitudes) / float(r.min())


def pa_positions_3d(x: np.ndarray, geom: Geometry, cfg: SystemConfig) -> np.ndarray:
    """Lift PA x-coordinates (..., N, M) to 3-D points (..., N, M, 3)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (3,), dtype=float)
    out[..., 0] = x
    out[..., 1] = geom.waveguide_y_m[:, None]
    out[..., 2] = cfg.pa_height_m
    return out


def _equivalent_rows(x: np.ndarray, rx_positions: np.ndarray, geom: Geometry,
                     cfg: SystemConfig) -> np.ndarray:
    """Per-receiver equivalent channel rows.

    x: (..., N, M) PA x-coordinates; rx_positions: (R, 3).
    Returns (..., R, N) with entry [r, n] = sum_m h_{r,n,m}(x) g_m(x_{n,m}).
    """
    pa = pa_positions_3d(x, geom, cfg)                      # (..., N, M, 3)
    rx = np.asarray(rx_positions, dtype=float)              # (R, 3)
    diff = rx[:, None, None, :] - pa[..., None, :, :, :]    # (..., R, N, M, 3)
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("zero PA-receiver distance: free-space model is singular")
    h = cfg.kappa * np.exp(-1j * cfg.beta_h * r) / r
    g = waveguide_response(x, cfg)[..., None, :, :]         # (..., 1, N, M)
    return np.sum(h * g, axis=-1)                           # (..., R, N)


def build_channels(x: np.ndarray, geom: Geometry, cfg: SystemConfig) -> ChannelSet:
    """Assemble all equivalent channels and backscatter cascades for a PA layout ``x``.

    ``x`` may carry leading batch dimensions: (..., N, M).
    """
    x = np.asarray(x, dtype=float)
    rx = np.vstack([geom.pr_positions_m, geom.bd_position_m[None, :]])
    rows = _equivalent_rows(x, rx, geom, cfg)               # (..., K+1, N)
    h_eq_pr = rows[..., :-1, :]
    h_eq_bd = rows[..., -1, :]
    f_bd_pr = cfg.bd_reflection_pr * free_space_channel(
        geom.bd_position_m, geom.pr_positions_m, cfg)       # (K,)
    f_bd_ir = complex(cfg.bd_reflection_ir * free_space_channel(
        geom.bd_position_m, geom.ir_position_m, cfg))
    return ChannelSet(h_eq_pr=h_eq_pr, h_eq_bd=h_eq_bd, f_bd_pr=f_bd_pr, f_bd_ir=f_bd_ir)
