import numpy as np
import pytest

from pass_sr.config import Geometry, SystemConfig, waveguide_y_grid


def random_geometry(cfg: SystemConfig, rng: np.random.Generator) -> Geometry:
    """Uniform receiver placements inside the deployment rectangle."""
    k = cfg.num_prs
    pr = np.column_stack([rng.uniform(0, cfg.region_x_m, k),
                          rng.uniform(0, cfg.region_y_m, k),
                          np.zeros(k)])
    ir = np.array([rng.uniform(0, cfg.region_x_m), rng.uniform(0, cfg.region_y_m), 0.0])
    return Geometry(waveguide_y_m=waveguide_y_grid(cfg), pr_positions_m=pr,
                    ir_position_m=ir, bd_position_m=np.asarray(cfg.bd_position_m))


def random_beam(cfg: SystemConfig, rng: np.random.Generator, power: float | None = None):
    w = rng.standard_normal((cfg.num_waveguides, cfg.num_prs)) \
        + 1j * rng.standard_normal((cfg.num_waveguides, cfg.num_prs))
    if power is not None:
        w *= np.sqrt(power) / np.linalg.norm(w)
    return w


def random_layout(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Spacing-feasible random PA positions."""
    n, m = cfg.num_waveguides, cfg.num_pas_per_waveguide
    budget = cfg.offset_budget_m
    dx = rng.uniform(0, budget / (m + 1), size=(n, m))
    from pass_sr.lgd import offsets_to_positions
    return offsets_to_positions(dx, cfg)


@pytest.fixture
def default_cfg() -> SystemConfig:
    return SystemConfig()


@pytest.fixture
def small_cfg() -> SystemConfig:
    return SystemConfig(num_waveguides=2, num_prs=2, num_pas_per_waveguide=2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
