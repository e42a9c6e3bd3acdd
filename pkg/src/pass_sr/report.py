"""Common result container returned by every solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .detection import DetectionMetric
from .objective import FeasibilityReport
from .rates import RateReport


@dataclass
class SolveReport:
    """Outcome of one solver run.

    ``objective_trace`` uses the ascending-is-better convention (sum rate for
    the alternating solvers, sum rate minus penalty for gradient descent) so
    convergence curves from different solvers plot on a common axis.
    ``x`` is None for baselines without pinching positions.
    """

    solver: str
    x: np.ndarray | None
    w: np.ndarray
    rates: RateReport
    detection: DetectionMetric
    residuals: FeasibilityReport
    objective_trace: np.ndarray
    iterations: int
    wall_ms: float
    seed: int
    converged: bool = True
    feasible: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum_rate)


class SolverAbort(RuntimeError):
    """Raised when a solver hits a non-finite objective or gradient."""

    def __init__(self, message: str, trace: np.ndarray | None = None):
        super().__init__(message)
        self.trace = trace
