"""Per-iteration convergence bookkeeping shared by IRKA and R-IRKA."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

STATUSES = ("running", "converged", "itmax", "stagnation", "error")


@dataclass
class IterationEntry:
    k: int
    chi: float
    shifts: np.ndarray
    dim_v: int
    dim_w: int
    cum_solves: int
    inner_iters: int
    wall_time: float


@dataclass
class ConvergenceRecord:
    """Iteration history of one reduction run.

    `cum_solves` in each entry is the shifted-solve count since the run
    started, so the last entry is the run's total (``xi_lin``).
    """

    method: str
    r: int
    entries: list = field(default_factory=list)
    status: str = "running"
    message: str = ""
    ell_fin: Optional[int] = None
    initial_shifts: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def append(self, entry):
        self.entries.append(entry)

    @property
    def n_iters(self):
        return len(self.entries)

    @property
    def xi_lin(self):
        return self.entries[-1].cum_solves if self.entries else 0

    @property
    def chis(self):
        return np.array([e.chi for e in self.entries])

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def final_shifts(self):
        return self.entries[-1].shifts if self.entries else None

    def summary(self):
        return {
            "method": self.method,
            "r": self.r,
            "status": self.status,
            "its": self.n_iters,
            "xi_lin": self.xi_lin,
            "ell_fin": self.ell_fin,
            "wall_time": self.entries[-1].wall_time if self.entries else 0.0,
        }
