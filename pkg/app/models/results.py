from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from app.models.experiment import SimConfig
from app.privacy.budget import ChannelBudget


@dataclass
class SeedRun:
    seed: int
    mse: np.ndarray                 # (t_max,)
    class_accuracy: float
    classes: np.ndarray             # true class per agent
    final_estimates: np.ndarray
    kappas: Dict[Tuple[int, int], int] = field(default_factory=dict)  # (source, target) -> releases


@dataclass
class RunResult:
    config: SimConfig
    seeds: List[int]
    per_seed: np.ndarray            # (n_seeds, t_max)
    mse_mean: np.ndarray
    mse_stderr: np.ndarray
    class_accuracy: float
    class_accuracy_per_seed: List[float]
    budgets: List[ChannelBudget]
    runs: List[SeedRun] = field(default_factory=list, repr=False)

    @property
    def final_mse(self) -> float:
        return float(self.mse_mean[-1]) if self.mse_mean.size else float("nan")
