from __future__ import annotations

from enum import Enum

import numpy as np


class WeightScheme(str, Enum):
    non_mom = "non_mom"  # keep last
    mom = "mom"          # mean of all releases
    wmom = "wmom"        # mean over the dyadic window [2^floor(log2 k), k]

    @property
    def needs_history(self) -> bool:
        return self != WeightScheme.non_mom


def window_start(kappa: int) -> int:
    """1-based index of the first release inside the wMoM window."""
    return 1 << (int(kappa).bit_length() - 1)


def scheme_weights(scheme: WeightScheme, kappa: int) -> np.ndarray:
    if kappa <= 0:
        return np.zeros(0)
    w = np.zeros(kappa)
    if scheme == WeightScheme.non_mom:
        w[-1] = 1.0
    elif scheme == WeightScheme.mom:
        w[:] = 1.0 / kappa
    else:
        start = window_start(kappa)
        w[start - 1:] = 1.0 / (kappa - start + 1)
    return w
