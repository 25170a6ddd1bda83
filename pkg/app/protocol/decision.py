from __future__ import annotations

import numpy as np
from scipy import special

from app.stats.statistic import PeerStatistic


def known_variance_accepts(diff, own_var, var_t, theta: float) -> np.ndarray:
    """
    |diff| < z_{1-theta/2} sqrt(own_var + var_t), strict. Infinite Var(T)
    means nothing was received yet and always accepts.
    """
    diff = np.asarray(diff, dtype=float)
    var_t = np.asarray(var_t, dtype=float)
    z = special.ndtri(1.0 - theta / 2.0)
    with np.errstate(invalid="ignore"):
        threshold = z * np.sqrt(own_var + var_t)
        accept = np.abs(diff) < threshold
    return accept | np.isinf(var_t)


def welch_dof(v_a, t, hat_var, t_kappa) -> np.ndarray:
    a = np.asarray(v_a, dtype=float) / t
    b = np.asarray(hat_var, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (a + b) ** 2 / (a * a / (t - 1) + b * b / (np.asarray(t_kappa, dtype=float) - 1))


def welch_accepts(diff, v_a, t: int, hat_var, t_kappa, theta: float) -> np.ndarray:
    diff = np.asarray(diff, dtype=float)
    hat_var = np.asarray(hat_var, dtype=float)
    t_kappa = np.asarray(t_kappa, dtype=float)
    v_a = np.broadcast_to(np.asarray(v_a, dtype=float), diff.shape)

    # not enough data on either side -> accept by convention
    convention = ~np.isfinite(v_a) | ~np.isfinite(hat_var) | (t <= 1) | (t_kappa <= 1)

    nu = welch_dof(v_a, max(t, 2), hat_var, np.maximum(t_kappa, 2.0))
    nu = np.where(np.isfinite(nu), np.maximum(nu, 1.0), 1.0)
    q = special.stdtrit(nu, 1.0 - theta / 2.0)
    with np.errstate(invalid="ignore"):
        accept = np.abs(diff) < q * np.sqrt(v_a / t + hat_var)
    return convention | accept


def decide_known(xbar_a: float, t: int, sigma_a_sq: float, ps: PeerStatistic, theta_t: float) -> bool:
    return bool(known_variance_accepts(xbar_a - ps.T_value, sigma_a_sq / t, ps.variance(), theta_t))


def decide_unknown(
    xbar_a: float, t: int, V_a: float, ps: PeerStatistic, hat_var_T: float, theta_t: float
) -> bool:
    return bool(welch_accepts(xbar_a - ps.T_value, V_a, t, hat_var_T, ps.last_time, theta_t))
