from __future__ import annotations

import math

from scipy import special

from app.core.errors import ParameterError

_SERIES_MAX_TERMS = 100_000


def _check_prob(q: float) -> None:
    if not (0.0 < q < 1.0) or math.isnan(q):
        raise ParameterError(f"probability must lie in (0, 1), got {q}")


def std_normal_quantile(q: float) -> float:
    _check_prob(q)
    return float(special.ndtri(q))


def std_normal_cdf(x: float) -> float:
    if math.isnan(x):
        raise ParameterError("std_normal_cdf of NaN")
    return float(special.ndtr(x))


def student_t_quantile(q: float, nu: float) -> float:
    _check_prob(q)
    if not nu > 0 or math.isnan(nu):
        raise ParameterError(f"degrees of freedom must be positive, got {nu}")
    if math.isinf(nu):
        return float(special.ndtri(q))
    return float(special.stdtrit(nu, q))


def _check_gamma_args(s: float, x: float) -> None:
    if not s > 0 or math.isinf(s):
        raise ParameterError(f"gamma shape must be positive and finite, got {s}")
    if not x >= 0:
        raise ParameterError(f"gamma argument must be >= 0, got {x}")


def _log_gamma_series(s: float, x: float) -> float:
    """
    log of gamma(s, x) = x^s e^-x sum_n x^n / (s (s+1) ... (s+n)).
    Only reached when the regularized value underflows, i.e. x << s.
    """
    term = 1.0 / s
    total = term
    n = 1
    while n < _SERIES_MAX_TERMS:
        term *= x / (s + n)
        total += term
        if term < total * 1e-17:
            break
        n += 1
    return s * math.log(x) - x + math.log(total)


def log_lower_incomplete_gamma(s: float, x: float) -> float:
    _check_gamma_args(s, x)
    if x == 0.0:
        return -math.inf
    reg = float(special.gammainc(s, x))
    if reg > 1e-280:
        return math.log(reg) + float(special.gammaln(s))
    return _log_gamma_series(s, x)


def lower_incomplete_gamma(s: float, x: float) -> float:
    """Unnormalized gamma(s, x) = int_0^x t^(s-1) e^-t dt."""
    _check_gamma_args(s, x)
    if x == 0.0:
        return 0.0
    return math.exp(log_lower_incomplete_gamma(s, x))


def gamma_ratio(s: float, x: float) -> float:
    """gamma(s-1, x) / gamma(s, x) for s > 1, x > 0, computed in log space."""
    if not s > 1:
        raise ParameterError(f"gamma_ratio needs s > 1, got {s}")
    if not x > 0:
        raise ParameterError(f"gamma_ratio needs x > 0, got {x}")
    return math.exp(log_lower_incomplete_gamma(s - 1.0, x) - log_lower_incomplete_gamma(s, x))
