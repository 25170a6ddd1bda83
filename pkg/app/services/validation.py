from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List

import numpy as np
from scipy import integrate

from app.analytics.run_log import log_event
from app.models.privacy import NoiseKind, PrivacyParams
from app.noise.calibration import sample_noise_array, sigma2_dp_squared, sigma_dp_squared
from app.privacy.mechanisms import MechanismKind, hamming_weight, open_channel
from app.protocol.decision import known_variance_accepts, welch_accepts
from app.stats.variance import (
    brute_force_noise_variance,
    data_variance_factor,
    mom_data_variance,
    mom_pm1_noise_variance,
    noise_variance_term,
    nonmom_variance,
    total_variance,
)
from app.stats.weights import WeightScheme, scheme_weights
from app.varest.bayes import bayesian_improve, posterior_shape
from app.varest.schvar1 import SchVar1State
from app.varest.schvar2 import SchVar2State

# Monte-Carlo checks pass within this many standard errors
Z_TOL = 4.0
SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    expected: float
    tolerance: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (
            f"{tag} {self.name}: measured={self.measured:.10g} "
            f"expected={self.expected:.10g} tol={self.tolerance:.3g}"
        )


def _mc(name: str, samples: np.ndarray, expected: float) -> CheckResult:
    m = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(len(samples)))
    tol = Z_TOL * se
    return CheckResult(name, abs(m - expected) <= tol, m, expected, tol)


def _rel(name: str, measured: float, expected: float, rel: float) -> CheckResult:
    tol = rel * max(abs(expected), 1e-300)
    return CheckResult(name, abs(measured - expected) <= tol, measured, expected, tol)


# -------- Checks --------
def check_calibration() -> List[CheckResult]:
    out = []
    for eps, delta, L in [(1.0, 1e-6, math.sqrt(0.75)), (0.5, 1e-5, 1.0), (0.1, 0.01, 2.0)]:
        p = PrivacyParams(epsilon=eps, delta=delta, half_range=L)
        out.append(_rel(f"sigma_dp eps={eps}", sigma_dp_squared(p), 8 * L * L * math.log(1.25 / delta) / eps ** 2, 1e-12))
        out.append(_rel(f"sigma2_dp eps={eps}", sigma2_dp_squared(p), 32 * L ** 4 * math.log(1.25 / delta) / eps ** 2, 1e-12))
    return out


def check_laplace_variance(n: int) -> List[CheckResult]:
    rng = np.random.default_rng(SEED)
    p = PrivacyParams(epsilon=2.0, half_range=1.0, noise_kind=NoiseKind.laplace)
    v = sigma_dp_squared(p)
    z = sample_noise_array(v, NoiseKind.laplace, rng, n)
    return [_mc("laplace draw variance", z * z, v)]


def check_mechanism_variance(channels: int, sigma_dp_fault: float) -> List[CheckResult]:
    kappas = [1, 2, 3, 5, 8, 13]
    out = []
    for kind in (MechanismKind.pm1, MechanismKind.pm2):
        rng = np.random.default_rng(SEED + (kind == MechanismKind.pm2))
        sigma = 1.0
        samples = {k: np.empty(channels) for k in kappas}
        for c in range(channels):
            ch = open_channel(kind, sigma * sigma_dp_fault)
            for k in range(1, max(kappas) + 1):
                r = ch.release_mean(0.0, 3 * k, rng)
                if k in samples:
                    samples[k][c] = r.noise_sum
        for k in kappas:
            mult = k if kind == MechanismKind.pm1 else hamming_weight(k)
            out.append(_mc(f"{kind.value} noise variance kappa={k}", samples[k] ** 2, mult * sigma))
    return out


def check_closed_forms(cases: int) -> List[CheckResult]:
    rng = np.random.default_rng(SEED)
    worst_nonmom = worst_mom = worst_bits = 0.0
    for _ in range(cases):
        kappa = int(rng.integers(1, 65))
        times = np.cumsum(rng.integers(1, 20, size=kappa))
        scheme = list(WeightScheme)[int(rng.integers(0, 3))]
        w = scheme_weights(scheme, kappa)
        s2, dp = float(rng.uniform(0.1, 2)), float(rng.uniform(0, 5))
        for kind in MechanismKind:
            generic = total_variance(kind, times, scheme_weights(WeightScheme.non_mom, kappa), s2, dp)
            closed = nonmom_variance(kind, kappa, int(times[-1]), s2, dp)
            worst_nonmom = max(worst_nonmom, abs(generic - closed) / closed)
            bits = noise_variance_term(kind, times, w, dp)
            brute = brute_force_noise_variance(kind, times, w, dp)
            if brute > 0:
                worst_bits = max(worst_bits, abs(bits - brute) / brute)
        mw = scheme_weights(WeightScheme.mom, kappa)
        generic = s2 * data_variance_factor(times, mw) + noise_variance_term(MechanismKind.pm1, times, mw, dp)
        closed = mom_data_variance(s2, times) + mom_pm1_noise_variance(dp, times)
        worst_mom = max(worst_mom, abs(generic - closed) / closed)
    return [
        CheckResult("non_mom closed form vs quadrature", worst_nonmom <= 1e-12, worst_nonmom, 0.0, 1e-12),
        CheckResult("mom closed form vs quadrature", worst_mom <= 1e-12, worst_mom, 0.0, 1e-12),
        CheckResult("noise term vs subsum enumeration", worst_bits <= 1e-12, worst_bits, 0.0, 1e-12),
    ]


def check_schvar_unbiased(trials: int) -> List[CheckResult]:
    out = []
    sigma, t = 0.5, 50
    half = sigma * math.sqrt(3)
    for kind in (NoiseKind.gaussian, NoiseKind.laplace):
        rng = np.random.default_rng(SEED)
        p = PrivacyParams(epsilon=1.0, delta=1e-6, half_range=half, noise_kind=kind)
        dp, dp2 = sigma_dp_squared(p), sigma2_dp_squared(p)

        raw1 = np.empty(trials)
        for i in range(trials):
            x = rng.uniform(-half, half, size=t)
            ch = open_channel(MechanismKind.pm1, dp, kind, track_subsums=True)
            st = SchVar1State(dp2, kind)
            r = ch.release_mean(float(x.sum()), t, rng)
            st.update(ch.subsums, t, float(x.sum()), float((x * x).sum()), r.noisy_mean, dp, rng)
            raw1[i] = st.raw
        out.append(_mc(f"schvar1 unbiased ({kind.value})", raw1, sigma ** 2))

        gap, k = 4, 10
        raw2 = np.empty(trials)
        for i in range(trials):
            x = rng.uniform(-half, half, size=gap * (k + 1))
            prefix = np.cumsum(x)
            ch = open_channel(MechanismKind.pm1, dp, kind)
            st2 = SchVar2State(dp)
            for tt in range(gap, gap * (k + 1) + 1, gap):
                st2.update(ch.release_mean(float(prefix[tt - 1]), tt, rng))
            raw2[i] = st2.raw
        out.append(_mc(f"schvar2 unbiased ({kind.value})", raw2, sigma ** 2))
    return out


def posterior_mean_by_quadrature(v_prime: float, kappa: int, K: float, sigma_dp_sq: float, shape: float) -> float:
    """E[u] - K sigma_dp^2 for density ~ u^(-shape-1) exp(-beta/u) on u >= K sigma_dp^2."""
    c = K * sigma_dp_sq
    beta = (kappa - 1) * v_prime / 2.0
    mode = max(beta / (shape + 1.0), c)
    log_peak = -(shape + 1.0) * math.log(mode) - beta / mode

    def dens(u: float) -> float:
        return math.exp(-(shape + 1.0) * math.log(u) - beta / u - log_peak)

    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    num = integrate.quad(lambda u: u * dens(u), c, mode, **opts)[0] + integrate.quad(lambda u: u * dens(u), mode, math.inf, **opts)[0]
    den = integrate.quad(dens, c, mode, **opts)[0] + integrate.quad(dens, mode, math.inf, **opts)[0]
    return num / den - c


def check_bayes(cases: int) -> List[CheckResult]:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(cases):
        kappa = int(rng.integers(3, 40))
        K = float(rng.uniform(0.05, 0.5))
        dp = float(rng.uniform(0.1, 2.0))
        v_prime = float(rng.uniform(0.05, 1.0)) * K * dp
        v_raw = v_prime - K * dp
        got = bayesian_improve(v_raw, v_prime, kappa, K, dp)
        ref = posterior_mean_by_quadrature(v_prime, kappa, K, dp, posterior_shape(kappa))
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-12))
    return [CheckResult("bayesian estimate vs quadrature", worst <= 1e-6, worst, 0.0, 1e-6)]


def check_type_one(trials: int) -> List[CheckResult]:
    rng = np.random.default_rng(SEED)
    n, theta, s2 = 200, 0.05, 1.0
    xa = rng.normal(0.0, 1.0, size=(trials, n))
    xb = rng.normal(0.0, 1.0, size=(trials, n))
    diff = xa.mean(axis=1) - xb.mean(axis=1)
    rej_known = ~known_variance_accepts(diff, s2 / n, np.full(trials, s2 / n), theta)
    va, vb = xa.var(axis=1, ddof=1), xb.var(axis=1, ddof=1)
    rej_welch = ~welch_accepts(diff, va, n, vb / n, np.full(trials, n), theta)
    return [
        CheckResult("type-I known variance", abs(rej_known.mean() - theta) <= 0.01, float(rej_known.mean()), theta, 0.01),
        CheckResult("type-I welch", abs(rej_welch.mean() - theta) <= 0.01, float(rej_welch.mean()), theta, 0.01),
    ]


def run_validation(quick: bool = True, sigma_dp_fault: float = 1.0) -> List[CheckResult]:
    scale = 1 if quick else 10
    suites: Dict[str, Callable[[], List[CheckResult]]] = {
        "calibration": check_calibration,
        "laplace": lambda: check_laplace_variance(100_000 * scale),
        "mechanisms": lambda: check_mechanism_variance(4_000 * scale, sigma_dp_fault),
        "closed_forms": lambda: check_closed_forms(200),
        "schvar": lambda: check_schvar_unbiased(4_000 * scale),
        "bayes": lambda: check_bayes(100),
        "type_one": lambda: check_type_one(10_000),
    }
    results: List[CheckResult] = []
    for suite, fn in suites.items():
        for r in fn():
            results.append(r)
            log_event({"event": "validation_check", "suite": suite, **asdict(r)})
    return results
