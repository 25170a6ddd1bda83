import math

import numpy as np
import pytest

from app.core.errors import ImpossibleStateError, ProtocolError, UnsupportedConfigurationError
from app.models.privacy import NoiseKind, PrivacyParams
from app.noise.calibration import sigma2_dp_squared, sigma_dp_squared
from app.privacy.mechanisms import MechanismKind, Release, Subsum, open_channel
from app.services.validation import posterior_mean_by_quadrature
from app.varest.bayes import PriorKind, bayesian_improve, posterior_shape
from app.varest.own import OwnVarianceAccumulator, own_sample_variance
from app.varest.schvar1 import SchVar1State, schvar1_release
from app.varest.schvar2 import SchVar2State, schvar2_update


def feed_schvar1(values, times, kind, dp, dp2, rng, sigma_arg=None):
    """Release the mean at each time and update Sch-Var-1 alongside; returns (state, releases)."""
    x = np.asarray(values, dtype=float)
    prefix, prefix_sq = np.cumsum(x), np.cumsum(x * x)
    ch = open_channel(kind, dp, track_subsums=True)
    st = SchVar1State(dp2)
    out = []
    for t in times:
        r = ch.release_mean(float(prefix[t - 1]), t, rng)
        schvar1_release(
            st, ch.subsums, t, float(prefix[t - 1]), float(prefix_sq[t - 1]), r.noisy_mean,
            dp if sigma_arg is None else sigma_arg, rng,
        )
        out.append(st.value)
    return st, out


# -------- own variance --------
def test_own_variance_examples():
    assert own_sample_variance(OwnVarianceAccumulator().extend([1.0, 3.0])) == pytest.approx(2.0)
    assert own_sample_variance(OwnVarianceAccumulator().extend([5.0, 5.0, 5.0])) == 0.0


def test_own_variance_undefined_below_two():
    assert OwnVarianceAccumulator().variance() == math.inf
    assert OwnVarianceAccumulator().extend([0.3]).variance() == math.inf


def test_own_variance_vector_slots():
    acc = OwnVarianceAccumulator(size=2)
    for row in ([1.0, 2.0], [3.0, 2.0], [5.0, 2.0]):
        acc.push(np.array(row))
    assert acc.variance().tolist() == pytest.approx([4.0, 0.0])
    assert acc.mean.tolist() == pytest.approx([3.0, 2.0])


def test_own_variance_matches_numpy():
    x = np.random.default_rng(4).uniform(-1, 1, 500)
    assert OwnVarianceAccumulator().extend(x).variance() == pytest.approx(np.var(x, ddof=1), rel=1e-10)


# -------- Sch-Var-1 --------
@pytest.mark.parametrize("kind", list(MechanismKind))
def test_schvar1_without_noise_is_sample_variance(kind, rng):
    x = np.random.default_rng(6).uniform(-0.5, 1.5, 64)
    times = [2, 3, 5, 8, 13, 21, 34, 40, 55, 64]
    _, values = feed_schvar1(x, times, kind, 0.0, 0.0, rng)
    for t, v in zip(times, values):
        assert v == pytest.approx(np.var(x[:t], ddof=1), rel=1e-9, abs=1e-12)


def test_schvar1_mirrors_pm2_merges(rng):
    x = np.random.default_rng(7).uniform(0, 1, 40)
    st, _ = feed_schvar1(x, list(range(5, 41, 5)), MechanismKind.pm2, 1.0, 1.0, rng)
    # eight releases collapse into one subsum covering 1..40
    assert [(e.start, e.end) for e in st.entries] == [(1, 40)]
    assert st.entries[0].s == pytest.approx(x.sum())


def test_schvar1_negative_raw_reports_infinity(rng):
    x = np.full(10, 0.5)
    st, values = feed_schvar1(x, [5, 10], MechanismKind.pm1, 0.0, 0.0, rng, sigma_arg=1e6)
    assert st.raw < 0
    assert values[-1] == math.inf


def test_schvar1_single_point_is_undefined(rng):
    _, values = feed_schvar1([0.2, 0.4], [1], MechanismKind.pm1, 1.0, 1.0, rng)
    assert values == [math.inf]


def test_schvar1_rejects_foreign_subsum(rng):
    st = SchVar1State(1.0)
    with pytest.raises(ProtocolError):
        st.update([Subsum(1, 4, 1, 0.0)], 5, 1.0, 1.0, 0.2, 1.0, rng)


def test_schvar1_rejects_stale_time(rng):
    st = SchVar1State(0.0)
    st.update([Subsum(1, 3, 1, 0.0)], 3, 1.0, 1.0, 1 / 3, 0.0, rng)
    with pytest.raises(ProtocolError):
        st.update([Subsum(1, 3, 1, 0.0)], 3, 1.0, 1.0, 1 / 3, 0.0, rng)


def _params(eps, noise_kind, half):
    return PrivacyParams(epsilon=eps, delta=1e-6, half_range=half, noise_kind=noise_kind)


@pytest.mark.parametrize("kind", list(MechanismKind))
@pytest.mark.parametrize("eps", [0.5, 1.0])
@pytest.mark.parametrize("times", [[50], [10, 20, 30, 40, 50]])
def test_schvar1_unbiased(kind, eps, times):
    trials, sigma = 2000, 0.5
    half = sigma * math.sqrt(3)
    p = _params(eps, NoiseKind.gaussian, half)
    dp, dp2 = sigma_dp_squared(p), sigma2_dp_squared(p)
    rng = np.random.default_rng(31)
    raw = np.empty(trials)
    for i in range(trials):
        st, _ = feed_schvar1(rng.uniform(0.3 - half, 0.3 + half, 50), times, kind, dp, dp2, rng)
        raw[i] = st.raw
    se = raw.std(ddof=1) / math.sqrt(trials)
    assert abs(raw.mean() - sigma ** 2) < 4 * se


# -------- Sch-Var-2 --------
def _run_schvar2(prefix, times, dp, rng, **kw):
    ch = open_channel(MechanismKind.pm1, dp, track_subsums=True)
    st = SchVar2State(dp, **kw)
    for t in times:
        schvar2_update(st, ch.release_mean(float(prefix[t - 1]), t, rng))
    return st, ch


def test_schvar2_without_noise_equal_gaps(rng):
    x = np.random.default_rng(12).uniform(0, 1, 60)
    prefix = np.cumsum(x)
    times = list(range(5, 61, 5))
    st, _ = _run_schvar2(prefix, times, 0.0, rng)
    sums = np.diff(prefix[np.array(times) - 1])
    y = sums / math.sqrt(5)
    assert st.k == len(times) - 1
    assert st.K == pytest.approx(1 / 5)
    assert st.value == pytest.approx(np.var(y, ddof=1), rel=1e-9)


def test_schvar2_single_increment_is_undefined(rng):
    prefix = np.cumsum(np.ones(10))
    st, _ = _run_schvar2(prefix, [3, 6], 1.0, rng)
    assert st.k == 1
    assert st.value == math.inf


def test_schvar2_first_segment_counts_when_asked(rng):
    prefix = np.cumsum(np.ones(10))
    st, _ = _run_schvar2(prefix, [3, 6], 1.0, rng, include_first_segment=True)
    assert st.k == 2
    assert st.gaps == [3, 3]


def test_schvar2_reconstructs_subsum_increments(rng):
    x = np.random.default_rng(13).uniform(-1, 1, 80)
    prefix = np.cumsum(x)
    times = [4, 9, 15, 30, 31, 50, 80]
    st, ch = _run_schvar2(prefix, times, 3.0, rng)
    for i, inc in enumerate(st.increments, start=1):
        sub = ch.subsums[i]
        expected = prefix[sub.end - 1] - prefix[sub.start - 2] + sub.noise
        assert inc == pytest.approx(expected, rel=1e-12, abs=1e-12)
    assert st.gaps == [5, 6, 15, 1, 19, 30]


def test_schvar2_needs_pm1(rng):
    st = SchVar2State(1.0)
    r = Release(noisy_mean=0.1, time=1, kappa=1, noise_variance=1.0, noise_sum=0.0)
    with pytest.raises(UnsupportedConfigurationError):
        st.update(r, MechanismKind.pm2)


def test_schvar2_negative_without_bayes_is_infinite(rng):
    prefix = np.cumsum(np.full(30, 0.5))
    st = SchVar2State(1e6)
    ch = open_channel(MechanismKind.pm1, 0.0)
    for t in (10, 20, 30):
        st.update(ch.release_mean(float(prefix[t - 1]), t, rng))
    assert st.raw < 0 and st.value == math.inf


@pytest.mark.parametrize("gap", [4, 7])
@pytest.mark.parametrize("noise_kind", list(NoiseKind))
def test_schvar2_unbiased(gap, noise_kind):
    trials, sigma, k = 3000, 0.5, 20
    half = sigma * math.sqrt(3)
    dp = sigma_dp_squared(_params(1.0, noise_kind, half))
    rng = np.random.default_rng(41)
    times = list(range(gap, gap * (k + 1) + 1, gap))
    raw = np.empty(trials)
    for i in range(trials):
        prefix = np.cumsum(rng.uniform(-half, half, times[-1]))
        st, _ = _run_schvar2(prefix, times, dp, rng)
        raw[i] = st.raw
    se = raw.std(ddof=1) / math.sqrt(trials)
    assert abs(raw.mean() - sigma ** 2) < 4 * se


def test_schvar2_bayesian_step_is_finite(rng):
    prefix = np.cumsum(np.full(40, 0.5))
    st = SchVar2State(50.0, bayesian=True)
    ch = open_channel(MechanismKind.pm1, 0.0)
    for t in range(4, 41, 4):
        st.update(ch.release_mean(float(prefix[t - 1]), t, rng))
    # noiseless releases against an assumed noisy channel: raw is negative
    assert st.raw < 0
    assert math.isfinite(st.value) and st.value >= 0


# -------- Bayesian improvement --------
def test_bayes_passes_nonnegative_through():
    assert bayesian_improve(0.3, 1.0, 8, 0.25, 0.2) == 0.3
    assert bayesian_improve(0.0, 1.0, 8, 0.25, 0.2) == 0.0


def test_bayes_matches_quadrature_example():
    got = bayesian_improve(-0.01, 0.05, 8, 0.25, 0.2)
    ref = posterior_mean_by_quadrature(0.05, 8, 0.25, 0.2, posterior_shape(8))
    assert got == pytest.approx(ref, rel=1e-6)
    assert got > 0


def test_bayes_large_kappa_limit():
    assert bayesian_improve(-0.01, 1.0, 200, 0.01, 1.0) == pytest.approx(0.985, rel=1e-9)


def test_bayes_zero_v_prime_limit():
    # K sigma^2 / (s - 1) with s = 5 at kappa = 8
    assert bayesian_improve(-0.1, 0.0, 8, 0.25, 0.2) == pytest.approx(0.05 / 4)


def test_bayes_noiseless_negative_is_impossible():
    with pytest.raises(ImpossibleStateError):
        bayesian_improve(-0.1, 0.5, 8, 0.25, 0.0)


def test_bayes_jeffreys_prior():
    assert posterior_shape(8, PriorKind.jeffreys) == 4.5
    got = bayesian_improve(-0.02, 0.08, 8, 0.25, 0.4, PriorKind.jeffreys)
    ref = posterior_mean_by_quadrature(0.08, 8, 0.25, 0.4, 4.5)
    assert got == pytest.approx(ref, rel=1e-6)


def test_bayes_random_cases_match_quadrature():
    rng = np.random.default_rng(17)
    for _ in range(60):
        kappa = int(rng.integers(3, 60))
        K = float(rng.uniform(0.02, 0.5))
        dp = float(rng.uniform(0.05, 5.0))
        v_prime = float(rng.uniform(0.01, 0.99)) * K * dp
        got = bayesian_improve(v_prime - K * dp, v_prime, kappa, K, dp)
        ref = posterior_mean_by_quadrature(v_prime, kappa, K, dp, posterior_shape(kappa))
        assert got == pytest.approx(ref, rel=1e-6)


def test_bayes_stress_grid_stays_finite():
    rng = np.random.default_rng(23)
    for _ in range(3000):
        kappa = int(rng.integers(2, 2000))
        K = float(10 ** rng.uniform(-4, 0))
        dp = float(10 ** rng.uniform(-3, 4))
        v_prime = float(10 ** rng.uniform(-6, 0)) * K * dp
        out = bayesian_improve(-1e-9 - (K * dp - v_prime), v_prime, kappa, K, dp)
        assert math.isfinite(out) and out >= 0
