import math

import mpmath as mp
import numpy as np
import pytest
from scipy.stats import binom

from cvqkd.entropy import ProtocolConfig
from cvqkd.errors import DegenerateMeasurementError, EstimationError, ParameterError, PhysicalityError
from cvqkd.estimation import (
    Dataset,
    channel_from_bounds,
    estimate,
    mle_fit,
    qpsk_estimate,
    qpsk_worst_case,
    quantile,
    worst_case_bounds,
    worst_case_cm,
)
from cvqkd.keyrate_gm import ChannelParams, holevo_gm, keyrate_untrusted
from cvqkd.simulator import SimSpec, simulate
from cvqkd.symplectic import CovarianceMatrix, standard_form_eigenvalues, symplectic_eigenvalues


def test_noiseless_fit():
    t, s2 = mle_fit(Dataset([1, -1, 1], [0.5, -0.5, 0.5]))
    assert t == pytest.approx(0.5) and s2 == pytest.approx(0.0)


def test_zero_outputs():
    t, s2 = mle_fit(Dataset([1.0, 2.0, -0.5], [0.0, 0.0, 0.0]))
    assert t == 0.0 and s2 == 0.0


def test_degenerate_design():
    with pytest.raises(DegenerateMeasurementError):
        mle_fit(Dataset([0.0, 0.0], [1.0, 2.0]))


def test_dataset_validation():
    with pytest.raises(ParameterError):
        Dataset([1.0], [1.0])
    with pytest.raises(ParameterError):
        Dataset([1.0, 2.0], [1.0, 2.0, 3.0])


def test_synthetic_fit():
    rng = np.random.default_rng(5)
    m, v_a = 10 ** 6, 4.0
    x = rng.normal(0, math.sqrt(v_a), m)
    y = 0.7 * x + rng.normal(0, math.sqrt(1.1), m)
    t, s2 = mle_fit(Dataset(x, y))
    assert abs(t - 0.7) < 5 * math.sqrt(1.1 / (m * v_a))
    assert s2 == pytest.approx(1.1, rel=5e-3)


def test_csv_round_trip_scalar_and_vector():
    d = Dataset([0.1, -0.2, 0.3], [1.0, 2.5, -3.0])
    back = Dataset.from_csv(d.to_csv())
    assert np.array_equal(back.xs, d.xs) and np.array_equal(back.ys, d.ys)
    q = Dataset([[1, 0], [0, -1]], [[0.5, 0.1], [0.2, -0.4]])
    assert q.to_csv().splitlines()[0] == "x_q,x_p,y_q,y_p"
    back = Dataset.from_csv(q.to_csv())
    assert np.array_equal(back.xs, q.xs) and np.array_equal(back.ys, q.ys)


def test_csv_rejects_bad_input():
    with pytest.raises(ParameterError):
        Dataset.from_csv("a,b\n1,2\n3,4\n")
    with pytest.raises(ParameterError):
        Dataset.from_csv("x,y\n1,oops\n3,4\n")
    with pytest.raises(ParameterError):
        Dataset.from_csv("")


def erfinv_bisection(v):
    with mp.workdps(30):
        return float(mp.findroot(lambda z: mp.erf(z) - v, (mp.mpf(0), mp.mpf(6)), solver="bisect"))


def test_quantile_conventions():
    assert quantile(0.999999) == pytest.approx(erfinv_bisection(1 - 0.999999 / 2), abs=1e-12)
    assert quantile(1 - 1e-15) == pytest.approx(0.476936, abs=1e-6)
    assert quantile(0.05) == pytest.approx(erfinv_bisection(0.975), abs=1e-12)
    assert quantile(0.05, "gaussian") == pytest.approx(1.959964, abs=1e-6)
    with pytest.raises(ParameterError):
        quantile(0.0)
    with pytest.raises(ParameterError):
        quantile(0.1, "student")


def test_worst_case_bounds_limits():
    t_min, s2_max = worst_case_bounds(0.7, 1.1, 10 ** 18, 4.0, 0.05)
    assert t_min == pytest.approx(0.7, abs=1e-8) and s2_max == pytest.approx(1.1, abs=1e-8)
    t_min, s2_max = worst_case_bounds(0.7, 0.0, 100, 4.0, 0.05)
    assert t_min == 0.7 and s2_max == 0.0
    z = quantile(0.05)
    t_min, s2_max = worst_case_bounds(0.7, 1.1, 1000, 4.0, 0.05)
    assert t_min == pytest.approx(0.7 - z * math.sqrt(1.1 / 4000))
    assert s2_max == pytest.approx(1.1 + z * 1.1 * math.sqrt(2 / 1000))
    with pytest.raises(ParameterError):
        worst_case_bounds(0.7, 1.1, 1, 4.0, 0.05)
    with pytest.raises(ParameterError):
        worst_case_bounds(0.7, 1.1, 100, 4.0, 1.5)


def test_bounds_tighten_as_epsilon_grows():
    loose = worst_case_bounds(0.7, 1.1, 1000, 4.0, 0.01)
    tight = worst_case_bounds(0.7, 1.1, 1000, 4.0, 0.5)
    assert tight[0] > loose[0] and tight[1] < loose[1]


def test_worst_case_cm_examples():
    v_a = 4.0
    assert np.allclose(worst_case_cm(1.0, 1.0, v_a).entries, CovarianceMatrix.tmsvs(v_a + 1).entries)
    cm0 = worst_case_cm(0.0, 1.3, v_a).entries
    assert np.allclose(cm0[:2, 2:], 0.0)
    cm = worst_case_cm(0.6, 1.3, v_a)
    a, b, c = v_a + 1, 0.36 * v_a + 1.3, 0.6 * math.sqrt(v_a ** 2 + 2 * v_a)
    assert np.allclose(sorted(symplectic_eigenvalues(cm)), sorted(standard_form_eigenvalues(a, b, c)), atol=1e-10)
    with pytest.raises(PhysicalityError):
        worst_case_cm(1.0, 0.2, v_a)


def test_worst_case_cm_heterodyne_matches_channel_cm():
    from cvqkd.keyrate_gm import channel_cm

    T, xi, v_a = 0.4, 0.05, 4.0
    cm = worst_case_cm(math.sqrt(T), 2 + T * xi, v_a, mu=2)
    assert np.allclose(cm.entries, channel_cm(v_a + 1, T, xi).entries)


def test_qpsk_noiseless():
    xs = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]] * 3, dtype=float)
    for alpha in (0.5, 1.0):
        # the noise floor mu is present in the model, so remove it by choosing mu = 0
        est = qpsk_estimate(Dataset(xs, 2 * alpha * xs), alpha, mu=0.0)
        assert est.T_hat == pytest.approx(1.0) and est.xi_hat == pytest.approx(0.0, abs=1e-12)


def test_qpsk_estimate_scale_invariance():
    xs = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    a = qpsk_estimate(Dataset(xs, 2 * 0.8 * 0.5 * xs), 0.5, mu=0.0)
    b = qpsk_estimate(Dataset(xs, 2 * 0.8 * 1.0 * xs), 1.0, mu=0.0)
    assert a.T_hat == pytest.approx(b.T_hat)


def test_qpsk_monte_carlo():
    d = simulate(SimSpec(10 ** 6, "qpsk", T=0.5, xi=0.1, seed=3, alpha=0.5))
    est = qpsk_estimate(d, 0.5)
    assert abs(est.T_hat - 0.5) < 0.01 and abs(est.xi_hat - 0.1) < 0.02


def test_qpsk_rejects_bad_labels_and_failed_estimates():
    with pytest.raises(ParameterError):
        qpsk_estimate(Dataset([[1, 1], [0, 1]], [[0, 0], [0, 0]]), 0.5)
    with pytest.raises(ParameterError):
        qpsk_estimate(Dataset([1.0, 2.0], [1.0, 2.0]), 0.5)
    xs = np.array([[1, 0], [-1, 0]], dtype=float)
    with pytest.raises(EstimationError):
        qpsk_estimate(Dataset(xs, -xs), 0.5)


def test_qpsk_worst_case_is_pessimistic():
    d = simulate(SimSpec(10 ** 5, "qpsk", T=0.5, xi=0.1, seed=9, alpha=0.5))
    est = qpsk_estimate(d, 0.5)
    T_min, xi_max = qpsk_worst_case(d, 0.5, 1e-3)
    assert T_min < est.T_hat and xi_max > est.xi_hat


def _trials(n_trials, m, T, xi, v_a, seed0):
    for i in range(n_trials):
        yield simulate(SimSpec(m, "gaussian", T=T, xi=xi, seed=seed0 + i, v_mod=v_a))


def test_consistency_over_trials():
    T, v_a, m = 0.5, 4.0, 10 ** 5
    t_hats = np.array([mle_fit(d)[0] for d in _trials(200, m, T, 0.05, v_a, 1000)])
    se = t_hats.std(ddof=1) / math.sqrt(t_hats.size)
    assert abs(t_hats.mean() - math.sqrt(T)) < 3 * se


def test_coverage_and_pessimism():
    T, xi, v_a, m, eps = 0.5, 0.05, 4.0, 10 ** 5, 0.05
    cfg = ProtocolConfig(detection="homodyne", v_mod=v_a)
    k_true = keyrate_untrusted(cfg, ChannelParams(T, xi_ch=xi)).rate
    hits, n = 0, 200
    for d in _trials(n, m, T, xi, v_a, 5000):
        r = estimate(d, v_a, eps)
        covered = math.sqrt(T) >= r.t_min
        hits += covered
        if covered and r.sigma2_max >= 1 + T * xi:
            T_w, xi_w = channel_from_bounds(r)
            k_w = keyrate_untrusted(cfg, ChannelParams(T_w, xi_ch=xi_w))
            chi_w = holevo_gm(worst_case_cm(r.t_min, r.sigma2_max, v_a), "homodyne")
            assert k_w.holevo == pytest.approx(chi_w, abs=1e-10)
            assert k_w.rate <= k_true
    # one-sided binomial test at 1 % significance against a 95 % success rate
    assert binom.cdf(hits, n, 0.95) > 0.01 or hits / n >= 0.95
