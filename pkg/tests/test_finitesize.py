import math

import numpy as np
import pytest

import oracles
from cvqkd.entropy import ProtocolConfig
from cvqkd.errors import ParameterError
from cvqkd.estimation import EstimationResult
from cvqkd.finitesize import (
    FiniteSizeParams,
    aep_penalty,
    asymptotic_components,
    components_from_estimate,
    keyrate_finite,
    pa_penalty,
)


def test_aep_vanishes_for_large_blocks():
    assert aep_penalty(1e14, 5, 0.95, 1e-10) < 1e-5


def test_aep_strictly_decreasing():
    vals = [aep_penalty(n, 5, 0.95, 1e-10) for n in np.geomspace(1e3, 1e15, 25)]
    assert np.all(np.diff(vals) < 0)


def test_aep_matches_oracle():
    _, aep, _ = oracles.finite_rate(0, 0, 2e8, 1e8, 5, 0.95, 1e-10, 1e-10, 1.0)
    assert aep_penalty(1e8, 5, 0.95, 1e-10) == pytest.approx(aep, rel=1e-12)


def test_aep_input_checks():
    with pytest.raises(ParameterError):
        aep_penalty(0.5, 5, 0.95, 1e-10)
    with pytest.raises(ParameterError):
        aep_penalty(1e6, 5, 0.0, 1e-10)
    with pytest.raises(ParameterError):
        aep_penalty(1e6, 5, 0.9, 1.0)


def test_pa_penalty():
    assert pa_penalty(1e6, 1.0) == 0.0
    assert pa_penalty(2e6, 1e-10) == pytest.approx(pa_penalty(1e6, 1e-10) / 2, rel=1e-15)
    assert pa_penalty(1e9, 1e-10) == pytest.approx(2e-9 * math.log2(1e10), rel=1e-14)
    with pytest.raises(ParameterError):
        pa_penalty(1e6, 0.0)


def test_params_validation_and_eps_sum():
    fs = FiniteSizeParams(1e9, 5e8, eps_bar=1e-10, eps_h=2e-10, eps_cor=3e-10, eps_pe=4e-10)
    assert fs.n == 5e8
    assert fs.eps_total == 1e-10 + 2e-10 + 3e-10 + 4e-10
    assert fs.eps_sec == pytest.approx(3e-10)
    with pytest.raises(ParameterError):
        FiniteSizeParams(1e9, 1e9)
    with pytest.raises(ParameterError):
        FiniteSizeParams(1e9, 1e8, eps_h=0.0)


def test_zero_ec_success_gives_zero_rate():
    r = keyrate_finite({"I": 1.0, "chi_worst": 0.5}, FiniteSizeParams(1e9, 1e8, p_ec=0.0), 0.95)
    assert r.k_eps == 0.0 and r.abort


def test_asymptotic_recovery():
    comps = {"I": 1.0, "chi_worst": 0.6}
    fs = FiniteSizeParams(1e12 / (1 - 1e-6), 1e12 * 1e-6 / (1 - 1e-6), p_ec=1.0)
    r = keyrate_finite(comps, fs, 0.95)
    assert r.k_eps == pytest.approx(0.95 - 0.6, rel=0.01)


def test_end_to_end_against_oracle():
    cfg = ProtocolConfig(detection="heterodyne", beta=0.95, v_mod=4.0)
    comps = asymptotic_components(cfg, 0.4, 0.03)
    fs = FiniteSizeParams(1e9, 5e8, d=5, p_ec=0.95)
    r = keyrate_finite(comps, fs, 0.95)
    ref_info, ref_chi = oracles.untrusted_rate(4.0, 0.4, 0.03, "heterodyne", 0.95)[1:]
    k_ref, _, _ = oracles.finite_rate(ref_info, ref_chi, 1e9, 5e8, 5, 0.95, 1e-10, 1e-10, 0.95)
    assert r.k_eps == pytest.approx(k_ref, rel=1e-9)
    assert r.eps_total == pytest.approx(4e-10)


def test_nondecreasing_in_block_size():
    comps = {"I": 0.8, "chi_worst": 0.6}
    ks = [keyrate_finite(comps, FiniteSizeParams(N, N / 2, p_ec=0.95), 0.95).k_eps for N in np.geomspace(1e6, 1e14, 30)]
    assert np.all(np.diff(ks) >= 0)


def test_missing_component():
    with pytest.raises(ParameterError):
        keyrate_finite({"I": 1.0}, FiniteSizeParams(1e9, 1e8), 0.95)


def test_components_from_estimate_are_pessimistic():
    cfg = ProtocolConfig(detection="homodyne", v_mod=4.0)
    T, xi = 0.5, 0.05
    exact = asymptotic_components(cfg, T, xi)
    est = EstimationResult(math.sqrt(T), 1 + T * xi, math.sqrt(T) - 0.01, 1 + T * xi + 0.02, 1e-10, 6.0)
    worst = components_from_estimate(cfg, est)
    assert worst["I"] == pytest.approx(exact["I"], rel=1e-12)
    assert worst["chi_worst"] > exact["chi_worst"]
