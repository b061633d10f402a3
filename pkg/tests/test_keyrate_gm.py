import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cvqkd.entropy import ProtocolConfig, g, gaussian_mutual_info, gaussian_vn_entropy
from cvqkd.errors import DomainError, ParameterError, PhysicalityError
from cvqkd.keyrate_gm import (
    ChannelParams,
    channel_cm,
    holevo_general,
    holevo_gm,
    keyrate,
    keyrate_mdi_symmetric,
    keyrate_trusted,
    keyrate_untrusted,
    keyrate_vs_distance,
    max_distance,
    transmittance_from_distance,
    trusted_eigenvalues,
    trusted_holevo_numeric,
    trusted_joint_cm,
)
from cvqkd.symplectic import CovarianceMatrix, standard_form_eigenvalues, symplectic_eigenvalues

DETECTIONS = ("homodyne", "heterodyne")


def test_channel_cm_examples():
    assert np.allclose(channel_cm(5.0, 1.0, 0.0).entries, CovarianceMatrix.tmsvs(5.0).entries)
    cm0 = channel_cm(5.0, 0.0, 0.3).entries
    assert np.allclose(cm0[2:, 2:], np.eye(2)) and np.allclose(cm0[:2, 2:], 0.0)
    cm = channel_cm(5.0, 0.5, 0.05).entries
    assert cm[2, 2] == pytest.approx(3.025)
    assert cm[0, 2] == pytest.approx(math.sqrt(12.0))
    assert cm[1, 3] == pytest.approx(-math.sqrt(12.0))


def test_channel_cm_matches_beam_splitter_propagation():
    # EB state through an entangling-cloner beam splitter with thermal input
    from cvqkd.symplectic import apply_symplectic, embed, gaussian_unitary

    V, T, xi = 5.0, 0.5, 0.05
    w = 1 + T * xi / (1 - T)
    cm = CovarianceMatrix.tmsvs(V).direct_sum(CovarianceMatrix(w * np.eye(2)))
    out, _ = apply_symplectic(cm, embed(gaussian_unitary("beamsplitter", T=T), [1, 2], 3))
    assert np.allclose(out.submatrix([0, 1]).entries, channel_cm(V, T, xi).entries)


def test_holevo_perfect_channel_is_zero():
    for det in DETECTIONS:
        assert holevo_gm(channel_cm(5.0, 1.0, 0.0), det) == pytest.approx(0.0, abs=1e-12)


def test_holevo_uncorrelated_blocks():
    cm = CovarianceMatrix.standard_form(3.0, 2.0, 0.0)
    assert holevo_gm(cm, "homodyne") == pytest.approx(g(2.0))
    assert holevo_gm(cm, "heterodyne") == pytest.approx(g(2.0))


@pytest.mark.parametrize("det", DETECTIONS)
def test_holevo_matches_conditioning_route(det):
    cm = channel_cm(21.0, 0.2, 0.05)
    assert holevo_gm(cm, det) == pytest.approx(holevo_general(cm, det), abs=1e-9)


def test_direct_reconciliation_matches_conditioning_on_alice():
    cm = channel_cm(21.0, 0.2, 0.05)
    assert holevo_gm(cm, "homodyne", "direct") == pytest.approx(holevo_general(cm, "heterodyne", measured=0), abs=1e-9)


def test_holevo_requires_standard_form():
    with pytest.raises(ParameterError):
        holevo_gm(np.diag([2.0, 3.0, 2.0, 2.0]), "homodyne")


@settings(max_examples=60)
@given(st.floats(1.0, 50.0), st.floats(0.0, 1.0), st.floats(0.0, 0.5))
def test_holevo_non_negative(V, T, xi):
    for det in DETECTIONS:
        assert holevo_gm(channel_cm(V, T, xi), det) >= -1e-12


@settings(max_examples=40)
@given(st.floats(1.5, 40.0), st.floats(0.01, 1.0), st.floats(0.0, 0.3))
def test_purification_identity(V, T, xi):
    cm = channel_cm(V, T, xi)
    a, b, c = cm.entries[0, 0], cm.entries[2, 2], cm.entries[0, 2]
    n1, n2 = standard_form_eigenvalues(a, b, c)
    assert gaussian_vn_entropy(cm) == pytest.approx(g(n1) + g(n2), abs=1e-10)


def test_untrusted_examples():
    cfg = ProtocolConfig(detection="homodyne", beta=1.0, v_mod=4.0)
    k = keyrate_untrusted(cfg, ChannelParams(1.0))
    assert k.rate == pytest.approx(gaussian_mutual_info(cfg, 1.0, 0.0), abs=1e-12)
    k0 = keyrate_untrusted(cfg, ChannelParams(0.0, xi_ch=0.05))
    assert k0.mutual_info == 0.0 and k0.rate <= 0.0 and k0.abort


@pytest.mark.parametrize("det", DETECTIONS)
def test_untrusted_matches_oracle(det):
    cfg = ProtocolConfig(detection=det, beta=0.95, v_mod=4.0)
    ch = ChannelParams.from_distance(10.0, xi_ch=0.02, xi_el=0.03, eta=0.6)
    k = keyrate_untrusted(cfg, ch)
    ref = oracles.untrusted_rate(4.0, ch.T, 0.05, det, 0.95)
    assert k.rate > 0
    assert k.rate == pytest.approx(ref[0], rel=1e-9)


def test_lumped_channel_parameters():
    ch = ChannelParams(0.5, xi_ch=0.02, eta=0.6, xi_el=0.03)
    assert ch.T == pytest.approx(0.3)
    assert ch.xi == pytest.approx(0.05)
    assert ch.chi_line == pytest.approx(1.02)
    assert ChannelParams.from_distance(50.0).t_ch == pytest.approx(0.1)


def test_channel_params_validation():
    with pytest.raises(ParameterError):
        ChannelParams(1.2)
    with pytest.raises(ParameterError):
        ChannelParams(0.5, xi_ch=-0.1)


@pytest.mark.parametrize("det", DETECTIONS)
def test_untrusted_monotone_in_noise_and_distance(det):
    cfg = ProtocolConfig(detection=det)
    rates = [keyrate_untrusted(cfg, ChannelParams(0.4, xi_ch=x)).rate for x in np.linspace(0, 0.2, 21)]
    assert np.all(np.diff(rates) <= 1e-12)
    d_rates = keyrate_vs_distance(cfg, np.linspace(0, 100, 51), ChannelParams(1.0, xi_ch=0.02, eta=0.6, xi_el=0.03))
    assert np.all(np.diff(d_rates) <= 1e-12)


@pytest.mark.parametrize("det", DETECTIONS)
def test_trusted_reduces_to_untrusted(det):
    cfg = ProtocolConfig(detection=det, beta=0.95, v_mod=4.0)
    for T in np.linspace(0.05, 1.0, 10):
        for xi in np.linspace(0.0, 0.1, 5):
            kt = keyrate_trusted(cfg, ChannelParams(T, xi_ch=xi, eta=1.0, xi_el=0.0, trusted=True))
            ku = keyrate_untrusted(cfg, ChannelParams(T, xi_ch=xi))
            assert kt.rate == pytest.approx(ku.rate, abs=1e-8)
            assert kt.mutual_info == pytest.approx(ku.mutual_info, abs=1e-12)


@pytest.mark.parametrize("det", DETECTIONS)
@pytest.mark.parametrize("T, xi_ch, eta, xi_el", [(0.5, 0.02, 0.6, 0.03), (0.2, 0.05, 0.8, 0.1), (0.9, 0.0, 0.5, 0.0)])
def test_trusted_closed_form_matches_explicit_detector_model(det, T, xi_ch, eta, xi_el):
    cfg = ProtocolConfig(detection=det, v_mod=4.0)
    ch = ChannelParams(T, xi_ch=xi_ch, eta=eta, xi_el=xi_el, trusted=True)
    assert keyrate_trusted(cfg, ch).holevo == pytest.approx(trusted_holevo_numeric(cfg, ch), abs=1e-10)
    # nu5 of the explicit model is the pure leftover mode
    joint = trusted_joint_cm(cfg, ch)
    from cvqkd.symplectic import conditional_cm

    nus = symplectic_eigenvalues(conditional_cm(joint, det))
    assert nus.min() == pytest.approx(1.0, abs=1e-8)
    assert sorted(nus)[1:] == pytest.approx(sorted(trusted_eigenvalues(cfg, ch)[2:]), abs=1e-8)


@pytest.mark.parametrize("det", DETECTIONS)
def test_trusted_matches_oracle(det):
    cfg = ProtocolConfig(detection=det, v_mod=4.0)
    ch = ChannelParams.from_distance(30.0, xi_ch=0.02, eta=0.6, xi_el=0.03, trusted=True)
    assert keyrate_trusted(cfg, ch).rate == pytest.approx(
        oracles.trusted_rate(4.0, ch.t_ch, 0.02, 0.6, 0.03, det, 0.95)[0], rel=1e-9)


def test_trusted_parameter_errors():
    cfg = ProtocolConfig()
    with pytest.raises(ParameterError):
        keyrate_trusted(cfg, ChannelParams(0.5, eta=0.0, trusted=True))
    with pytest.raises(ParameterError):
        keyrate_trusted(ProtocolConfig(reconciliation="direct"), ChannelParams(0.5, trusted=True))
    with pytest.raises(ParameterError):
        trusted_joint_cm(cfg, ChannelParams(0.5, eta=1.0, xi_el=0.1, trusted=True))


def test_dispatch_and_crossings():
    cfg = ProtocolConfig()
    ut = ChannelParams(1.0, xi_ch=0.02, eta=0.6, xi_el=0.03)
    tr = ChannelParams(1.0, xi_ch=0.02, eta=0.6, xi_el=0.03, trusted=True)
    assert keyrate(cfg, tr).rate == keyrate_trusted(cfg, tr).rate
    d_u = max_distance(cfg, ut)
    assert 100 < d_u < 200
    assert keyrate_vs_distance(cfg, [d_u], ut)[0] == pytest.approx(0.0, abs=1e-9)
    assert max_distance(cfg, tr) > d_u


def test_mdi_examples():
    expected = math.log2(16 / (12 * math.e ** 2)) + g(2.0)
    assert keyrate_mdi_symmetric(6.0) == pytest.approx(expected, rel=1e-14)
    assert keyrate_mdi_symmetric(6.0) == pytest.approx(-2.47035 + 1.377444, abs=1e-5)
    xs = np.geomspace(5, 1e4, 40)
    ks = [keyrate_mdi_symmetric(x) for x in xs]
    assert np.all(np.diff(ks) < 0)
    for bad in (2.0, 4.0, -1.0):
        with pytest.raises(DomainError):
            keyrate_mdi_symmetric(bad)


def test_distance_conversion():
    assert transmittance_from_distance(0.0) == 1.0
    assert transmittance_from_distance(100.0, 0.2) == pytest.approx(0.01)
    with pytest.raises(ParameterError):
        transmittance_from_distance(-1.0)


def test_unphysical_standard_form_flagged():
    with pytest.raises(PhysicalityError):
        holevo_gm(CovarianceMatrix.standard_form(2.0, 2.0, 1.9), "homodyne")
