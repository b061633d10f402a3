"""Asymptotic key rates for Gaussian-modulated coherent-state protocols.

Three models are provided: the untrusted model (all noise attributed to the
eavesdropper), the trusted model (detector efficiency and electronic noise
calibrated and attributed to the receiver), and the large-variance closed form
of the symmetric measurement-device-independent setup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .entropy import ProtocolConfig, g, gaussian_mutual_info, gaussian_vn_entropy
from .errors import DomainError, ParameterError, PhysicalityError
from .symplectic import (
    PHYSICALITY_TOL,
    SIGMA_Z,
    CovarianceMatrix,
    conditional_cm,
    standard_form_eigenvalues,
    two_mode_eigenvalues,
)

DEFAULT_LOSS_DB_PER_KM = 0.2


def transmittance_from_distance(distance_km: float, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> float:
    if distance_km < 0 or loss_db_per_km < 0:
        raise ParameterError("distance and loss coefficient must be non-negative")
    return 10.0 ** (-loss_db_per_km * distance_km / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Link description.

    Attributes:
        t_ch: channel transmittance.
        xi_ch: channel excess noise, referred to the channel input (SNU).
        eta: detector efficiency.
        xi_el: electronic noise of the detector (SNU).
        trusted: whether detector imperfections are calibrated and trusted.
        distance_km: fibre length, when ``t_ch`` was derived from it.
        loss_db_per_km: fibre attenuation used with ``distance_km``.
    """

    t_ch: float
    xi_ch: float = 0.0
    eta: float = 1.0
    xi_el: float = 0.0
    trusted: bool = False
    distance_km: Optional[float] = None
    loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM

    def __post_init__(self):
        if not 0.0 <= self.t_ch <= 1.0:
            raise ParameterError(f"t_ch must lie in [0, 1], got {self.t_ch}")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if self.xi_ch < 0 or self.xi_el < 0:
            raise ParameterError("noise parameters must be non-negative")

    @classmethod
    def from_distance(cls, distance_km: float, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM, **kw) -> "ChannelParams":
        t = transmittance_from_distance(distance_km, loss_db_per_km)
        return cls(t_ch=t, distance_km=distance_km, loss_db_per_km=loss_db_per_km, **kw)

    @property
    def T(self) -> float:
        """Lumped transmittance ``eta * t_ch`` seen in the untrusted model."""
        return self.eta * self.t_ch

    @property
    def xi(self) -> float:
        """Lumped excess noise ``xi_ch + xi_el`` seen in the untrusted model."""
        return self.xi_ch + self.xi_el

    @property
    def chi_line(self) -> float:
        if self.t_ch <= 0.0:
            return math.inf
        return 1.0 / self.t_ch - 1.0 + self.xi_ch


@dataclass(frozen=True)
class KeyRate:
    """Devetak-Winter rate with its two ingredients. Negative rates are kept."""

    rate: float
    mutual_info: float
    holevo: float

    @property
    def abort(self) -> bool:
        return not self.rate > 0.0


def channel_cm(v: float, T: float, xi: float) -> CovarianceMatrix:
    """Alice-Bob CM of the entanglement-based picture after a thermal-loss channel."""
    if v < 1.0:
        raise ParameterError(f"total variance must be >= 1, got {v}")
    if not 0.0 <= T <= 1.0:
        raise ParameterError(f"transmittance must lie in [0, 1], got {T}")
    if xi < 0.0:
        raise ParameterError(f"excess noise must be >= 0, got {xi}")
    b = T * (v - 1.0) + 1.0 + T * xi
    c = math.sqrt(T * (v * v - 1.0))
    eye = np.eye(2)
    return CovarianceMatrix(np.block([[v * eye, c * SIGMA_Z], [c * SIGMA_Z, b * eye]]))


def _standard_form_abc(cm) -> tuple[float, float, float]:
    mat = cm.entries if isinstance(cm, CovarianceMatrix) else np.asarray(cm, dtype=float)
    if mat.shape != (4, 4):
        raise ParameterError("a two-mode CM is required")
    a, b, c = mat[0, 0], mat[2, 2], mat[0, 2]
    scale = max(1.0, abs(a), abs(b))
    ok = (
        abs(mat[1, 1] - a) <= 1e-12 * scale
        and abs(mat[3, 3] - b) <= 1e-12 * scale
        and abs(mat[1, 3] + c) <= 1e-12 * scale
        and np.all(np.abs(mat[[0, 0, 1, 1, 2, 3], [1, 3, 0, 2, 3, 2]]) <= 1e-12 * scale)
    )
    if not ok:
        raise ParameterError("CM is not in symmetric standard form; use holevo_general")
    return float(a), float(b), float(c)


def conditional_eigenvalue(a: float, b: float, c: float, detection: str) -> float:
    """Symplectic eigenvalue of mode A after measuring mode B of a standard-form CM."""
    if detection == "homodyne":
        rest = a - c * c / b
        if rest < 1.0 / a - PHYSICALITY_TOL:
            raise PhysicalityError(f"conditional variance {rest} is unphysical")
        return math.sqrt(max(a * rest, 1.0))
    if detection == "heterodyne":
        return max(a - c * c / (b + 1.0), 1.0)
    raise ParameterError(f"unknown detection {detection!r}")


def holevo_gm(cm, detection: str, reconciliation: str = "reverse") -> float:
    """Eve's Holevo information for a standard-form Alice-Bob CM.

    Reverse reconciliation conditions on Bob's ``detection``; direct
    reconciliation conditions on Alice's heterodyne, which is how Gaussian
    modulation looks in the entanglement-based picture.
    """
    a, b, c = _standard_form_abc(cm)
    nu1, nu2 = standard_form_eigenvalues(a, b, c)
    if min(nu1, nu2) < 1.0 - PHYSICALITY_TOL:
        raise PhysicalityError(f"symplectic eigenvalues {nu1}, {nu2} below 1")
    if reconciliation == "reverse":
        nu3 = conditional_eigenvalue(a, b, c, detection)
    elif reconciliation == "direct":
        nu3 = conditional_eigenvalue(b, a, c, "heterodyne")
    else:
        raise ParameterError(f"unknown reconciliation {reconciliation!r}")
    return g(max(nu1, 1.0)) + g(max(nu2, 1.0)) - g(nu3)


def holevo_general(cm, detection: str, measured: Optional[int] = None) -> float:
    """``S(cm) - S(cm | measurement)`` for any CM whose purification Eve holds."""
    cond = conditional_cm(cm, detection, measured)
    return gaussian_vn_entropy(cm) - gaussian_vn_entropy(cond)


def keyrate_untrusted(cfg: ProtocolConfig, ch: ChannelParams) -> KeyRate:
    """Devetak-Winter rate with detector loss and noise lumped into the channel."""
    T, xi = ch.T, ch.xi
    info = gaussian_mutual_info(cfg, T, xi)
    chi = holevo_gm(channel_cm(cfg.V, T, xi), cfg.detection, cfg.reconciliation)
    return KeyRate(cfg.beta * info - chi, info, chi)


def detector_noise(detection: str, eta: float, xi_el: float) -> float:
    """Receiver noise referred to the receiver input."""
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must lie in (0, 1] in the trusted model, got {eta}")
    if detection == "homodyne":
        return (1.0 - eta + xi_el) / eta
    if detection == "heterodyne":
        return (2.0 - eta + 2.0 * xi_el) / eta
    raise ParameterError(f"unknown detection {detection!r}")


def trusted_eigenvalues(cfg: ProtocolConfig, ch: ChannelParams) -> tuple[float, float, float, float]:
    """``(nu1, nu2, nu3, nu4)`` of the trusted-noise model; ``nu5`` is always 1."""
    T = ch.t_ch
    if T <= 0.0:
        raise ParameterError("t_ch must be positive in the trusted model")
    V = cfg.V
    chi_line = ch.chi_line
    chi_det = detector_noise(cfg.detection, ch.eta, ch.xi_el)
    chi = chi_line + chi_det / T
    a, b, c2 = V, T * (V + chi_line), T * (V * V - 1.0)
    delta = a * a + b * b - 2.0 * c2
    sq_gamma = T * (V * chi_line + 1.0)
    nu1, nu2 = two_mode_eigenvalues(delta, sq_gamma * sq_gamma)
    if cfg.detection == "homodyne":
        denom = T * (V + chi)
        C = (chi_det * delta + T * (V + chi_line) + V * sq_gamma) / denom
        D = sq_gamma * (sq_gamma * chi_det + V) / denom
    else:
        denom = T * T * (V + chi) ** 2
        C = (2.0 * chi_det * (V * sq_gamma + T * (V + chi_line)) + delta * chi_det ** 2
             + sq_gamma ** 2 + 1.0 + 2.0 * T * (V * V - 1.0)) / denom
        D = ((V + sq_gamma * chi_det) / (T * (V + chi))) ** 2
    nu3, nu4 = two_mode_eigenvalues(C, D)
    nus = (nu1, nu2, nu3, nu4)
    if min(nus) < 1.0 - 1e-7:
        raise PhysicalityError(f"trusted-model eigenvalues {nus} fall below 1")
    return tuple(max(n, 1.0) for n in nus)


def trusted_mutual_info(cfg: ProtocolConfig, ch: ChannelParams) -> float:
    """Alice-Bob information from the detector-inclusive variances.

    Bob's measured variance is ``eta T (V + chi)`` and, given Alice's
    data, ``eta T (1 + chi)``.
    """
    T = ch.t_ch
    if T <= 0.0:
        return 0.0
    chi = ch.chi_line + detector_noise(cfg.detection, ch.eta, ch.xi_el) / T
    return 0.5 * cfg.mu * math.log2((cfg.V + chi) / (1.0 + chi))


def keyrate_trusted(cfg: ProtocolConfig, ch: ChannelParams) -> KeyRate:
    """Reverse-reconciliation rate with calibrated detector loss and noise."""
    if cfg.reconciliation != "reverse":
        raise ParameterError("the trusted-noise model is implemented for reverse reconciliation only")
    nu1, nu2, nu3, nu4 = trusted_eigenvalues(cfg, ch)
    chi = g(nu1) + g(nu2) - g(nu3) - g(nu4)
    info = trusted_mutual_info(cfg, ch)
    return KeyRate(cfg.beta * info - chi, info, chi)


def trusted_joint_cm(cfg: ProtocolConfig, ch: ChannelParams) -> CovarianceMatrix:
    """Four-mode CM ``(A, F, G, B)`` with the detector modelled as a beam splitter.

    The detector's inefficiency mixes Bob's mode with one arm ``F0`` of an
    auxiliary two-mode squeezed state ``(F0, G)`` whose variance reproduces the
    electronic noise. ``B`` is the mode that reaches the detector.
    """
    eta = ch.eta
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    if eta == 1.0:
        if ch.xi_el > 0.0:
            raise ParameterError("electronic noise cannot be dilated with eta = 1")
        w = 1.0
    else:
        k = 1.0 if cfg.detection == "homodyne" else 2.0
        w = 1.0 + k * ch.xi_el / (1.0 - eta)
    ab = channel_cm(cfg.V, ch.t_ch, ch.xi_ch).entries
    fg = CovarianceMatrix.tmsvs(w).entries
    full = np.zeros((8, 8))
    full[:4, :4] = ab
    full[4:, 4:] = fg  # order A, B', F0, G
    eye = np.eye(2)
    se, sr = math.sqrt(eta), math.sqrt(1.0 - eta)
    bs = np.eye(8)
    bs[2:6, 2:6] = np.block([[se * eye, sr * eye], [-sr * eye, se * eye]])
    full = bs @ full @ bs.T
    order = [0, 1, 4, 5, 6, 7, 2, 3]
    return CovarianceMatrix(full[np.ix_(order, order)])


def trusted_holevo_numeric(cfg: ProtocolConfig, ch: ChannelParams) -> float:
    """Trusted-model Holevo information from explicit CM conditioning."""
    joint = trusted_joint_cm(cfg, ch)
    cond = conditional_cm(joint, cfg.detection)
    ab = channel_cm(cfg.V, ch.t_ch, ch.xi_ch)
    return gaussian_vn_entropy(ab) - gaussian_vn_entropy(cond)


def keyrate(cfg: ProtocolConfig, ch: ChannelParams) -> KeyRate:
    """Dispatch on ``ch.trusted``."""
    return keyrate_trusted(cfg, ch) if ch.trusted else keyrate_untrusted(cfg, ch)


def keyrate_vs_distance(cfg: ProtocolConfig, distances, template: ChannelParams) -> np.ndarray:
    """Rates along a distance grid; ``template`` supplies everything but ``t_ch``."""
    out = np.empty(len(distances))
    for i, d in enumerate(distances):
        t = transmittance_from_distance(float(d), template.loss_db_per_km)
        out[i] = keyrate(cfg, replace(template, t_ch=t, distance_km=float(d))).rate
    return out


def zero_crossing(f: Callable[[float], float], lo: float, hi: float, points: int = 400) -> float:
    """First root of ``f`` on ``[lo, hi]`` after a sign change on a grid; ``inf`` if none."""
    grid = np.linspace(lo, hi, points)
    prev = f(grid[0])
    if prev <= 0.0:
        return float(grid[0])
    for x0, x1 in zip(grid[:-1], grid[1:]):
        cur = f(x1)
        if cur <= 0.0:
            return float(brentq(f, x0, x1, xtol=1e-10))
        prev = cur
    return math.inf


def max_distance(cfg: ProtocolConfig, template: ChannelParams, d_max: float = 500.0) -> float:
    """Distance at which the rate first reaches zero, searched up to ``d_max`` km."""

    def rate_at(d):
        t = transmittance_from_distance(d, template.loss_db_per_km)
        return keyrate(cfg, replace(template, t_ch=t, distance_km=d)).rate

    return zero_crossing(rate_at, 0.0, d_max)


def keyrate_mdi_symmetric(xi_equiv: float) -> float:
    """Large-variance rate of symmetric MDI operation for equivalent noise ``xi_equiv``.

    The closed form is only defined for ``xi_equiv > 4``: below that the
    logarithm's argument is negative and ``g`` leaves its domain.
    """
    xi = float(xi_equiv)
    if not xi > 4.0:
        raise DomainError(
            f"symmetric MDI rate needs xi > 4, got {xi}; the factor xi*(xi - 4) changes sign "
            "below 4 and the intended sign is ambiguous"
        )
    return math.log2(16.0 / (math.e ** 2 * xi * (xi - 4.0))) + g(xi / 2.0 - 1.0)
