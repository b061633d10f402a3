"""Finite-size key rate with composable security parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .entropy import ProtocolConfig, gaussian_mutual_info
from .errors import ParameterError
from .estimation import EstimationResult, channel_from_linear, worst_case_cm
from .keyrate_gm import channel_cm, holevo_gm

DEFAULT_DISCRETIZATION_BITS = 5


def _check_prob(name: str, value: float, closed_right: bool = False) -> None:
    ok = 0.0 < value <= 1.0 if closed_right else 0.0 < value < 1.0
    if not ok:
        bound = "(0, 1]" if closed_right else "(0, 1)"
        raise ParameterError(f"{name} must lie in {bound}, got {value}")


@dataclass(frozen=True)
class FiniteSizeParams:
    """Block sizes and failure probabilities.

    Attributes:
        N: total number of exchanged symbols.
        m: symbols disclosed for parameter estimation.
        d: discretisation bits per quadrature.
        p_ec: probability that error correction succeeds; 0 means it never does.
        eps_bar: smoothing parameter.
        eps_h: hashing (privacy amplification) failure probability.
        eps_cor: correctness failure probability.
        eps_pe: parameter-estimation failure probability.
    """

    N: float
    m: float
    d: int = DEFAULT_DISCRETIZATION_BITS
    p_ec: float = 1.0
    eps_bar: float = 1e-10
    eps_h: float = 1e-10
    eps_cor: float = 1e-10
    eps_pe: float = 1e-10

    def __post_init__(self):
        if not 0 < self.m < self.N:
            raise ParameterError(f"need 0 < m < N, got m={self.m}, N={self.N}")
        if self.d < 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if not 0.0 <= self.p_ec <= 1.0:
            raise ParameterError(f"p_ec must lie in [0, 1], got {self.p_ec}")
        for name in ("eps_bar", "eps_h", "eps_cor", "eps_pe"):
            _check_prob(name, getattr(self, name))

    @property
    def n(self) -> float:
        return self.N - self.m

    @property
    def eps_sec(self) -> float:
        return self.eps_h + self.eps_bar

    @property
    def eps_total(self) -> float:
        return self.eps_pe + self.eps_cor + self.eps_h + self.eps_bar


@dataclass(frozen=True)
class FiniteSizeResult:
    k_eps: float
    eps_total: float
    delta: float

    @property
    def abort(self) -> bool:
        return not self.k_eps > 0.0


def aep_penalty(n: float, d: int, p_ec: float, eps_bar: float) -> float:
    """Smooth min-entropy convergence term, in bits per symbol."""
    if not n >= 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    _check_prob("p_ec", p_ec, closed_right=True)
    _check_prob("eps_bar", eps_bar)
    return 4.0 * math.log2(math.sqrt(d) + 2.0) * math.sqrt(math.log2(18.0 / (p_ec ** 2 * eps_bar ** 4)) / n)


def pa_penalty(n: float, eps_h: float) -> float:
    """Privacy-amplification term ``(2/n) log2(1/eps_h)``."""
    if not n >= 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    _check_prob("eps_h", eps_h, closed_right=True)
    return 2.0 / n * math.log2(1.0 / eps_h)


def keyrate_finite(components: dict, fs: FiniteSizeParams, beta: float) -> FiniteSizeResult:
    """``k = (n p_ec / N) (beta I - chi - Delta(n))`` with the total epsilon.

    ``components`` holds ``I`` and ``chi_worst``; the latter should already
    be the pessimistic Holevo information for the reconciliation direction used.
    """
    try:
        info, chi = float(components["I"]), float(components["chi_worst"])
    except KeyError as exc:
        raise ParameterError(f"missing rate component {exc}") from None
    if fs.p_ec == 0.0:
        return FiniteSizeResult(0.0, fs.eps_total, math.inf)
    delta = aep_penalty(fs.n, fs.d, fs.p_ec, fs.eps_bar) + pa_penalty(fs.n, fs.eps_h)
    k = fs.n * fs.p_ec / fs.N * (beta * info - chi - delta)
    return FiniteSizeResult(k, fs.eps_total, delta)


def asymptotic_components(cfg: ProtocolConfig, T: float, xi: float) -> dict:
    """``I`` and ``chi`` of the untrusted GM model at known channel parameters."""
    return {
        "I": gaussian_mutual_info(cfg, T, xi),
        "chi_worst": holevo_gm(channel_cm(cfg.V, T, xi), cfg.detection, cfg.reconciliation),
    }


def components_from_estimate(cfg: ProtocolConfig, est: EstimationResult) -> dict:
    """``I`` from the point estimates and ``chi`` from the worst-case CM."""
    T_hat, xi_hat = channel_from_linear(est.t_hat, est.sigma2_hat, cfg.mu)
    cm = worst_case_cm(est.t_min, est.sigma2_max, cfg.v_mod, cfg.mu)
    return {
        "I": gaussian_mutual_info(cfg, T_hat, max(xi_hat, 0.0)),
        "chi_worst": holevo_gm(cm, cfg.detection, cfg.reconciliation),
    }
