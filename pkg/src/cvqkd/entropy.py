"""Classical and Gaussian entropic quantities, all in bits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, PhysicalityError
from .symplectic import PHYSICALITY_TOL, symplectic_eigenvalues, validate_cm

LN2 = math.log(2.0)
# below this (x - 1) the two-term formula is replaced by its leading expansion
_G_SERIES_CUTOFF = 1e-12


@dataclass(frozen=True)
class ProtocolConfig:
    """Modulation, detection and reconciliation choices of a GM protocol.

    ``v_mod`` is the modulation variance in SNU; the total variance is
    ``V = v_mod + 1``.
    """

    detection: str = "heterodyne"
    reconciliation: str = "reverse"
    beta: float = 0.95
    v_mod: float = 4.0

    def __post_init__(self):
        if self.detection not in ("homodyne", "heterodyne"):
            raise ParameterError(f"detection must be homodyne or heterodyne, got {self.detection!r}")
        if self.reconciliation not in ("direct", "reverse"):
            raise ParameterError(f"reconciliation must be direct or reverse, got {self.reconciliation!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.v_mod >= 0.0:
            raise ParameterError(f"v_mod must be >= 0, got {self.v_mod}")

    @property
    def mu(self) -> int:
        return 1 if self.detection == "homodyne" else 2

    @property
    def V(self) -> float:
        return self.v_mod + 1.0


def g(x: float) -> float:
    """Entropy of a thermal mode with symplectic eigenvalue ``x``."""
    x = float(x)
    if x < 1.0 - PHYSICALITY_TOL:
        raise DomainError(f"g(x) requires x >= 1, got {x}")
    eps = 0.5 * (x - 1.0)
    if x - 1.0 < _G_SERIES_CUTOFF:
        if eps <= 0.0:
            return 0.0
        return eps * (1.0 - math.log(eps)) / LN2
    # (1+e) ln(1+e) - e ln e rearranged into two positive terms
    return (math.log1p(eps) + eps * math.log1p(1.0 / eps)) / LN2


def gaussian_vn_entropy(cm) -> float:
    """Von Neumann entropy of a Gaussian state, ``sum_k g(nu_k)``."""
    report = validate_cm(cm)
    if not report.is_physical:
        raise PhysicalityError(f"unphysical CM, min symplectic eigenvalue {report.min_symplectic_eig}")
    return float(sum(g(nu) for nu in symplectic_eigenvalues(cm)))


def discrete_entropy(p) -> float:
    """Shannon entropy of a probability vector, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0:
        raise DomainError("empty probability vector")
    if np.any(p < 0):
        raise DomainError("probabilities must be non-negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"probabilities sum to {total}, not 1")
    p = p[p > 0] / total
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binary entropy needs p in [0, 1], got {p}")
    return discrete_entropy([p, 1.0 - p])


def bsc_capacity(p: float) -> float:
    return 1.0 - binary_entropy(p)


def bec_capacity(eps: float) -> float:
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"erasure probability must lie in [0, 1], got {eps}")
    return 1.0 - eps


def awgn_capacity(snr: float) -> float:
    if not snr >= 0.0:
        raise DomainError(f"SNR must be >= 0, got {snr}")
    return 0.5 * math.log2(1.0 + snr)


_CAPACITIES = {"bsc": bsc_capacity, "bec": bec_capacity, "awgn": awgn_capacity}


def classical_capacity(kind: str, value: float) -> float:
    """Capacity in bits/use of ``bsc(p)``, ``bec(eps)`` or ``awgn(snr)``."""
    try:
        fn = _CAPACITIES[kind]
    except KeyError:
        raise DomainError(f"unknown channel {kind!r}") from None
    return fn(value)


def gaussian_mutual_info(cfg: ProtocolConfig, T: float, xi: float) -> float:
    """Alice-Bob mutual information of a GM protocol over a thermal-loss channel."""
    if not 0.0 <= T <= 1.0:
        raise ParameterError(f"transmittance must lie in [0, 1], got {T}")
    if not xi >= 0.0:
        raise ParameterError(f"excess noise must be >= 0, got {xi}")
    mu = cfg.mu
    return 0.5 * mu * math.log2(1.0 + T * cfg.v_mod / (mu + T * xi))
