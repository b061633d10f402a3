"""Key rates for discrete (coherent-state constellation) modulation.

Eve's information is evaluated exactly for pure-loss channels: she holds the
reflected coherent states, so every entropy is that of a finite mixture of
coherent states and is computed with the Gram-matrix method. The outcome
integral over Bob's data is the only discretisation; it uses composite
Gauss-Legendre quadrature with node doubling until two successive results
agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp

from .entropy import discrete_entropy
from .errors import AccuracyError, ParameterError
from .fock import Constellation, gram_matrix, mixture_spectra, purification_cm, spectrum_entropy
from .keyrate_gm import KeyRate, holevo_gm
from .symplectic import CovarianceMatrix

QUAD_TOL = 1e-8
_MAX_DOUBLINGS = 6


@dataclass(frozen=True)
class DmConfig:
    """Discrete-modulation setting.

    Attributes:
        constellation: transmitted coherent states and priors.
        T: channel transmittance.
        detection: ``homodyne`` (q quadrature) or ``heterodyne``.
        reconciliation: ``reverse`` or ``direct``.
        beta: reconciliation efficiency.
        xi: excess noise; must be 0 for the Holevo quantities.
        range_sigmas: half-width of the outcome range in noise standard deviations.
        nodes: Gauss-Legendre nodes per panel at the first level; panels are one
            standard deviation wide.
        tol: convergence tolerance of node doubling.
    """

    constellation: Constellation
    T: float
    detection: str = "homodyne"
    reconciliation: str = "reverse"
    beta: float = 0.95
    xi: float = 0.0
    range_sigmas: float = 8.0
    nodes: int = 8
    tol: float = QUAD_TOL

    def __post_init__(self):
        if not 0.0 <= self.T <= 1.0:
            raise ParameterError(f"T must lie in [0, 1], got {self.T}")
        if self.detection not in ("homodyne", "heterodyne"):
            raise ParameterError(f"unknown detection {self.detection!r}")
        if self.reconciliation not in ("direct", "reverse"):
            raise ParameterError(f"unknown reconciliation {self.reconciliation!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")
        if self.xi < 0.0:
            raise ParameterError(f"xi must be >= 0, got {self.xi}")
        if self.nodes < 2 or self.range_sigmas <= 0:
            raise ParameterError("integration grid must have >= 2 nodes and a positive range")

    @property
    def noise_var(self) -> float:
        """Per-quadrature variance of Bob's outcome around its mean, in the outcome's own scale."""
        if self.detection == "homodyne":
            return 1.0 + self.T * self.xi
        return 0.5 * (1.0 + 0.5 * self.T * self.xi)

    def bob_means(self) -> np.ndarray:
        a = math.sqrt(self.T) * self.constellation.amplitudes
        if self.detection == "homodyne":
            return 2.0 * a.real
        return a


def _require_pure_loss(cfg: DmConfig) -> None:
    if cfg.xi != 0.0:
        raise ParameterError("Eve's information is only available for pure loss (xi = 0)")


def _log_likelihood(y, means, detection: str, noise_var: float) -> np.ndarray:
    """``log p(y | k)`` with shape ``(nodes, K)``."""
    if detection == "homodyne":
        d2 = (np.asarray(y, dtype=float)[:, None] - means[None, :]) ** 2
        return -0.5 * d2 / noise_var - 0.5 * math.log(2.0 * math.pi * noise_var)
    s = 2.0 * noise_var
    d2 = np.abs(np.asarray(y, dtype=complex)[:, None] - means[None, :]) ** 2
    return -d2 / s - math.log(math.pi * s)


def outcome_likelihood(y, alpha_k: complex, T: float, detection: str, xi: float = 0.0):
    """Density of Bob's outcome ``y`` given the state ``|alpha_k>`` was sent.

    Homodyne outcomes are real q-quadrature values with mean
    ``2 sqrt(T) Re alpha_k`` and variance ``1 + T xi``. Heterodyne outcomes are
    complex, in the coherent-state POVM scale, with density
    ``exp(-|y - sqrt(T) alpha_k|^2 / s) / (pi s)`` and ``s = 1 + T xi / 2``.
    """
    if not 0.0 <= T <= 1.0:
        raise ParameterError(f"T must lie in [0, 1], got {T}")
    a = math.sqrt(T) * complex(alpha_k)
    if detection == "homodyne":
        var = 1.0 + T * xi
        y = np.asarray(y, dtype=float)
        return np.exp(-0.5 * (y - 2.0 * a.real) ** 2 / var) / math.sqrt(2.0 * math.pi * var)
    if detection == "heterodyne":
        s = 1.0 + 0.5 * T * xi
        y = np.asarray(y, dtype=complex)
        return np.exp(-np.abs(y - a) ** 2 / s) / (math.pi * s)
    raise ParameterError(f"unknown detection {detection!r}")


def _composite_rule(lo: float, hi: float, panels: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def _grid(cfg: DmConfig, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    sigma = math.sqrt(cfg.noise_var)
    means = cfg.bob_means()
    span = cfg.range_sigmas * sigma
    if cfg.detection == "homodyne":
        lo, hi = means.min() - span, means.max() + span
        return _composite_rule(lo, hi, max(1, math.ceil((hi - lo) / sigma)), nodes)
    lo_r, hi_r = means.real.min() - span, means.real.max() + span
    lo_i, hi_i = means.imag.min() - span, means.imag.max() + span
    xr, wr = _composite_rule(lo_r, hi_r, max(1, math.ceil((hi_r - lo_r) / sigma)), nodes)
    xi_, wi = _composite_rule(lo_i, hi_i, max(1, math.ceil((hi_i - lo_i) / sigma)), nodes)
    pts = (xr[:, None] + 1j * xi_[None, :]).ravel()
    wts = (wr[:, None] * wi[None, :]).ravel()
    return pts, wts


def _posterior_average(cfg: DmConfig, nodes: int, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
    """``int p(y) f(p(.|y)) dy`` on one grid, normalised by the grid's mass of ``p(y)``."""
    pts, wts = _grid(cfg, nodes)
    probs = cfg.constellation.probabilities
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    joint = _log_likelihood(pts, cfg.bob_means(), cfg.detection, cfg.noise_var) + logp[None, :]
    log_py = logsumexp(joint, axis=1)
    post = np.exp(joint - log_py[:, None])
    py_w = np.exp(log_py) * wts
    return float(np.dot(py_w, integrand(post)) / py_w.sum())


def _converged(cfg: DmConfig, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
    nodes = cfg.nodes
    prev = _posterior_average(cfg, nodes, integrand)
    for _ in range(_MAX_DOUBLINGS):
        nodes *= 2
        cur = _posterior_average(cfg, nodes, integrand)
        if abs(cur - prev) < cfg.tol:
            return cur
        prev = cur
    raise AccuracyError(f"outcome integral did not settle within {cfg.tol} after {_MAX_DOUBLINGS} doublings")


def _shannon_rows(post: np.ndarray) -> np.ndarray:
    return spectrum_entropy(post)


def eve_constellation(cfg: DmConfig) -> Constellation:
    return cfg.constellation.scaled(math.sqrt(1.0 - cfg.T))


def eve_entropy(cfg: DmConfig) -> float:
    """``S(rho_E)`` for pure loss."""
    c = eve_constellation(cfg)
    return float(spectrum_entropy(mixture_spectra(gram_matrix(c.amplitudes), c.probabilities)))


def holevo_dm_direct(cfg: DmConfig) -> float:
    """Exact Holevo information of Eve on a pure-loss channel."""
    _require_pure_loss(cfg)
    s_e = eve_entropy(cfg)
    if cfg.reconciliation == "direct":
        # each conditional Eve state is pure
        return s_e
    if cfg.T in (0.0, 1.0):
        # T = 1: Eve holds vacuum. T = 0: Bob's outcomes carry no information.
        return 0.0
    overlaps = gram_matrix(eve_constellation(cfg).amplitudes)

    def cond_entropy(post):
        return spectrum_entropy(mixture_spectra(overlaps, post))

    return max(s_e - _converged(cfg, cond_entropy), 0.0)


def mutual_info_dm(cfg: DmConfig) -> float:
    """``I(X;Y) = H(X) - int p(y) H(X | y) dy``."""
    h_x = discrete_entropy(cfg.constellation.probabilities)
    if cfg.T == 0.0:
        return 0.0
    return min(max(h_x - _converged(cfg, _shannon_rows), 0.0), h_x)


def extremality_cm(cfg: DmConfig, cutoff: Optional[int] = None) -> CovarianceMatrix:
    """Standard-form CM with the purified state's moments ``(V, W, Z)``."""
    _require_pure_loss(cfg)
    m = purification_cm(cfg.constellation, cfg.T, cutoff)
    return CovarianceMatrix.standard_form(m.V, m.W, m.Z)


def holevo_dm_extremality(cfg: DmConfig, cutoff: Optional[int] = None) -> float:
    """Gaussian upper bound on Eve's information from the second moments alone."""
    return max(holevo_gm(extremality_cm(cfg, cutoff), cfg.detection, cfg.reconciliation), 0.0)


def keyrate_dm(cfg: DmConfig, bound: str = "direct", cutoff: Optional[int] = None) -> KeyRate:
    """``beta I - chi`` with ``chi`` from the exact (``direct``) or Gaussian (``extremality``) route."""
    if bound == "direct":
        chi = holevo_dm_direct(cfg)
    elif bound == "extremality":
        chi = holevo_dm_extremality(cfg, cutoff)
    else:
        raise ParameterError(f"bound must be direct or extremality, got {bound!r}")
    info = mutual_info_dm(cfg)
    return KeyRate(cfg.beta * info - chi, info, chi)
