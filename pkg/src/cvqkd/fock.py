"""Truncated Fock-space numerics for coherent-state constellations.

Mixtures of finitely many coherent states are handled two ways: exactly,
through the weighted Gram matrix of the states (``gram_spectrum``), and in a
truncated Fock basis (``constellation_state``, ``purification_cm``). The key
rate code uses the Gram route; the Fock route supplies second moments and
serves as an independent cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .entropy import discrete_entropy
from .errors import ParameterError, TruncationError

STATE_TAIL_TOL = 1e-12
MIXTURE_TAIL_TOL = 1e-9
MOMENT_STABILITY_TOL = 1e-8


@dataclass(frozen=True)
class Constellation:
    """Finite set of coherent amplitudes with prior probabilities."""

    amplitudes: np.ndarray
    probabilities: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        probs = np.array(self.probabilities, dtype=float).ravel()
        if amps.size < 2:
            raise ParameterError("a constellation needs at least 2 points")
        if probs.shape != amps.shape:
            raise ParameterError("one probability per amplitude is required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ParameterError(f"probabilities must be >= 0 and sum to 1 (sum = {probs.sum()!r})")
        labels = tuple(str(x) for x in self.labels) if self.labels else tuple(str(i) for i in range(amps.size))
        if len(labels) != amps.size:
            raise ParameterError("one label per amplitude is required")
        amps.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.amplitudes.size

    @property
    def mean_photon_number(self) -> float:
        return float(np.sum(self.probabilities * np.abs(self.amplitudes) ** 2))

    def scaled(self, factor: float) -> "Constellation":
        return Constellation(self.amplitudes * factor, self.probabilities, self.labels)

    def with_probabilities(self, probs) -> "Constellation":
        return Constellation(self.amplitudes, probs, self.labels)

    @classmethod
    def psk(cls, n: int, alpha: float, phase: float = 0.0) -> "Constellation":
        """``n`` equiprobable states ``alpha * exp(i (phase + 2 pi k / n))``."""
        k = np.arange(n)
        return cls(alpha * np.exp(1j * (phase + 2.0 * np.pi * k / n)), np.full(n, 1.0 / n))

    @classmethod
    def bpsk(cls, alpha: float) -> "Constellation":
        return cls([alpha, -alpha], [0.5, 0.5], ("+1", "-1"))

    @classmethod
    def qpsk(cls, alpha: float, diagonal: bool = False) -> "Constellation":
        """Axis-aligned ``{a, ia, -a, -ia}``, or the diagonal phases ``pi/4 + k pi/2``."""
        if diagonal:
            c = cls.psk(4, alpha, np.pi / 4)
            return Constellation(c.amplitudes, c.probabilities, ("d0", "d1", "d2", "d3"))
        return cls([alpha, 1j * alpha, -alpha, -1j * alpha], np.full(4, 0.25), ("+q", "+p", "-q", "-p"))

    def to_json(self) -> str:
        return json.dumps([
            {"re": float(a.real), "im": float(a.imag), "p": float(p), "label": lab}
            for a, p, lab in zip(self.amplitudes, self.probabilities, self.labels)
        ])

    @classmethod
    def from_json(cls, text: str) -> "Constellation":
        rows = json.loads(text)
        if not isinstance(rows, list):
            raise ParameterError("constellation JSON must be a list of points")
        try:
            amps = [complex(r["re"], r.get("im", 0.0)) for r in rows]
            probs = [float(r["p"]) for r in rows]
            labels = [str(r.get("label", i)) for i, r in enumerate(rows)]
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParameterError(f"malformed constellation point: {exc}") from None
        return cls(amps, probs, labels)


def recommended_cutoff(max_abs2: float) -> int:
    """Photon-number cutoff used when none is given."""
    return int(math.ceil(max_abs2 + 10.0 * math.sqrt(max_abs2 + 1.0))) + 5


def _cutoff_for(c: Constellation) -> int:
    return recommended_cutoff(float(np.max(np.abs(c.amplitudes) ** 2)))


def tail_mass(alpha: complex, cutoff: int) -> float:
    """Probability that ``|alpha>`` has more than ``cutoff`` photons."""
    return float(poisson.sf(cutoff, abs(alpha) ** 2))


def coherent_vector(alpha: complex, cutoff: int, tol: float = STATE_TAIL_TOL) -> np.ndarray:
    """Fock amplitudes ``<n|alpha>`` for ``n = 0..cutoff``."""
    if cutoff < 0:
        raise ParameterError("cutoff must be non-negative")
    tail = tail_mass(alpha, cutoff)
    if tail > tol:
        raise TruncationError(f"cutoff {cutoff} drops probability {tail:.3g} of |{alpha}>")
    n = np.arange(cutoff + 1)
    r = abs(alpha)
    if r == 0.0:
        vec = np.zeros(cutoff + 1, dtype=complex)
        vec[0] = 1.0
        return vec
    mag = np.exp(-0.5 * r * r + n * np.log(r) - 0.5 * gammaln(n + 1))
    return mag * np.exp(1j * np.angle(alpha) * n)


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """``<alpha|beta>``."""
    alpha, beta = complex(alpha), complex(beta)
    return np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * abs(beta) ** 2 + alpha.conjugate() * beta)


def constellation_state(c: Constellation, cutoff: Optional[int] = None) -> np.ndarray:
    """Truncated density matrix of ``sum_k p_k |alpha_k><alpha_k|``."""
    cutoff = _cutoff_for(c) if cutoff is None else cutoff
    vecs = np.array([coherent_vector(a, cutoff, tol=MIXTURE_TAIL_TOL) for a in c.amplitudes])
    rho = (vecs.T * c.probabilities) @ vecs.conj()
    return 0.5 * (rho + rho.conj().T)


def gram_matrix(amplitudes: np.ndarray) -> np.ndarray:
    """Overlaps ``O_ij = <alpha_i|alpha_j>``."""
    a = np.asarray(amplitudes, dtype=complex)
    n2 = np.abs(a) ** 2
    return np.exp(-0.5 * n2[:, None] - 0.5 * n2[None, :] + np.conj(a)[:, None] * a[None, :])


def mixture_spectra(overlaps: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Spectra of many mixtures over the same states, one row of weights each.

    ``weights`` has shape ``(..., K)``; returns eigenvalues with the same
    shape, clipped at zero and sorted descending.
    """
    w = np.sqrt(np.clip(weights, 0.0, None))
    G = w[..., :, None] * overlaps * w[..., None, :]
    ev = np.linalg.eigvalsh(G)[..., ::-1]
    return np.clip(ev, 0.0, None)


def spectrum_entropy(ev: np.ndarray) -> np.ndarray:
    """Row-wise Shannon entropy (bits) of eigenvalue arrays."""
    ev = np.asarray(ev, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(ev > 0, -ev * np.log2(np.where(ev > 0, ev, 1.0)), 0.0)
    return terms.sum(axis=-1)


def gram_spectrum(c: Constellation) -> np.ndarray:
    """Exact spectrum of the mixture, padded with zeros to the constellation size."""
    ev = mixture_spectra(gram_matrix(c.amplitudes), c.probabilities)
    return ev / ev.sum()


def mixture_entropy(c: Constellation) -> float:
    return discrete_entropy(gram_spectrum(c))


def pure_loss_output(c: Constellation, T: float, side: str = "bob") -> Constellation:
    """Constellation seen by Bob (``sqrt(T)``) or Eve (``sqrt(1 - T)``) after pure loss."""
    if not 0.0 <= T <= 1.0:
        raise ParameterError(f"transmittance must lie in [0, 1], got {T}")
    if side == "bob":
        factor = math.sqrt(T)
    elif side == "eve":
        factor = math.sqrt(1.0 - T)
    else:
        raise ParameterError(f"side must be bob or eve, got {side!r}")
    return c.scaled(factor)


@dataclass(frozen=True)
class SecondMoments:
    """Symmetrized two-mode moments ``V`` (Alice), ``W`` (Bob), ``Z`` (correlation)."""

    V: float
    W: float
    Z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.V, self.W, self.Z)


def purification(c: Constellation, cutoff: Optional[int] = None) -> np.ndarray:
    """Coefficient matrix ``Phi[m, n]`` of ``|Phi>_{AA'} = sum Phi[m, n] |m>|n>``.

    This is the purification whose A-side measurement in the pretty-good
    basis prepares ``|alpha_k>`` on A'; it equals the complex conjugate of
    ``sqrt(tau)`` in the Fock basis.
    """
    tau = constellation_state(c, cutoff)
    ev, vecs = np.linalg.eigh(tau)
    sq = (vecs * np.sqrt(np.clip(ev, 0.0, None))) @ vecs.conj().T
    return sq.conj()


@lru_cache(maxsize=32)
def _loss_isometry(T: float, cutoff: int) -> np.ndarray:
    """Columns of the beam-splitter unitary acting on ``|n>|0>``, shape ``((N+1)^2, N+1)``.

    The generator conserves total photon number, and every block with total
    number <= cutoff is complete in the truncated product space, so the
    restriction is exact for inputs with at most ``cutoff`` photons.
    """
    d = cutoff + 1
    a = annihilation(cutoff)
    eye = np.eye(d)
    a1, a2 = np.kron(a, eye), np.kron(eye, a)
    theta = math.acos(math.sqrt(T))
    gen = theta * (a1.T @ a2 - a1 @ a2.T)
    U = expm(gen)
    cols = np.arange(d) * d  # |n>|0> sits at index n*d
    return U[:, cols]


def _moments_at(c: Constellation, T: float, cutoff: int) -> SecondMoments:
    d = cutoff + 1
    phi = purification(c, cutoff)
    psi = (phi @ _loss_isometry(float(T), cutoff).T).reshape(d, d, d)
    psi = psi / np.linalg.norm(psi)
    prob = np.abs(psi) ** 2
    n = np.arange(d)
    n_a = np.sum(prob.sum(axis=(1, 2)) * n)
    n_b = np.sum(prob.sum(axis=(0, 2)) * n)
    s = np.sqrt(n[1:])
    lowered = psi[1:, 1:, :] * s[:, None, None] * s[None, :, None]
    ab = np.sum(psi[:-1, :-1, :].conj() * lowered)
    return SecondMoments(2.0 * n_a + 1.0, 2.0 * n_b + 1.0, 2.0 * ab.real)


def purification_cm(c: Constellation, T: float, cutoff: Optional[int] = None,
                    check: bool = True) -> SecondMoments:
    """Moments ``(V, W, Z)`` of the purified constellation after a pure-loss channel.

    A' passes through a beam splitter of transmissivity ``T`` whose other input
    is vacuum; the ancilla is discarded. With ``check`` the evaluation is
    repeated at ``cutoff + 5`` and a shift above 1e-8 raises TruncationError.
    """
    if not 0.0 <= T <= 1.0:
        raise ParameterError(f"transmittance must lie in [0, 1], got {T}")
    cutoff = _cutoff_for(c) if cutoff is None else cutoff
    mom = _moments_at(c, T, cutoff)
    if check:
        ref = _moments_at(c, T, cutoff + 5)
        shift = max(abs(x - y) for x, y in zip(mom.as_tuple(), ref.as_tuple()))
        if shift > MOMENT_STABILITY_TOL:
            raise TruncationError(f"moments moved by {shift:.3g} between cutoff {cutoff} and {cutoff + 5}")
    return mom


def weighted_entropies(c: Constellation, weights: Sequence) -> np.ndarray:
    """Entropy of ``sum_k w_k |alpha_k><alpha_k|`` for each row of ``weights``."""
    return spectrum_entropy(mixture_spectra(gram_matrix(c.amplitudes), np.asarray(weights, dtype=float)))


__all__ = [
    "Constellation",
    "SecondMoments",
    "annihilation",
    "coherent_overlap",
    "coherent_vector",
    "constellation_state",
    "gram_matrix",
    "gram_spectrum",
    "mixture_entropy",
    "mixture_spectra",
    "pure_loss_output",
    "purification",
    "purification_cm",
    "recommended_cutoff",
    "spectrum_entropy",
    "tail_mass",
    "weighted_entropies",
]
