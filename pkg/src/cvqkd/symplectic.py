"""Covariance-matrix calculus for Gaussian states.

Conventions: shot-noise units (vacuum variance 1) and mode-major interleaved
ordering ``(q1, p1, q2, p2, ...)``. The symplectic form is
``Omega = diag(omega, ..., omega)`` with ``omega = [[0, 1], [-1, 0]]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateMeasurementError,
    DimensionError,
    DomainError,
    ParameterError,
)

SYMMETRY_RTOL = 1e-12
PHYSICALITY_TOL = 1e-9
SYMPLECTIC_TOL = 1e-10

SIGMA_Z = np.diag([1.0, -1.0])


def omega(modes: int) -> np.ndarray:
    """Symplectic form for ``modes`` modes."""
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_square_even(mat: np.ndarray) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {mat.shape}")
    if mat.shape[0] == 0 or mat.shape[0] % 2:
        raise DimensionError(f"dimension must be even and positive, got {mat.shape[0]}")


def _is_symmetric(mat: np.ndarray) -> bool:
    scale = max(np.max(np.abs(mat)), 1.0)
    return bool(np.max(np.abs(mat - mat.T)) <= SYMMETRY_RTOL * scale)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Second moments of an m-mode Gaussian state.

    The matrix is stored read-only. Construction checks shape, finiteness and
    symmetry but not physicality; use :func:`validate_cm` for that.
    """

    entries: np.ndarray

    def __post_init__(self):
        mat = np.array(self.entries, dtype=float)
        _check_square_even(mat)
        if not np.all(np.isfinite(mat)):
            raise DomainError("covariance matrix has non-finite entries")
        if not _is_symmetric(mat):
            raise DomainError("covariance matrix is not symmetric")
        mat = 0.5 * (mat + mat.T)
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @property
    def modes(self) -> int:
        return self.entries.shape[0] // 2

    def block(self, i: int, j: int) -> np.ndarray:
        """2x2 block between modes ``i`` and ``j``."""
        return self.entries[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def submatrix(self, modes: Sequence[int]) -> "CovarianceMatrix":
        """Reduced CM of the listed modes (partial trace), in the given order."""
        idx = np.concatenate([[2 * k, 2 * k + 1] for k in modes])
        return CovarianceMatrix(self.entries[np.ix_(idx, idx)])

    def to_json(self) -> str:
        return json.dumps({"modes": self.modes, "entries": self.entries.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "CovarianceMatrix":
        obj = json.loads(text)
        m = int(obj["modes"])
        entries = np.asarray(obj["entries"], dtype=float)
        if entries.size != 4 * m * m:
            raise DimensionError(f"expected {4 * m * m} entries for {m} modes, got {entries.size}")
        return cls(entries.reshape(2 * m, 2 * m))

    @classmethod
    def standard_form(cls, a: float, b: float, c: float) -> "CovarianceMatrix":
        """Two-mode CM ``[[a I, c Z], [c Z, b I]]`` with ``Z = diag(1, -1)``."""
        eye = np.eye(2)
        return cls(np.block([[a * eye, c * SIGMA_Z], [c * SIGMA_Z, b * eye]]))

    @classmethod
    def tmsvs(cls, u: float) -> "CovarianceMatrix":
        """Two-mode squeezed vacuum with quadrature variance ``u = cosh(2s)``."""
        if u < 1:
            raise ParameterError("TMSVS variance must be >= 1")
        return cls.standard_form(u, u, np.sqrt(u * u - 1.0))

    @classmethod
    def vacuum(cls, modes: int = 1) -> "CovarianceMatrix":
        return cls(np.eye(2 * modes))

    def direct_sum(self, other: "CovarianceMatrix") -> "CovarianceMatrix":
        n1, n2 = self.entries.shape[0], other.entries.shape[0]
        out = np.zeros((n1 + n2, n1 + n2))
        out[:n1, :n1] = self.entries
        out[n1:, n1:] = other.entries
        return CovarianceMatrix(out)


@dataclass(frozen=True)
class SymplecticTransform:
    """Gaussian unitary in the Heisenberg picture: ``r -> S r + d``."""

    matrix: np.ndarray
    displacement: np.ndarray = field(default=None)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        _check_square_even(mat)
        d = np.zeros(mat.shape[0]) if self.displacement is None else np.array(self.displacement, dtype=float)
        if d.shape != (mat.shape[0],):
            raise DimensionError("displacement length does not match the matrix")
        mat.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "displacement", d)

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2

    def is_symplectic(self, tol: float = SYMPLECTIC_TOL) -> bool:
        om = omega(self.modes)
        return bool(np.max(np.abs(self.matrix @ om @ self.matrix.T - om)) <= tol)

    def __matmul__(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """Composition: apply ``other`` first, then ``self``."""
        return SymplecticTransform(
            self.matrix @ other.matrix, self.matrix @ other.displacement + self.displacement
        )


@dataclass(frozen=True)
class PhysicalityReport:
    is_symmetric: bool
    is_positive_definite: bool
    min_symplectic_eig: float

    @property
    def is_physical(self) -> bool:
        return (
            self.is_symmetric
            and self.is_positive_definite
            and self.min_symplectic_eig >= 1.0 - PHYSICALITY_TOL
        )


def _as_matrix(cm) -> np.ndarray:
    if isinstance(cm, CovarianceMatrix):
        return cm.entries
    mat = np.asarray(cm, dtype=float)
    _check_square_even(mat)
    return mat


def _raw_symplectic_spectrum(mat: np.ndarray) -> np.ndarray:
    # eigenvalues of Omega @ Sigma are +-i nu for each nu; pair them after sorting
    m = mat.shape[0] // 2
    mags = np.sort(np.abs(np.linalg.eigvals(omega(m) @ mat)))[::-1]
    return 0.5 * (mags[0::2] + mags[1::2])


def validate_cm(cm) -> PhysicalityReport:
    """Check symmetry, positive definiteness and the uncertainty relation."""
    mat = _as_matrix(cm)
    if not np.all(np.isfinite(mat)):
        raise DomainError("covariance matrix has non-finite entries")
    sym = _is_symmetric(mat)
    sym_mat = 0.5 * (mat + mat.T)
    pos = bool(np.min(np.linalg.eigvalsh(sym_mat)) > 0)
    nu_min = float(np.min(_raw_symplectic_spectrum(sym_mat)))
    return PhysicalityReport(sym, pos, nu_min)


def two_mode_invariants(cm) -> tuple[float, float]:
    """``(Delta, Gamma)`` = ``(det A + det B + 2 det C, det Sigma)`` of a two-mode CM."""
    mat = _as_matrix(cm)
    if mat.shape != (4, 4):
        raise DimensionError("two-mode CM required")
    ga, gb, gab = mat[:2, :2], mat[2:, 2:], mat[:2, 2:]
    delta = np.linalg.det(ga) + np.linalg.det(gb) + 2.0 * np.linalg.det(gab)
    return float(delta), float(np.linalg.det(mat))


def two_mode_eigenvalues(delta: float, gamma: float) -> tuple[float, float]:
    """Symplectic eigenvalues from the two-mode invariants, larger first."""
    disc = np.sqrt(max(delta * delta - 4.0 * gamma, 0.0))
    big = 0.5 * (delta + disc)
    # product form for the small root avoids cancellation
    small = gamma / big if big > 0 else 0.0
    return float(np.sqrt(big)), float(np.sqrt(max(small, 0.0)))


def standard_form_eigenvalues(a: float, b: float, c: float) -> tuple[float, float]:
    """Closed form for ``[[a I, c Z], [c Z, b I]]``; returns ``(nu_1, nu_2)``."""
    root = np.sqrt((a + b) ** 2 - 4.0 * c * c)
    return float(0.5 * (root + (b - a))), float(0.5 * (root - (b - a)))


def symplectic_eigenvalues(cm) -> np.ndarray:
    """Symplectic spectrum in descending order.

    With ``Sigma = L L^T`` the matrix ``i L^T Omega L`` is Hermitian with
    eigenvalues ``+-nu_k``, so a Hermitian eigensolver gives the spectrum
    accurately even when eigenvalues are degenerate.
    """
    mat = _as_matrix(cm)
    sym = 0.5 * (mat + mat.T)
    try:
        L = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        raise DomainError("covariance matrix is not positive definite") from None
    m = mat.shape[0] // 2
    if m == 1:
        return np.array([np.sqrt(np.linalg.det(sym))])
    ev = np.linalg.eigvalsh(1j * (L.T @ omega(m) @ L))
    return np.sort(ev[m:])[::-1]


def gaussian_unitary(kind: str, **params) -> SymplecticTransform:
    """Symplectic matrix (and displacement) of a named Gaussian unitary.

    kinds and parameters:
        displacement(alpha: complex) -> S = I, d = (2 Re alpha, 2 Im alpha)
        squeeze1(s) -> diag(e^-s, e^s)
        squeeze2(s) -> [[cosh s I, sinh s Z], [sinh s Z, cosh s I]]
        beamsplitter(T) -> [[sqrt(T) I, sqrt(1-T) I], [-sqrt(1-T) I, sqrt(T) I]]
        rotation(theta) -> [[cos, sin], [-sin, cos]]
    """
    eye = np.eye(2)
    if kind == "displacement":
        alpha = complex(params["alpha"])
        return SymplecticTransform(eye, [2.0 * alpha.real, 2.0 * alpha.imag])
    if kind == "squeeze1":
        s = float(params["s"])
        return SymplecticTransform(np.diag([np.exp(-s), np.exp(s)]))
    if kind == "squeeze2":
        s = float(params["s"])
        ch, sh = np.cosh(s), np.sinh(s)
        return SymplecticTransform(np.block([[ch * eye, sh * SIGMA_Z], [sh * SIGMA_Z, ch * eye]]))
    if kind == "beamsplitter":
        T = float(params["T"])
        if not 0.0 <= T <= 1.0:
            raise ParameterError(f"beam-splitter transmissivity must lie in [0, 1], got {T}")
        t, r = np.sqrt(T), np.sqrt(1.0 - T)
        return SymplecticTransform(np.block([[t * eye, r * eye], [-r * eye, t * eye]]))
    if kind == "rotation":
        th = float(params["theta"])
        c, s = np.cos(th), np.sin(th)
        return SymplecticTransform(np.array([[c, s], [-s, c]]))
    raise ParameterError(f"unknown Gaussian unitary {kind!r}")


def embed(t: SymplecticTransform, modes: Sequence[int], total: int) -> SymplecticTransform:
    """Lift a k-mode transform acting on ``modes`` into a ``total``-mode system."""
    if len(modes) != t.modes:
        raise DimensionError(f"transform acts on {t.modes} modes, got {len(modes)} targets")
    idx = np.concatenate([[2 * k, 2 * k + 1] for k in modes])
    big = np.eye(2 * total)
    big[np.ix_(idx, idx)] = t.matrix
    d = np.zeros(2 * total)
    d[idx] = t.displacement
    return SymplecticTransform(big, d)


def apply_symplectic(cm, t: SymplecticTransform, mean: Optional[np.ndarray] = None):
    """Propagate ``(Sigma, mean)`` through ``t``: ``S Sigma S^T`` and ``S mean + d``."""
    mat = _as_matrix(cm)
    if mat.shape != t.matrix.shape:
        raise DimensionError(f"CM shape {mat.shape} does not match transform {t.matrix.shape}")
    r = np.zeros(mat.shape[0]) if mean is None else np.asarray(mean, dtype=float)
    if r.shape != (mat.shape[0],):
        raise DimensionError("mean vector length does not match the CM")
    S = t.matrix
    out = S @ mat @ S.T
    return CovarianceMatrix(0.5 * (out + out.T)), S @ r + t.displacement


def conditional_cm(joint, detection: str, measured: Optional[int] = None) -> CovarianceMatrix:
    """CM of the unmeasured modes after a Gaussian measurement of one mode.

    ``detection`` is ``homodyne_q``, ``homodyne_p`` or ``heterodyne``; plain
    ``homodyne`` means ``homodyne_q``.
    ``measured`` defaults to the last mode. The remaining modes keep their order.
    """
    mat = _as_matrix(joint)
    m = mat.shape[0] // 2
    if m < 2:
        raise DimensionError("need at least two modes to condition on one")
    k = m - 1 if measured is None else int(measured)
    if not 0 <= k < m:
        raise DimensionError(f"measured mode {k} out of range")
    b_idx = np.array([2 * k, 2 * k + 1])
    a_idx = np.array([i for i in range(2 * m) if i not in b_idx])
    ga = mat[np.ix_(a_idx, a_idx)]
    gab = mat[np.ix_(a_idx, b_idx)]
    gb = mat[np.ix_(b_idx, b_idx)]
    if detection == "homodyne":
        detection = "homodyne_q"
    if detection in ("homodyne_q", "homodyne_p"):
        slot = 0 if detection == "homodyne_q" else 1
        var = gb[slot, slot]
        if not var > 0:
            raise DegenerateMeasurementError(f"measured quadrature variance is {var}")
        pinv = np.zeros((2, 2))
        pinv[slot, slot] = 1.0 / var
    elif detection == "heterodyne":
        try:
            pinv = np.linalg.inv(gb + np.eye(2))
        except np.linalg.LinAlgError:
            raise DegenerateMeasurementError("gamma_B + I is singular") from None
    else:
        raise ParameterError(f"unknown detection {detection!r}")
    out = ga - gab @ pinv @ gab.T
    return CovarianceMatrix(0.5 * (out + out.T))


def random_passive(modes: int, rng: np.random.Generator) -> np.ndarray:
    """Random orthogonal symplectic matrix (interleaved ordering) from a Haar unitary."""
    z = (rng.normal(size=(modes, modes)) + 1j * rng.normal(size=(modes, modes))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    u = q * (np.diag(r) / np.abs(np.diag(r)))
    # a -> U a; q = a + a^dag, p = i(a^dag - a) give the real 2x2 blocks below
    S = np.zeros((2 * modes, 2 * modes))
    for i in range(modes):
        for j in range(modes):
            x, y = u[i, j].real, u[i, j].imag
            S[2 * i:2 * i + 2, 2 * j:2 * j + 2] = [[x, -y], [y, x]]
    return S


def random_symplectic(modes: int, rng: np.random.Generator, max_squeeze: float = 1.0) -> SymplecticTransform:
    """Random symplectic via a Bloch-Messiah product ``O1 diag(e^-r, e^r) O2``."""
    r = rng.uniform(-max_squeeze, max_squeeze, size=modes)
    sq = np.diag(np.ravel(np.column_stack([np.exp(-r), np.exp(r)])))
    return SymplecticTransform(random_passive(modes, rng) @ sq @ random_passive(modes, rng))
