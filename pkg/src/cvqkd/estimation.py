"""Channel parameter estimation from paired transmit/receive data."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erfinv
from scipy.stats import norm

from .errors import DegenerateMeasurementError, EstimationError, ParameterError, PhysicalityError
from .symplectic import SIGMA_Z, CovarianceMatrix, validate_cm

QUANTILE_CONVENTIONS = ("paper", "gaussian")

SCALAR_HEADER = ("x", "y")
VECTOR_HEADER = ("x_q", "x_p", "y_q", "y_p")


@dataclass(frozen=True)
class Dataset:
    """Paired samples. ``xs`` and ``ys`` are 1-D (scalar model) or ``(m, 2)`` arrays."""

    xs: np.ndarray
    ys: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.shape != ys.shape:
            raise ParameterError(f"xs {xs.shape} and ys {ys.shape} differ in shape")
        if xs.ndim not in (1, 2) or (xs.ndim == 2 and xs.shape[1] != 2):
            raise ParameterError("samples must be scalars or 2-vectors")
        if xs.shape[0] < 2:
            raise ParameterError("at least 2 samples are required")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return self.xs.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.xs.ndim == 2

    @property
    def header(self) -> tuple:
        return VECTOR_HEADER if self.is_vector else SCALAR_HEADER

    def rows(self) -> np.ndarray:
        return np.column_stack([self.xs, self.ys])

    def to_csv(self, digits: Optional[int] = None) -> str:
        """CSV text; values use ``repr`` unless ``digits`` significant digits are requested."""
        fmt = repr if digits is None else (lambda v: f"{v:.{digits}g}")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows():
            w.writerow([fmt(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise ParameterError("empty dataset file") from None
        if header not in (SCALAR_HEADER, VECTOR_HEADER):
            raise ParameterError(f"unrecognised header {header}; expected x,y or x_q,x_p,y_q,y_p")
        try:
            data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        except ValueError as exc:
            raise ParameterError(f"non-numeric value in dataset: {exc}") from None
        if data.ndim != 2 or data.shape[1] != len(header):
            raise ParameterError("every row needs one value per column")
        if header == SCALAR_HEADER:
            return cls(data[:, 0], data[:, 1])
        return cls(data[:, :2], data[:, 2:])


@dataclass(frozen=True)
class EstimationResult:
    t_hat: float
    sigma2_hat: float
    t_min: float
    sigma2_max: float
    epsilon_pe: float
    z: float


def mle_fit(d: Dataset) -> tuple[float, float]:
    """Least-squares slope and residual variance of ``y = t x + noise``."""
    x, y = d.xs.ravel(), d.ys.ravel()
    sxx = float(np.dot(x, x))
    if sxx <= 0.0:
        raise DegenerateMeasurementError("all transmitted values are zero")
    t_hat = float(np.dot(x, y)) / sxx
    resid = y - t_hat * x
    return t_hat, float(np.dot(resid, resid)) / x.size


def quantile(epsilon_pe: float, convention: str = "paper") -> float:
    """Confidence quantile for failure probability ``epsilon_pe``.

    ``paper`` uses ``erfinv(1 - eps/2)``; ``gaussian`` uses the standard normal
    quantile ``Phi^-1(1 - eps/2)``, which is larger by a factor of about sqrt 2.
    """
    if not 0.0 < epsilon_pe < 1.0:
        raise ParameterError(f"epsilon_pe must lie in (0, 1), got {epsilon_pe}")
    if convention == "paper":
        return float(erfinv(1.0 - epsilon_pe / 2.0))
    if convention == "gaussian":
        return float(norm.ppf(1.0 - epsilon_pe / 2.0))
    raise ParameterError(f"quantile convention must be one of {QUANTILE_CONVENTIONS}, got {convention!r}")


def worst_case_bounds(t_hat: float, sigma2_hat: float, m: int, v_a: float, epsilon_pe: float,
                      convention: str = "paper") -> tuple[float, float]:
    """Pessimistic ``(t_min, sigma2_max)`` at failure probability ``epsilon_pe``."""
    if m < 2:
        raise ParameterError(f"need m >= 2 samples, got {m}")
    if not v_a > 0:
        raise ParameterError(f"v_a must be positive, got {v_a}")
    if sigma2_hat < 0:
        raise ParameterError("sigma2_hat must be non-negative")
    z = quantile(epsilon_pe, convention)
    t_min = t_hat - z * math.sqrt(sigma2_hat / (m * v_a))
    sigma2_max = sigma2_hat + z * sigma2_hat * math.sqrt(2.0) / math.sqrt(m)
    return t_min, sigma2_max


def worst_case_cm(t_min: float, sigma2_max: float, v_a: float, mu: float = 1.0) -> CovarianceMatrix:
    """Entanglement-based CM built from the worst-case bounds.

    ``mu`` is the number of vacuum units in Bob's measured variance (1 for
    homodyne, 2 for heterodyne); the surplus ``mu - 1`` is removed so that
    Bob's block describes his mode before detection.
    """
    z = math.sqrt(v_a * v_a + 2.0 * v_a)
    b = t_min * t_min * v_a + sigma2_max - (mu - 1.0)
    eye = np.eye(2)
    cm = CovarianceMatrix(np.block([[(v_a + 1.0) * eye, t_min * z * SIGMA_Z],
                                    [t_min * z * SIGMA_Z, b * eye]]))
    report = validate_cm(cm)
    if not report.is_physical:
        raise PhysicalityError(f"worst-case CM is unphysical (min symplectic eigenvalue {report.min_symplectic_eig})")
    return cm


def estimate(d: Dataset, v_a: float, epsilon_pe: float, convention: str = "paper") -> EstimationResult:
    t_hat, s2 = mle_fit(d)
    t_min, s2_max = worst_case_bounds(t_hat, s2, d.xs.size, v_a, epsilon_pe, convention)
    return EstimationResult(t_hat, s2, t_min, s2_max, epsilon_pe, quantile(epsilon_pe, convention))


def channel_from_linear(t: float, sigma2: float, mu: float = 1.0) -> tuple[float, float]:
    """Map the linear-model pair ``(t, sigma2)`` to ``(T, xi)`` using ``sigma2 = mu + T xi``."""
    T = t * t
    if T <= 0.0:
        raise EstimationError("estimated transmittance is not positive")
    return T, (sigma2 - mu) / T


@dataclass(frozen=True)
class QpskEstimate:
    T_hat: float
    xi_hat: float
    c_hat: float
    v_hat: float


def _check_labels(xs: np.ndarray) -> None:
    ok = (np.abs(xs).sum(axis=1) == 1.0) & (np.count_nonzero(xs, axis=1) == 1)
    if not np.all(ok):
        raise ParameterError("QPSK labels must be one of (+-1, 0), (0, +-1)")


def qpsk_estimate(d: Dataset, alpha: float, mu: float = 1.0) -> QpskEstimate:
    """Moment estimators of ``(T, xi)`` for QPSK in quadrature scale.

    Bob's labelled component has mean ``2 sqrt(T) alpha`` and every component
    has variance ``mu + T xi`` around its mean.
    """
    if not d.is_vector:
        raise ParameterError("QPSK estimation needs 2-vector samples")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    _check_labels(d.xs)
    n = len(d)
    c_hat = float(np.sum(d.xs * d.ys)) / n
    sqrt_t = c_hat / (2.0 * alpha)
    if sqrt_t <= 0.0:
        raise EstimationError(f"estimated sqrt(T) = {sqrt_t} is not positive")
    T_hat = sqrt_t * sqrt_t
    v_hat = float(np.sum(d.ys * d.ys)) / (2.0 * n)
    xi_hat = (v_hat - mu - 2.0 * T_hat * alpha * alpha) / T_hat
    return QpskEstimate(T_hat, xi_hat, c_hat, v_hat)


def qpsk_worst_case(d: Dataset, alpha: float, epsilon_pe: float, mu: float = 1.0,
                    convention: str = "paper") -> tuple[float, float]:
    """Pessimistic ``(T_min, xi_max)`` for QPSK data.

    The labelled components form a linear model ``y = t x + noise`` with
    ``t = 2 sqrt(T) alpha``; the generic worst-case bounds are applied to it
    with unit modulation variance, and the noise bound is taken from all
    components.
    """
    _check_labels(d.xs)
    n = len(d)
    x, y = d.xs.ravel(), d.ys.ravel()
    t_hat = float(np.dot(x, y)) / n
    resid = y - t_hat * x
    s2 = float(np.dot(resid, resid)) / (2 * n)
    z = quantile(epsilon_pe, convention)
    t_min = t_hat - z * math.sqrt(s2 / n)
    s2_max = s2 + z * s2 * math.sqrt(2.0) / math.sqrt(2 * n)
    if t_min <= 0.0:
        raise EstimationError("lower transmittance bound is not positive")
    T_min = (t_min / (2.0 * alpha)) ** 2
    return T_min, (s2_max - mu) / T_min


def channel_from_bounds(result: EstimationResult, mu: float = 1.0) -> tuple[float, float]:
    """Pessimistic ``(T, xi)`` implied by an EstimationResult."""
    return channel_from_linear(result.t_min, result.sigma2_max, mu)


__all__ = [
    "Dataset",
    "EstimationResult",
    "QpskEstimate",
    "channel_from_bounds",
    "channel_from_linear",
    "estimate",
    "mle_fit",
    "qpsk_estimate",
    "qpsk_worst_case",
    "quantile",
    "worst_case_bounds",
    "worst_case_cm",
]
