"""Numerical toolkit for continuous-variable QKD key rates."""

from .entropy import ProtocolConfig, g
from .errors import (
    AccuracyError,
    CVQKDError,
    DegenerateMeasurementError,
    DimensionError,
    DomainError,
    EstimationError,
    ParameterError,
    PhysicalityError,
    TruncationError,
)
from .fock import Constellation, SecondMoments
from .keyrate_dm import DmConfig, keyrate_dm
from .keyrate_gm import ChannelParams, KeyRate, keyrate_mdi_symmetric, keyrate_trusted, keyrate_untrusted
from .symplectic import CovarianceMatrix, SymplecticTransform, symplectic_eigenvalues

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "CVQKDError",
    "ChannelParams",
    "Constellation",
    "CovarianceMatrix",
    "DegenerateMeasurementError",
    "DimensionError",
    "DmConfig",
    "DomainError",
    "EstimationError",
    "KeyRate",
    "ParameterError",
    "PhysicalityError",
    "ProtocolConfig",
    "SecondMoments",
    "SymplecticTransform",
    "TruncationError",
    "g",
    "keyrate_dm",
    "keyrate_mdi_symmetric",
    "keyrate_trusted",
    "keyrate_untrusted",
    "symplectic_eigenvalues",
]
