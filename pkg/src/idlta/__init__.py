"""Determined source separation with diagonal-plus-rank-1 frequency covariances."""

from .errors import (
    ConfigurationError,
    DegenerateDemixingError,
    FormatError,
    IdltaError,
    IllConditionedUpdateError,
    InvalidInputError,
    ModelDomainError,
    NumericalError,
)
from .estimators import FileBackedEstimator, OracleEstimator, PassthroughEstimator, estimate_fcm
from .evaluation import EvalReport, align_and_score, sdr
from .fcm import FcmInverseCache, FcmSeries, build_inverse_cache, total_objective
from .mixsim import MixSpec, mix
from .pipeline import SeparationConfig, SeparationResult, scale_restore, separate
from .stft import MixtureSpectrogram, StftConfig, TimeSignal, stft_forward, stft_inverse

__version__ = "0.1.0"
