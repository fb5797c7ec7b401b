"""Bussgang decomposition of memoryless non-linearities.

``z = U(x) = B x + eta`` with ``eta`` uncorrelated with the Gaussian input
``x``, for scalar real, scalar complex and vector (MIMO) signals.
"""
from .errors import (
    BussgangError,
    ConditionalMeanNotSatisfied,
    ConfigError,
    DegenerateDiagonal,
    DomainMismatch,
    InvalidCorrelation,
    InvalidNoisePower,
    InvalidPower,
    InvalidVariance,
    IoError,
    JointCovarianceNotPSD,
    NoClosedForm,
    NoConvergence,
    NoDerivative,
    NotHermitian,
    NotPSD,
    ParseError,
    ValidationError,
)
from .experiment import CdfSeries, ExperimentConfig, emit_cdf_csv, emit_summary_json, run_fig3
from .mimo import (
    ElementwiseDistortion,
    MimoDecomposition,
    decompose_general,
    distortion_correlation,
    elementwise_gain_diag,
    gain_matrix,
    verify_mimo_theorem,
)
from .nonlinearity import (
    Nonlinearity,
    apply,
    closed_form_gain,
    derivative,
    parse_nonlinearity,
    quantizer_design_lloyd_max,
)
from .sampling import RandomStream, SignalSource
from .scalar import (
    GainEstimate,
    ScalarDecomposition,
    aqnm_check,
    decompose,
    decompose_closed_form,
    gain_closed_form,
    gain_correlation,
    gain_derivative,
    rate_lower_bound,
    sdr,
    uniqueness_probe,
    verify_cross_correlation_theorem,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
