"""Scalar Bussgang decomposition, real and complex.

Real inputs are ``x ~ N(0, C_x)``; complex inputs are ``x ~ CN(0, C_x)``
(each component ``N(0, C_x/2)``). Which one applies is decided by the
non-linearity's domain, or by ``real=`` for entries accepting both.

Gains are always normalized by the configured power ``C_x`` rather than by
the sample power.
"""
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import _engine
from .errors import (
    ConditionalMeanNotSatisfied,
    InvalidNoisePower,
    InvalidVariance,
    ValidationError,
)
from .nonlinearity import (
    REAL,
    Nonlinearity,
    apply,
    closed_form_gain,
    closed_form_output_power,
    derivative,
)
from .sampling import (
    SignalSource,
    draw_jointly_gaussian_pair,
)

MIN_SAMPLES = 1000


@dataclass(frozen=True)
class GainEstimate:
    value: complex
    method: str  # closed_form | correlation_mc | derivative_mc
    n_samples: int = 0
    std_error: float = 0.0


@dataclass(frozen=True)
class ScalarDecomposition:
    B: complex
    C_x: float
    C_z: float
    C_zx: complex
    distortion_power: float
    sdr: float
    orthogonality_residual: float
    orthogonality_std_error: float = 0.0
    B_std_error: float = 0.0
    clamped: bool = False
    real: bool = False
    n_samples: int = 0
    seed: int = None
    method: str = "correlation_mc"


def _is_real(U: Nonlinearity, real):
    if real is None:
        return U.domain == REAL
    return bool(real)


def _source(C_x, real) -> SignalSource:
    if not C_x > 0:
        raise InvalidVariance(f"C_x must be positive, got {C_x}")
    return SignalSource("real_gaussian" if real else "complex_gaussian", power=float(C_x))


def _check_n(n, minimum=MIN_SAMPLES):
    if int(n) < minimum:
        raise ValidationError(f"need at least {minimum} samples, got {n}")
    return int(n)


def _scalar(v, real):
    v = complex(v)
    return v.real if real else v


def gain_closed_form(U: Nonlinearity, C_x: float, real=None) -> GainEstimate:
    return GainEstimate(closed_form_gain(U, C_x, real=_is_real(U, real)), "closed_form")


def gain_correlation(U: Nonlinearity, C_x: float, stream, n: int, real=None) -> GainEstimate:
    """``B = E{U(x) x*} / C_x`` by Monte Carlo."""
    real = _is_real(U, real)
    n = _check_n(n)
    src = _source(C_x, real)
    B, se, _ = _engine.gain_only(src.draw, lambda x: apply(U, x), [[C_x]], stream, n)
    return GainEstimate(_scalar(B[0, 0], real), "correlation_mc", n, float(se[0, 0]))


def gain_derivative(U: Nonlinearity, C_x: float, stream, n: int, real=None) -> GainEstimate:
    """``B = E{dU/dx}`` by Monte Carlo (Wirtinger derivative for complex x)."""
    real = _is_real(U, real)
    n = _check_n(n)
    src = _source(C_x, real)
    if not U.has_derivative:
        derivative(U, 0.0)  # raises NoDerivative
    stats = _engine.linear_stats(
        stream, n, lambda sub, size: np.atleast_1d(derivative(U, src.draw(sub, size)[:, 0]))[:, None]
    )
    return GainEstimate(_scalar(stats.mean[0], real), "derivative_mc", n, stats.std_error([1.0]))


def decompose(U: Nonlinearity, C_x: float, stream, n: int, real=None) -> ScalarDecomposition:
    """Monte Carlo decomposition ``U(x) = B x + eta`` with diagnostics."""
    real = _is_real(U, real)
    n = _check_n(n)
    src = _source(C_x, real)
    m = _engine.estimate(src.draw, lambda x: apply(U, x), stream, n, C_x=[[C_x]])
    B = m.B[0, 0]
    C_z = float(np.real(m.C_z[0, 0]))
    dist = float(C_z - abs(B) ** 2 * C_x)
    clamped = dist < 0
    if clamped:
        warnings.warn(f"distortion power {dist:.3e} < 0 from Monte Carlo noise; clamped to 0")
        dist = 0.0
    signal = float(abs(B) ** 2 * C_x)
    return ScalarDecomposition(
        B=_scalar(B, real),
        C_x=float(C_x),
        C_z=C_z,
        C_zx=_scalar(m.C_zx[0, 0], real),
        distortion_power=dist,
        sdr=_ratio(signal, dist),
        orthogonality_residual=float(abs(m.residual[0, 0])),
        orthogonality_std_error=float(m.residual_se[0, 0]),
        B_std_error=float(m.B_se[0, 0]),
        clamped=bool(clamped),
        real=real,
        n_samples=n,
        seed=getattr(stream, "seed", None),
    )


def decompose_closed_form(U: Nonlinearity, C_x: float, real=None) -> ScalarDecomposition:
    """Exact decomposition from the closed-form gain and output power.

    Raises :class:`~bussgang.errors.NoClosedForm` when either is unknown.
    """
    real = _is_real(U, real)
    if not C_x > 0:
        raise InvalidVariance(f"C_x must be positive, got {C_x}")
    B = closed_form_gain(U, C_x, real=real)
    C_z = closed_form_output_power(U, C_x, real=real)
    signal = float(abs(B) ** 2 * C_x)
    # exact zeros stay exact: identity and linear maps have no distortion
    dist = max(C_z - signal, 0.0)
    return ScalarDecomposition(
        B=_scalar(B, real),
        C_x=float(C_x),
        C_z=float(C_z),
        C_zx=_scalar(B * C_x, real),
        distortion_power=float(dist),
        sdr=_ratio(signal, dist),
        orthogonality_residual=0.0,
        real=real,
        method="closed_form",
    )


def _ratio(signal, distortion):
    if distortion <= 0:
        return math.inf
    return signal / distortion


def sdr(d: ScalarDecomposition) -> float:
    """Signal-to-distortion ratio ``|B|^2 C_x / E{|eta|^2}`` (linear, may be inf)."""
    return _ratio(abs(d.B) ** 2 * d.C_x, d.distortion_power)


def rate_lower_bound(d: ScalarDecomposition, noise_power: float) -> float:
    """Achievable rate in bit per channel use when ``eta + noise`` is treated
    as independent Gaussian noise."""
    if not noise_power > 0 or not math.isfinite(noise_power):
        raise InvalidNoisePower(f"noise power must be positive and finite, got {noise_power}")
    signal = abs(d.B) ** 2 * d.C_x
    return math.log2(1.0 + signal / (d.distortion_power + noise_power))


@dataclass(frozen=True)
class TheoremCheck:
    C_zy_hat: complex
    B_hat: complex
    C_xy_hat: complex
    rhs: complex
    deviation: float
    std_error: float
    within: bool


def verify_cross_correlation_theorem(
    U: Nonlinearity, C_x: float, C_y: float, rho, stream, n: int, real=None
) -> TheoremCheck:
    """Compare ``E{U(x) y*}`` with ``B E{x y*}`` for jointly Gaussian ``(x, y)``.

    The band is four standard errors of the delta-method linearization of
    ``C_zy - (C_zx / C_x) C_xy``.
    """
    real = _is_real(U, real)
    n = _check_n(n, 10_000)
    if not (C_x > 0 and C_y > 0):
        raise InvalidVariance("C_x and C_y must be positive")

    def quantities(sub, size):
        x, y = draw_jointly_gaussian_pair(sub, C_x, C_y, rho, size, real=real)
        z = apply(U, x)
        return np.column_stack([z * np.conj(y), x * np.conj(y), z * np.conj(x)])

    # validate arguments before fanning out
    draw_jointly_gaussian_pair(np.random.default_rng(0), C_x, C_y, rho, 1, real=real)
    st = _engine.linear_stats(stream, n, quantities)
    c_zy, c_xy, c_zx = st.mean
    B = c_zx / C_x
    rhs = B * c_xy
    se = st.std_error([1.0, -B, -c_xy / C_x])
    dev = float(abs(c_zy - rhs))
    return TheoremCheck(
        _scalar(c_zy, real), _scalar(B, real), _scalar(c_xy, real), _scalar(rhs, real), dev, se, dev < 4 * se
    )


@dataclass(frozen=True)
class AqnmReport:
    beta: float
    one_minus_beta: float
    B_hat: complex
    C_zx_hat: complex
    C_z_hat: float
    gap: float  # |(1 - beta) - B|
    gap_std_error: float
    relative_gap: float  # |C_zx - C_z| / C_z
    relative_std_error: float
    n_samples: int = 0


def aqnm_check(Q: Nonlinearity, C_x: float, stream, n: int, real=None) -> AqnmReport:
    """Monte Carlo check that ``1 - beta`` equals the Bussgang gain and
    ``C_zx = C_z`` for a conditional-mean quantizer."""
    if not Q.satisfies_conditional_mean:
        raise ConditionalMeanNotSatisfied(f"{Q.name} does not satisfy E{{x|Q(x)}} = Q(x)")
    real = _is_real(Q, real)
    n = _check_n(n)
    src = _source(C_x, real)

    def quantities(sub, size):
        x = src.draw(sub, size)[:, 0]
        z = apply(Q, x)
        return np.column_stack([np.abs(x - z) ** 2, z * np.conj(x), np.abs(z) ** 2]).astype(complex)

    st = _engine.linear_stats(stream, n, quantities)
    mse, c_zx, c_z = st.mean
    beta = float(np.real(mse)) / C_x
    B = c_zx / C_x
    c_z = float(np.real(c_z))
    return AqnmReport(
        beta=beta,
        one_minus_beta=1.0 - beta,
        B_hat=_scalar(B, real),
        C_zx_hat=_scalar(c_zx, real),
        C_z_hat=c_z,
        gap=float(abs(1.0 - beta - B)),
        gap_std_error=st.std_error([-1.0 / C_x, -1.0 / C_x, 0.0]),
        relative_gap=float(abs(c_zx - c_z) / c_z),
        relative_std_error=st.std_error([0.0, 1.0, -1.0]) / c_z,
        n_samples=n,
    )


@dataclass(frozen=True)
class ProbeResult:
    residual: float
    std_error: float


def uniqueness_probe(U: Nonlinearity, C_x: float, B_alt, stream, n: int, real=None) -> ProbeResult:
    """``|E^{(U(x) - B_alt x) x*}|``; vanishes (up to noise) only at the
    Bussgang gain."""
    real = _is_real(U, real)
    n = _check_n(n, 10_000)
    src = _source(C_x, real)

    def quantities(sub, size):
        x = src.draw(sub, size)[:, 0]
        z = apply(U, x)
        return np.column_stack([z * np.conj(x), np.abs(x) ** 2]).astype(complex)

    st = _engine.linear_stats(stream, n, quantities)
    resid = st.mean[0] - B_alt * st.mean[1]
    return ProbeResult(float(abs(resid)), st.std_error([1.0, -B_alt]))


def to_record(obj) -> dict:
    """JSON-ready dict; complex values become ``[re, im]`` and infinities ``None``."""
    return {k: _jsonable(v) for k, v in asdict(obj).items()}


def _jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v
