"""Catalog of memoryless distortion functions.

Every entry maps scalars (or arrays, element-wise) to the same shape.
Complex derivatives are Wirtinger derivatives,
``dU/dx = (dU/dRe{x} - j dU/dIm{x}) / 2``.
"""
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .errors import (
    DomainMismatch,
    InvalidVariance,
    NoClosedForm,
    NoConvergence,
    NoDerivative,
    ParseError,
    ValidationError,
)

REAL, COMPLEX, ANY = "real", "complex", "any"
MAX_BITS = 12


def _check_bits(bits) -> int:
    if int(bits) != bits or not 1 <= bits <= MAX_BITS:
        raise ValidationError(f"bits must be an integer in 1..{MAX_BITS}, got {bits}")
    return int(bits)


@dataclass(frozen=True)
class Nonlinearity:
    """Base class; concrete entries override :meth:`_eval` and friends."""

    name = "nonlinearity"
    domain = ANY
    has_derivative = False
    has_closed_form_gain = False
    has_closed_form_power = False
    satisfies_conditional_mean = False

    def __call__(self, x):
        return apply(self, x)

    def _eval(self, x):
        raise NotImplementedError

    def _derivative(self, x):
        raise NoDerivative(f"{self.name} exposes no derivative")

    def _closed_form(self, C_x, real):
        raise NoClosedForm(f"{self.name} has no closed-form gain")

    def _output_power(self, C_x, real):
        raise NoClosedForm(f"{self.name} has no closed-form output power")

    def spec(self) -> str:
        params = self.params()
        if not params:
            return self.name
        body = ",".join(f"{k}={_fmt(v)}" for k, v in params.items())
        return f"{self.name}({body})"

    def params(self) -> dict:
        return {}


def _fmt(v):
    if isinstance(v, complex):
        return repr(v).strip("()")
    return repr(v)


def _is_complex_input(x) -> bool:
    return np.iscomplexobj(x)


def _check_domain(U: Nonlinearity, x):
    cplx = _is_complex_input(x)
    if U.domain == REAL and cplx:
        raise DomainMismatch(f"{U.name} is real-valued but got complex input")
    if U.domain == COMPLEX and not cplx:
        raise DomainMismatch(f"{U.name} is complex-valued but got real input")


def apply(U: Nonlinearity, x):
    """Element-wise evaluation of ``U``; scalars in, scalars out."""
    arr = np.asarray(x)
    _check_domain(U, arr)
    out = U._eval(arr)
    return out[()] if np.ndim(out) == 0 else out


def derivative(U: Nonlinearity, x):
    arr = np.asarray(x)
    if not U.has_derivative:
        raise NoDerivative(f"{U.name} exposes no derivative")
    _check_domain(U, arr)
    out = U._derivative(arr)
    out = np.broadcast_to(out, arr.shape).astype(complex if U.domain != REAL else float)
    return out[()] if np.ndim(out) == 0 else out


def closed_form_gain(U: Nonlinearity, C_x: float, real: bool = None) -> complex:
    """Exact Bussgang gain for a Gaussian input of power ``C_x``.

    ``real`` selects the real-input convention ``x ~ N(0, C_x)`` for entries
    accepting both domains; it defaults to the entry's own domain.
    """
    if not C_x > 0:
        raise InvalidVariance("C_x must be positive")
    if not U.has_closed_form_gain:
        raise NoClosedForm(f"{U.name} has no closed-form gain")
    if real is None:
        real = U.domain == REAL
    return U._closed_form(float(C_x), bool(real))


def closed_form_output_power(U: Nonlinearity, C_x: float, real: bool = None) -> float:
    """Exact ``E{|U(x)|^2}`` for a Gaussian input of power ``C_x``."""
    if not C_x > 0:
        raise InvalidVariance("C_x must be positive")
    if not (U.has_closed_form_power and U.has_closed_form_gain):
        raise NoClosedForm(f"{U.name} has no closed-form output power")
    if real is None:
        real = U.domain == REAL
    return float(U._output_power(float(C_x), bool(real)))


@dataclass(frozen=True)
class Identity(Nonlinearity):
    name = "identity"
    has_derivative = True
    has_closed_form_gain = True
    has_closed_form_power = True
    satisfies_conditional_mean = True

    def _eval(self, x):
        return x.copy()

    def _derivative(self, x):
        return 1.0

    def _closed_form(self, C_x, real):
        return 1.0 if real else 1.0 + 0j

    def _output_power(self, C_x, real):
        return C_x


@dataclass(frozen=True)
class Linear(Nonlinearity):
    a: complex = 1.0
    name = "linear"
    has_derivative = True
    has_closed_form_gain = True
    has_closed_form_power = True

    def _eval(self, x):
        return self.a * x

    def _derivative(self, x):
        return self.a

    def _closed_form(self, C_x, real):
        return self.a

    def _output_power(self, C_x, real):
        return abs(self.a) ** 2 * C_x

    def params(self):
        return {"a": self.a}


@dataclass(frozen=True)
class Sign(Nonlinearity):
    """One-bit quantizer ``sgn(x)`` on real inputs (``sgn(0) = 1``)."""

    name = "sign"
    domain = REAL
    has_closed_form_gain = True
    has_closed_form_power = True

    def _eval(self, x):
        return np.where(x >= 0, 1.0, -1.0)

    def _closed_form(self, C_x, real):
        return math.sqrt(2.0 / (math.pi * C_x))

    def _output_power(self, C_x, real):
        return 1.0


@dataclass(frozen=True)
class OneBit(Nonlinearity):
    """Complex one-bit quantizer: ``sgn`` on the real and imaginary parts."""

    name = "one_bit"
    domain = COMPLEX

    def _eval(self, x):
        return np.where(x.real >= 0, 1.0, -1.0) + 1j * np.where(x.imag >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class ThirdOrder(Nonlinearity):
    name = "third_order"
    domain = COMPLEX
    has_derivative = True
    has_closed_form_gain = True
    has_closed_form_power = True

    def _eval(self, x):
        return (x.real**2 + x.imag**2) * x

    def _derivative(self, x):
        return 2.0 * (x.real**2 + x.imag**2)

    def _closed_form(self, C_x, real):
        return 2.0 * C_x + 0j

    def _output_power(self, C_x, real):
        # E{|x|^6} = 3! C_x^3 for circular complex Gaussian x
        return 6.0 * C_x**3


@dataclass(frozen=True)
class SoftClipper(Nonlinearity):
    """Envelope limiter: identity inside ``|x| <= amax``, else ``amax x/|x|``."""

    amax: float = 1.0
    name = "soft_clipper"
    domain = COMPLEX
    has_derivative = True

    def __post_init__(self):
        if not self.amax > 0:
            raise ValidationError("amax must be positive")

    def _eval(self, x):
        r = np.abs(x)
        outside = r > self.amax
        scale = np.ones_like(r)
        np.divide(self.amax, r, out=scale, where=outside)
        return x * scale

    def _derivative(self, x):
        r = np.abs(x)
        out = np.ones_like(r)
        np.divide(0.5 * self.amax, r, out=out, where=r > self.amax)
        return out

    def params(self):
        return {"amax": self.amax}


@dataclass(frozen=True)
class IQImbalance(Nonlinearity):
    """Widely linear map ``alpha x + beta conj(x)``."""

    alpha: complex = 1.0
    beta: complex = 0.0
    name = "iq_imbalance"
    domain = COMPLEX
    has_derivative = True
    has_closed_form_gain = True
    has_closed_form_power = True

    def _eval(self, x):
        return self.alpha * x + self.beta * np.conj(x)

    def _derivative(self, x):
        return complex(self.alpha)

    def _closed_form(self, C_x, real):
        # conj(x) x* has zero mean for circular x
        return complex(self.alpha)

    def _output_power(self, C_x, real):
        return (abs(self.alpha) ** 2 + abs(self.beta) ** 2) * C_x

    def params(self):
        return {"alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class ScalarQuantizer(Nonlinearity):
    """Staircase quantizer given by ascending ``thresholds`` and ``levels``.

    ``levels[k]`` is the output on ``[thresholds[k-1], thresholds[k])``, with
    ``len(levels) == len(thresholds) + 1``. Complex inputs are quantized per
    real component.
    """

    thresholds: tuple = field(default=(), repr=False)
    levels: tuple = field(default=(), repr=False)
    domain: str = COMPLEX
    name = "quantizer"

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        v = np.asarray(self.levels, dtype=float)
        if len(v) != len(t) + 1:
            raise ValueError("need exactly one more level than thresholds")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(v) < 0):
            raise ValueError("thresholds must increase and levels must not decrease")
        if self.domain not in (REAL, COMPLEX):
            raise ValueError("domain must be 'real' or 'complex'")

    def quantize(self, a: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.thresholds), a, side="right")
        return np.asarray(self.levels)[idx]

    def _eval(self, x):
        if np.iscomplexobj(x):
            return self.quantize(x.real) + 1j * self.quantize(x.imag)
        return self.quantize(x)

    def component_variance(self, C_x: float, real: bool) -> float:
        return C_x if real else C_x / 2.0

    def gain_by_integration(self, C_x: float, real: bool = None) -> float:
        """Exact gain for Gaussian input: ``sum_k level_k (phi(t_{k-1}) - phi(t_k))``
        with ``phi`` the per-component Gaussian density."""
        if real is None:
            real = self.domain == REAL
        s = math.sqrt(self.component_variance(C_x, real))
        t = np.concatenate(([-np.inf], np.asarray(self.thresholds) / s, [np.inf]))
        pdf = np.exp(-0.5 * t**2) / (s * math.sqrt(2 * math.pi))
        return float(np.sum(np.asarray(self.levels) * (pdf[:-1] - pdf[1:])))


@dataclass(frozen=True)
class UniformQuantizer(ScalarQuantizer):
    """Mid-rise ``bits``-bit quantizer with step ``step``, saturating at
    ``+-2**(bits-1) * step``; outputs are the cell midpoints."""

    bits: int = 1
    step: float = 1.0
    name = "uniform_quantizer"

    def __init__(self, bits: int, step: float, domain: str = COMPLEX):
        bits = _check_bits(bits)
        if not step > 0:
            raise ValidationError("step must be positive")
        half = 2 ** (bits - 1)
        k = np.arange(-half, half)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "step", float(step))
        object.__setattr__(self, "thresholds", tuple((np.arange(-half + 1, half) * float(step)).tolist()))
        object.__setattr__(self, "levels", tuple(((k + 0.5) * float(step)).tolist()))
        object.__setattr__(self, "domain", domain)
        ScalarQuantizer.__post_init__(self)

    def quantize(self, a):
        half = 2 ** (self.bits - 1)
        k = np.clip(np.floor(a * (1.0 / self.step)), -half, half - 1)
        return (k + 0.5) * self.step

    def params(self):
        return {"bits": self.bits, "step": self.step}


def three_sigma_step(bits: int, C_x: float, real: bool = False) -> float:
    """Step covering +-3 per-component standard deviations: ``6 sigma / 2**bits``."""
    sigma = math.sqrt(C_x if real else C_x / 2.0)
    return 6.0 * sigma / 2 ** _check_bits(bits)


@dataclass(frozen=True)
class LloydMaxQuantizer(ScalarQuantizer):
    """Quantizer whose levels are the Gaussian conditional means of its cells."""

    bits: int = 1
    variance: float = 1.0
    distortion: float = 0.0
    name = "lloyd_max_quantizer"
    has_closed_form_gain = True
    satisfies_conditional_mean = True

    def __init__(self, bits, variance, thresholds, levels, distortion, domain=COMPLEX):
        object.__setattr__(self, "bits", int(bits))
        object.__setattr__(self, "variance", float(variance))
        object.__setattr__(self, "thresholds", tuple(np.asarray(thresholds, dtype=float).tolist()))
        object.__setattr__(self, "levels", tuple(np.asarray(levels, dtype=float).tolist()))
        object.__setattr__(self, "distortion", float(distortion))
        object.__setattr__(self, "domain", domain)
        ScalarQuantizer.__post_init__(self)

    @property
    def beta(self) -> float:
        """Normalized mean squared error ``E{|x - Q(x)|^2} / C_x`` at the
        design variance."""
        comps = 1 if self.domain == REAL else 2
        return comps * self.distortion / self.variance

    def _closed_form(self, C_x, real):
        if real != (self.domain == REAL) or not math.isclose(C_x, self.variance, rel_tol=1e-12):
            raise NoClosedForm(
                f"Lloyd-Max gain 1 - beta only holds at the design input "
                f"(variance {self.variance}, domain {self.domain})"
            )
        return 1.0 - self.beta

    def params(self):
        return {"bits": self.bits, "variance": self.variance}


def _cell_means(a, b, s):
    """Mean and probability of N(0, s^2) on each cell ``[a_k, b_k]`` (a_k >= 0)."""
    za, zb = a / s, b / s
    prob = 0.5 * (special.erfc(za / math.sqrt(2)) - special.erfc(zb / math.sqrt(2)))
    dens = (np.exp(-0.5 * za**2) - np.exp(-0.5 * zb**2)) / math.sqrt(2 * math.pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = s * dens / prob
    mid = 0.5 * (a + np.where(np.isfinite(b), b, a + s))
    return np.where(prob > 0, mean, mid), prob


def _cells(inner):
    return np.concatenate(([0.0], inner)), np.concatenate((inner, [np.inf]))


def _newton_step(inner, s):
    """Newton update for the boundary fixed point ``t_i = (mu_{i-1} + mu_i) / 2``.

    Cell means move with their edges as ``dmu/da = p(a)(mu - a)/P`` and
    ``dmu/db = p(b)(b - mu)/P``, so the Jacobian is tridiagonal.
    """
    lo, hi = _cells(inner)
    mu, prob = _cell_means(lo, hi, s)
    pdf = lambda t: np.exp(-0.5 * (t / s) ** 2) / (s * math.sqrt(2 * math.pi))
    d_lo = pdf(lo) * (mu - lo) / prob
    d_hi = np.where(np.isfinite(hi), pdf(np.where(np.isfinite(hi), hi, 0.0)) * (hi - np.where(np.isfinite(hi), mu, 0.0)) / prob, 0.0)
    resid = inner - 0.5 * (mu[:-1] + mu[1:])
    n = len(inner)
    banded = np.zeros((3, n))
    banded[1] = 1.0 - 0.5 * (d_hi[:-1] + d_lo[1:])
    banded[0, 1:] = -0.5 * d_hi[1:-1]
    banded[2, :-1] = -0.5 * d_lo[1:-1]
    step = linalg.solve_banded((1, 1), banded, resid)
    return inner - step


def quantizer_design_lloyd_max(
    bits: int,
    variance: float,
    max_iter: int = 200,
    tol: float = 1e-10,
    domain: str = COMPLEX,
) -> LloydMaxQuantizer:
    """Lloyd-Max quantizer for a Gaussian input of power ``variance``.

    Complex inputs are quantized per component, each ``N(0, variance/2)``;
    real inputs are ``N(0, variance)``. Starts from the high-resolution
    compander (point density proportional to ``p^(1/3)``), runs a few plain
    Lloyd sweeps and then Newton steps on the same fixed point, stopping once
    no level moves by more than ``tol`` component standard deviations.
    """
    bits = _check_bits(bits)
    if not variance > 0:
        raise InvalidVariance("variance must be positive")
    s = math.sqrt(variance if domain == REAL else variance / 2.0)
    half = 2 ** (bits - 1)
    # positive half only; the design is symmetric about 0
    k = np.arange(1, half)
    inner = math.sqrt(3.0) * s * special.ndtri(0.5 + k / (2.0 * half))
    levels, _ = _cell_means(*_cells(inner), s)
    for it in range(max_iter):
        if it < 5 or len(inner) == 0:
            inner = 0.5 * (levels[:-1] + levels[1:])
        else:
            candidate = _newton_step(inner, s)
            ok = np.all(np.diff(candidate) > 0) and (len(candidate) == 0 or candidate[0] > 0)
            inner = candidate if ok else 0.5 * (levels[:-1] + levels[1:])
        new_levels, _ = _cell_means(*_cells(inner), s)
        moved = np.max(np.abs(new_levels - levels))
        levels = new_levels
        if moved < tol * s:
            break
    else:
        raise NoConvergence(f"Lloyd-Max did not converge in {max_iter} iterations")

    # levels are the exact conditional means of the final cells
    levels, prob = _cell_means(*_cells(inner), s)
    distortion = s**2 - 2.0 * float(np.sum(levels**2 * prob))
    thresholds = np.concatenate((-inner[::-1], [0.0], inner))
    all_levels = np.concatenate((-levels[::-1], levels))
    return LloydMaxQuantizer(bits, variance, thresholds, all_levels, distortion, domain)


def identity() -> Identity:
    return Identity()


def linear(a=1.0) -> Linear:
    return Linear(a)


def sign() -> Sign:
    return Sign()


def one_bit() -> OneBit:
    return OneBit()


def third_order() -> ThirdOrder:
    return ThirdOrder()


def soft_clipper(amax: float = 1.0) -> SoftClipper:
    return SoftClipper(float(amax))


def iq_imbalance(alpha=1.0, beta=0.0) -> IQImbalance:
    return IQImbalance(complex(alpha), complex(beta))


def uniform_quantizer(bits: int, step: float = None, input_power: float = None, domain: str = COMPLEX):
    """Uniform mid-rise quantizer; ``step`` defaults to :func:`three_sigma_step`
    of ``input_power``."""
    if step is None:
        if input_power is None:
            raise ValueError("uniform_quantizer needs step or input_power")
        step = three_sigma_step(bits, input_power, real=domain == REAL)
    return UniformQuantizer(bits, step, domain)


def lloyd_max_quantizer(bits: int, variance: float = 1.0, domain: str = COMPLEX):
    return quantizer_design_lloyd_max(bits, variance, domain=domain)


_SPEC_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def _parse_value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ParseError(f"cannot parse parameter value {text!r}") from None


_PARAMS = {
    "identity": (),
    "linear": ("a",),
    "sign": (),
    "one_bit": (),
    "third_order": (),
    "soft_clipper": ("amax",),
    "iq_imbalance": ("alpha", "beta"),
    "uniform_quantizer": ("bits", "step", "domain"),
    "lloyd_max_quantizer": ("bits", "variance", "domain"),
}


def parse_nonlinearity(spec: str, input_power: float = 1.0) -> Nonlinearity:
    """Build a catalog entry from ``name(param=value,...)``.

    ``input_power`` fills the defaults that depend on the input (quantizer
    step and Lloyd-Max design variance).
    """
    m = _SPEC_RE.match(spec or "")
    if not m:
        raise ParseError(f"malformed non-linearity spec {spec!r}")
    name, body = m.group(1), m.group(2)
    if name not in _PARAMS:
        raise ParseError(f"unknown non-linearity {name!r}; known: {', '.join(_PARAMS)}")
    kwargs = {}
    if body and body.strip():
        for part in body.split(","):
            if "=" not in part:
                raise ParseError(f"expected key=value in {spec!r}, got {part.strip()!r}")
            key, val = (p.strip() for p in part.split("=", 1))
            if key not in _PARAMS[name]:
                raise ParseError(f"{name} has no parameter {key!r}")
            kwargs[key] = val if key == "domain" else _parse_value(val)
    try:
        if name == "uniform_quantizer":
            if "bits" not in kwargs:
                raise ParseError("uniform_quantizer requires bits")
            kwargs.setdefault("input_power", input_power)
            return uniform_quantizer(**kwargs)
        if name == "lloyd_max_quantizer":
            if "bits" not in kwargs:
                raise ParseError("lloyd_max_quantizer requires bits")
            kwargs.setdefault("variance", input_power)
            return lloyd_max_quantizer(**kwargs)
        return globals()[name](**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"invalid parameters for {name}: {exc}") from None
