"""Seedable, splittable signal generation.

Conventions: ``N(0, v)`` is real with variance ``v``; ``CN(0, C)`` has
independent real and imaginary parts, each ``N(0, C/2)``, and zero
pseudo-variance. Vector draws are returned as ``(n, M)`` arrays, one sample
per row.

Streams are keyed by ``(seed, stream_id, *path)`` through
:class:`numpy.random.SeedSequence` and drive a Philox counter-based
generator, so any substream can be materialized without touching the others.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCorrelation, InvalidPower, InvalidVariance, ValidationError
from .linalg import as_matrix, hermitian_factor

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    seed: int = 42
    stream_id: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(v) <= _MASK64:
                raise ValueError("seed, stream_id and path entries must be 64-bit unsigned")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream_id), *map(int, self.path))
        )
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, (*self.path, int(index)))

    def with_id(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id, self.path)


def _gen(stream):
    if isinstance(stream, np.random.Generator):
        return stream
    return stream.generator()


def _count(n) -> int:
    n = int(n)
    if n < 0:
        raise ValidationError("sample count must be nonnegative")
    return n


def standard_complex_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) entries: real and imaginary parts i.i.d. N(0, 1/2)."""
    w = gen.standard_normal((*shape, 2))
    w *= np.sqrt(0.5)
    return w.view(complex)[..., 0]


def draw_real_gaussian(stream, variance: float, n: int) -> np.ndarray:
    if not variance > 0:
        raise InvalidVariance(f"variance must be positive, got {variance}")
    return np.sqrt(variance) * _gen(stream).standard_normal(_count(n))


def draw_complex_gaussian(stream, variance: float, n: int) -> np.ndarray:
    if not variance > 0:
        raise InvalidVariance(f"variance must be positive, got {variance}")
    factor = np.array([[np.sqrt(variance)]], dtype=complex)
    return draw_complex_gaussian_vector(stream, None, n, factor=factor)[:, 0]


def draw_complex_gaussian_vector(stream, C_x, n: int, factor=None) -> np.ndarray:
    """``n`` draws of ``x = L w`` with ``L L^H = C_x`` and ``w ~ CN(0, I)``.

    ``factor`` may pass a precomputed ``L`` to skip the factorization.
    """
    L = hermitian_factor(C_x) if factor is None else np.asarray(factor)
    w = standard_complex_normal(_gen(stream), (_count(n), L.shape[0]))
    return w @ L.T


def draw_jointly_gaussian_pair(stream, C_x: float, C_y: float, rho, n: int, real: bool = False):
    """Pairs ``(x, y)`` with ``E{x y*} = rho sqrt(C_x C_y)``.

    ``y = conj(rho) sqrt(C_y/C_x) x + sqrt(C_y (1 - |rho|^2)) w`` with ``w``
    independent of ``x``. With ``real=True`` both are real Gaussian and
    ``rho`` must be real.
    """
    if not (C_x > 0 and C_y > 0):
        raise InvalidVariance("C_x and C_y must be positive")
    rho = complex(rho)
    if abs(rho) > 1.0 + 1e-12:
        raise InvalidCorrelation(f"|rho| must be <= 1, got {abs(rho)}")
    if real and rho.imag != 0:
        raise InvalidCorrelation("rho must be real for real-valued pairs")
    n = _count(n)
    gen = _gen(stream)
    if real:
        x = np.sqrt(C_x) * gen.standard_normal(n)
        w = gen.standard_normal(n)
        r = rho.real
    else:
        x = np.sqrt(C_x) * standard_complex_normal(gen, (n,))
        w = standard_complex_normal(gen, (n,))
        r = np.conj(rho)
    resid = max(1.0 - abs(rho) ** 2, 0.0)
    y = r * np.sqrt(C_y / C_x) * x + np.sqrt(C_y * resid) * w
    return x, y


def draw_qpsk(stream, power: float, n: int) -> np.ndarray:
    if not power > 0:
        raise InvalidPower(f"power must be positive, got {power}")
    bits = _gen(stream).integers(0, 2, size=(_count(n), 2))
    a = np.sqrt(power / 2.0)
    return a * ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1]))


@dataclass(frozen=True)
class SignalSource:
    """Input distribution for the Monte Carlo engines.

    ``kind`` is one of ``real_gaussian``, ``complex_gaussian``,
    ``complex_gaussian_vector``, ``qpsk`` or ``channel_product``. For
    ``channel_product`` the draw is ``x = H s`` with a fixed ``channel`` and
    ``s`` i.i.d. per entry, either ``qpsk`` or ``gaussian`` with unit power.
    """

    kind: str
    power: float = 1.0
    C_x: object = None
    channel: object = None
    symbols: str = "qpsk"

    def __post_init__(self):
        kinds = {"real_gaussian", "complex_gaussian", "complex_gaussian_vector", "qpsk", "channel_product"}
        if self.kind not in kinds:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "complex_gaussian_vector":
            hermitian_factor(self.C_x)
        elif self.kind == "channel_product":
            H = as_matrix(self.channel)
            object.__setattr__(self, "channel", H)
            if self.symbols not in ("qpsk", "gaussian"):
                raise ValueError("symbols must be 'qpsk' or 'gaussian'")
        elif not self.power > 0:
            raise InvalidPower(f"power must be positive, got {self.power}")

    @property
    def dim(self) -> int:
        if self.kind == "complex_gaussian_vector":
            return as_matrix(self.C_x).shape[0]
        if self.kind == "channel_product":
            return self.channel.shape[0]
        return 1

    @property
    def is_gaussian(self) -> bool:
        if self.kind == "channel_product":
            return self.symbols == "gaussian"
        return self.kind != "qpsk"

    @property
    def is_real(self) -> bool:
        return self.kind == "real_gaussian"

    def correlation(self) -> np.ndarray:
        """Population correlation matrix ``E{x x^H}``."""
        if self.kind == "complex_gaussian_vector":
            return as_matrix(self.C_x)
        if self.kind == "channel_product":
            return self.channel @ self.channel.conj().T
        return np.array([[self.power]], dtype=complex)

    def draw(self, stream, n: int) -> np.ndarray:
        """``(n, M)`` array of samples."""
        if self.kind == "real_gaussian":
            return draw_real_gaussian(stream, self.power, n)[:, None]
        if self.kind == "complex_gaussian":
            return draw_complex_gaussian(stream, self.power, n)[:, None]
        if self.kind == "qpsk":
            return draw_qpsk(stream, self.power, n)[:, None]
        if self.kind == "complex_gaussian_vector":
            return draw_complex_gaussian_vector(stream, self.C_x, n)
        H = self.channel
        gen = _gen(stream)
        k = H.shape[1]
        if self.symbols == "qpsk":
            s = draw_qpsk(gen, 1.0, n * k).reshape(n, k)
        else:
            s = standard_complex_normal(gen, (_count(n), k))
        return s @ H.T
