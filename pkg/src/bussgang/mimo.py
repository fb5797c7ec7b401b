"""MIMO Bussgang decomposition ``z = U(x) = B x + eta``.

Vectors are rows of ``(n, M)`` arrays. A distortion is either a single
:class:`~bussgang.nonlinearity.Nonlinearity` (applied to every branch), an
:class:`ElementwiseDistortion` with one entry per branch, or any callable
mapping ``(n, M)`` arrays to ``(n, M)`` arrays (crosstalk allowed).
"""
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .errors import DomainMismatch, JointCovarianceNotPSD, NotHermitian, ValidationError
from .linalg import (
    RANK_TOL,
    as_matrix,
    eig_hermitian,
    hermitian_factor,
    inverse_or_pinv,
    max_abs,
)
from .nonlinearity import REAL, Nonlinearity, UniformQuantizer, apply
from .sampling import SignalSource, draw_complex_gaussian_vector
from .scalar import gain_correlation

MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class ElementwiseDistortion:
    """No crosstalk: branch ``m`` sees only ``x_m``."""

    per_antenna: tuple

    def __post_init__(self):
        per = tuple(self.per_antenna)
        if not per:
            raise ValueError("need at least one branch")
        for U in per:
            if not isinstance(U, Nonlinearity):
                raise TypeError(f"branch distortion must be a Nonlinearity, got {type(U).__name__}")
            if U.domain == REAL:
                raise DomainMismatch(f"{U.name} is real-valued; MIMO branches are complex")
        object.__setattr__(self, "per_antenna", per)

    @classmethod
    def repeat(cls, U: Nonlinearity, M: int) -> "ElementwiseDistortion":
        return cls((U,) * M)

    def __len__(self):
        return len(self.per_antenna)

    def __call__(self, x):
        if x.shape[1] != len(self):
            raise ValueError(f"distortion has {len(self)} branches, input has {x.shape[1]}")
        first = self.per_antenna[0]
        if all(U == first for U in self.per_antenna):
            return apply(first, x)
        if all(type(U) is UniformQuantizer and U.bits == first.bits for U in self.per_antenna):
            return self._uniform(x)
        out = np.empty(x.shape, dtype=np.result_type(x.dtype, complex))
        for m, U in enumerate(self.per_antenna):
            out[:, m] = apply(U, x[:, m])
        return out

    def _uniform(self, x):
        # mid-rise uniform quantizers differing only in step: quantize all
        # real and imaginary parts at once (same arithmetic as quantize())
        steps = np.repeat([U.step for U in self.per_antenna], 2)
        half = 2 ** (self.per_antenna[0].bits - 1)
        q = np.ascontiguousarray(x, dtype=complex).view(float) * (1.0 / steps)
        np.floor(q, out=q)
        np.clip(q, -half, half - 1, out=q)
        q += 0.5
        q *= steps
        return q.view(complex)


def as_vector_map(dist, M: int):
    if isinstance(dist, Nonlinearity):
        dist = ElementwiseDistortion.repeat(dist, M)
    if isinstance(dist, ElementwiseDistortion) and len(dist) != M:
        raise ValueError(f"distortion has {len(dist)} branches, input dimension is {M}")
    if not callable(dist):
        raise TypeError("distortion must be a Nonlinearity, ElementwiseDistortion or callable")
    return dist


def _check_n(n):
    if int(n) < MIN_SAMPLES:
        raise ValidationError(f"need at least {MIN_SAMPLES} samples, got {n}")
    return int(n)


def _gaussian_draw(C_x):
    L = hermitian_factor(C_x)
    return lambda sub, size: draw_complex_gaussian_vector(sub, None, size, factor=L)


def _offdiag(A):
    return A[~np.eye(A.shape[0], dtype=bool)]


@dataclass(frozen=True)
class GainMatrix:
    B: np.ndarray
    std_error: np.ndarray
    used_pseudo_inverse: bool

    @property
    def diagonality_defect(self) -> float:
        off = _offdiag(self.B)
        return float(np.max(np.abs(off))) if off.size else 0.0


@dataclass(frozen=True)
class MimoDiagnostics:
    diagonality_defect: float  # max |B_ij|, i != j
    diagonality_std_error: float  # max standard error over off-diagonal B_ij
    psd_margin: float  # min eigenvalue of C_eta
    eps_mc: float  # max entrywise standard error of C_eta
    orthogonality_residual: float  # max |E^{eta x^H}|
    orthogonality_std_error: float
    used_pseudo_inverse: bool


@dataclass(frozen=True)
class MimoDecomposition:
    B: np.ndarray
    C_x: np.ndarray
    C_z_hat: np.ndarray
    C_zx_hat: np.ndarray
    C_eta: np.ndarray
    diagnostics: MimoDiagnostics
    B_std_error: np.ndarray = field(repr=False, default=None)
    C_eta_std_error: np.ndarray = field(repr=False, default=None)
    n_samples: int = 0
    method: str = "gaussian"

    def correlation_coefficients(self) -> np.ndarray:
        """``C_eta[i, j] / sqrt(C_eta[i, i] C_eta[j, j])``; NaN where a
        diagonal entry is not positive."""
        d = np.real(np.diag(self.C_eta))
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.sqrt(np.where(d > 0, d, np.nan))
            return self.C_eta / np.outer(scale, scale)


def _build(m: _engine.Moments, method: str) -> MimoDecomposition:
    w, _ = eig_hermitian(m.C_eta)
    off_se = _offdiag(m.B_se)
    diag = MimoDiagnostics(
        diagonality_defect=float(np.max(np.abs(_offdiag(m.B)))) if off_se.size else 0.0,
        diagonality_std_error=float(np.max(off_se)) if off_se.size else 0.0,
        psd_margin=float(w[-1]),
        eps_mc=float(np.max(m.C_eta_se)),
        orthogonality_residual=max_abs(m.residual),
        orthogonality_std_error=float(np.max(m.residual_se)),
        used_pseudo_inverse=bool(m.used_pinv),
    )
    return MimoDecomposition(
        B=m.B,
        C_x=m.C_x,
        C_z_hat=m.C_z,
        C_zx_hat=m.C_zx,
        C_eta=m.C_eta,
        diagnostics=diag,
        B_std_error=m.B_se,
        C_eta_std_error=m.C_eta_se,
        n_samples=m.n,
        method=method,
    )


def gain_matrix(dist, C_x, stream, n: int) -> GainMatrix:
    """``B = C_zx C_x^{-1}`` for ``x ~ CN(0, C_x)``; pseudo-inverse when
    ``C_x`` is rank deficient."""
    C_x = as_matrix(C_x)
    U = as_vector_map(dist, C_x.shape[0])
    B, se, used = _engine.gain_only(_gaussian_draw(C_x), U, C_x, stream, _check_n(n))
    return GainMatrix(B, se, used)


def elementwise_gain_diag(dist, C_x, stream, n: int) -> np.ndarray:
    """Per-branch scalar gains ``d_m = E{U_m(x_m) x_m*} / E{|x_m|^2}``."""
    C_x = as_matrix(C_x)
    M = C_x.shape[0]
    if isinstance(dist, Nonlinearity):
        dist = ElementwiseDistortion.repeat(dist, M)
    if not isinstance(dist, ElementwiseDistortion):
        raise TypeError("elementwise_gain_diag needs per-branch non-linearities")
    if len(dist) != M:
        raise ValueError(f"distortion has {len(dist)} branches, input dimension is {M}")
    powers = np.real(np.diag(C_x))
    if np.any(powers <= 0):
        raise ValidationError("diagonal of C_x must be positive")
    return np.array(
        [
            complex(gain_correlation(U, powers[m], stream.child(m), n, real=False).value)
            for m, U in enumerate(dist.per_antenna)
        ]
    )


def distortion_correlation(dist, C_x, stream, n: int) -> MimoDecomposition:
    """Full decomposition for Gaussian input, with
    ``C_eta = C_z - B C_x B^H``."""
    C_x = as_matrix(C_x)
    U = as_vector_map(dist, C_x.shape[0])
    m = _engine.estimate(_gaussian_draw(C_x), U, stream, _check_n(n), C_x=C_x)
    return _build(m, "gaussian")


def distortion_correlations(dists, C_x, stream, n: int, lean: bool = False) -> list:
    """:func:`distortion_correlation` for several distortions evaluated on one
    shared input sample (common random numbers).

    With ``lean=True`` only ``B``, ``C_eta``, ``psd_margin`` and ``eps_mc`` are
    computed; the remaining estimates and diagnostics are NaN.
    """
    C_x = as_matrix(C_x)
    maps = [as_vector_map(d, C_x.shape[0]) for d in dists]
    ms = _engine.estimate_many(_gaussian_draw(C_x), maps, stream, _check_n(n), C_x=C_x, lean=lean)
    return [_build(m, "gaussian") for m in ms]


def decompose_general(vector_map, source: SignalSource, stream, n: int) -> MimoDecomposition:
    """Linear-MMSE decomposition for any input distribution.

    Uses the sample correlation of ``x`` and its pseudo-inverse, so
    ``E^{eta x^H}`` vanishes on the sample regardless of Gaussianity.
    """
    U = as_vector_map(vector_map, source.dim)
    m = _engine.estimate(source.draw, U, stream, _check_n(n), C_x=None)
    return _build(m, "general")


@dataclass(frozen=True)
class MimoTheoremCheck:
    lhs: np.ndarray  # C_zy estimate
    rhs: np.ndarray  # C_zx C_x^{-1} C_xy estimate
    max_dev: float
    std_error: np.ndarray
    within: bool


def _joint_covariance(C_x, C_y, C_xy):
    C_x, C_y, C_xy = as_matrix(C_x), as_matrix(C_y), as_matrix(C_xy)
    M = C_x.shape[0]
    if C_y.shape != (M, M) or C_xy.shape != (M, M):
        raise ValueError("C_x, C_y and C_xy must all be M x M")
    K = np.block([[C_x, C_xy], [C_xy.conj().T, C_y]])
    try:
        w, _ = eig_hermitian(K)
    except NotHermitian as exc:
        raise JointCovarianceNotPSD(str(exc)) from None
    if w[-1] < -RANK_TOL * max(w[0], 0.0) * 100:
        raise JointCovarianceNotPSD(f"joint covariance has eigenvalue {w[-1]:.3e}")
    return K


def verify_mimo_theorem(dist, C_x, C_y, C_xy, stream, n: int) -> MimoTheoremCheck:
    """Compare ``E{z y^H}`` with ``C_zx C_x^{-1} C_xy`` for jointly Gaussian
    ``(x, y)``; ``dist`` acts on ``x`` only."""
    K = _joint_covariance(C_x, C_y, C_xy)
    M = K.shape[0] // 2
    n = _check_n(n)
    C_x = K[:M, :M]
    C_yx = K[M:, :M]
    U = as_vector_map(dist, M)
    draw = _gaussian_draw(K)
    W, _ = inverse_or_pinv(C_x)

    def first(sub, size):
        v = draw(sub, size)
        x, y = v[:, :M], v[:, M:]
        z = U(x)
        return z.T @ np.conj(y), z.T @ np.conj(x), x.T @ np.conj(y)

    s_zy, s_zx, s_xy = _engine.reduce_blocks(stream, n, first)
    lhs = s_zy / n
    B = (s_zx / n) @ W
    rhs = B @ (s_xy / n)

    # influence of C_zy - C_zx W C_xy: z eps^H - (B x) y^H, eps = y - C_yx W x
    def second(sub, size):
        v = draw(sub, size)
        x, y = v[:, :M], v[:, M:]
        a, b = U(x), y - x @ (C_yx @ W).T
        c, d = x @ B.T, y
        s1 = a.T @ np.conj(b) - c.T @ np.conj(d)
        s2 = (
            (np.abs(a) ** 2).T @ (np.abs(b) ** 2)
            + (np.abs(c) ** 2).T @ (np.abs(d) ** 2)
            - 2.0 * np.real((a * np.conj(c)).T @ (np.conj(b) * d))
        )
        return s1, s2

    s1, s2 = _engine.reduce_blocks(stream, n, second)
    se = _engine.entry_std_error(s1, s2, n)
    dev = np.abs(lhs - rhs)
    return MimoTheoremCheck(lhs, rhs, float(np.max(dev)), se, bool(np.all(dev < 4 * se + 1e-12)))
