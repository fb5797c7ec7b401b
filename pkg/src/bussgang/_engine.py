"""Block-parallel Monte Carlo accumulation shared by the scalar and MIMO engines.

Samples are produced in fixed-size blocks, block ``i`` drawn from
``stream.child(i)``. Per-block sums are reduced in block order, so results
are bit-identical for any worker count.
"""
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import hermitize, inverse_or_pinv

BLOCK_SIZE = 1 << 12  # small enough for the working set to stay in cache
THREADS_ENV = "BUSSGANG_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def block_sizes(n: int, block: int = BLOCK_SIZE) -> list:
    n = int(n)
    full, rest = divmod(n, block)
    return [block] * full + ([rest] if rest else [])


def _jobs(stream, n):
    jobs = [(stream.child(i), size) for i, size in enumerate(block_sizes(n))]
    if not jobs:
        raise ValueError("need at least one sample")
    return jobs


_local = threading.local()


def _in_worker(fn):
    def run(item):
        _local.nested = True
        try:
            return fn(item)
        finally:
            _local.nested = False

    return run


def map_ordered(fn, items) -> list:
    """``[fn(item) for item in items]``, spread over the worker threads.

    Calls made from inside a worker run serially, so nested fan-outs do not
    multiply the thread count.
    """
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers > 1 and not getattr(_local, "nested", False):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_in_worker(fn), items))
    return [fn(item) for item in items]


def _sum(parts):
    total = [np.array(p, copy=True) for p in parts[0]]
    for part in parts[1:]:
        for acc, p in zip(total, part):
            acc += p
    return total


def reduce_blocks(stream, n: int, fn):
    """Sum ``fn(substream, size)`` over all blocks, in block order.

    ``fn`` returns a tuple of arrays; the result is the element-wise sum.
    """
    return _sum(map_ordered(lambda job: fn(*job), _jobs(stream, n)))


def draw_blocks(draw, stream, n: int) -> list:
    """Materialize the per-block samples ``draw(substream, size)``."""
    return map_ordered(lambda job: draw(*job), _jobs(stream, n))


def abs2(a):
    """``|a|^2`` without the square root of ``np.abs``."""
    if np.iscomplexobj(a):
        out = np.square(a.real)
        out += np.square(a.imag)
        return out
    return a * a


def gram(a, b):
    """``a^T conj(b)``: sums of ``a_i conj(b_j)`` over rows.

    Complex operands go through one real product of their interleaved
    ``(re, im)`` views, which avoids conjugated copies.
    """
    if not (np.iscomplexobj(a) and np.iscomplexobj(b)):
        return a.T @ np.conj(b)
    ra = np.ascontiguousarray(a).view(float)
    rb = np.ascontiguousarray(b).view(float)
    G = ra.T @ rb
    re = G[0::2, 0::2] + G[1::2, 1::2]
    im = G[1::2, 0::2] - G[0::2, 1::2]
    return re + 1j * im


def _outer_sums(a, b):
    """Per-entry sums of ``a_i conj(b_j)`` and ``|a_i|^2 |b_j|^2`` over rows."""
    return gram(a, b), abs2(a).T @ abs2(b)


def entry_std_error(s1, s2, n):
    mean = s1 / n
    var = np.maximum(s2 / n - np.abs(mean) ** 2, 0.0)
    return np.sqrt(var / n)


@dataclass
class LinearStats:
    """Means and second moments of K per-sample quantities."""

    n: int
    mean: np.ndarray
    gram: np.ndarray  # E{u_i conj(u_j)}

    def std_error(self, coeffs) -> float:
        """Standard error of ``sum_i c_i mean_i``."""
        c = np.asarray(coeffs, dtype=complex)
        cov = self.gram - np.outer(self.mean, np.conj(self.mean))
        var = float(np.real(c @ cov @ np.conj(c)))
        return float(np.sqrt(max(var, 0.0) / self.n))


def linear_stats(stream, n: int, fn) -> LinearStats:
    """``fn(substream, size)`` returns a ``(size, K)`` array of per-sample values."""

    def block(sub, size):
        u = fn(sub, size)
        return u.sum(axis=0), u.T @ np.conj(u)

    s1, s2 = reduce_blocks(stream, n, block)
    return LinearStats(int(n), s1 / n, s2 / n)


@dataclass
class Moments:
    """Raw output of :func:`estimate`; all matrices are ``M x M``."""

    n: int
    B: np.ndarray
    C_x: np.ndarray  # configured (Gaussian path) or sample (general path)
    C_x_hat: np.ndarray
    C_z: np.ndarray
    C_zx: np.ndarray
    C_eta: np.ndarray
    B_se: np.ndarray
    residual: np.ndarray  # E^{eta x^H} on the sample
    residual_se: np.ndarray
    C_eta_se: np.ndarray
    used_pinv: bool


CACHE_LIMIT = 1 << 22  # samples x dimension kept in memory between passes


class _Sample:
    """Block-wise access to ``(x, U(x))``, with ``x`` cached when requested."""

    def __init__(self, draw, stream, n, cache=False):
        self.jobs = _jobs(stream, n)
        self.draw = draw
        self.blocks = draw_blocks(draw, stream, n) if cache else None

    def outputs(self, distort):
        """Cached ``(x, z)`` pairs, or ``None`` when samples are streamed."""
        if self.blocks is None:
            return None
        return map_ordered(lambda x: (x, distort(x)), self.blocks)

    def reduce(self, fn, distort, pairs=None):
        """Sum ``fn(x, z)`` over all blocks, in block order."""
        if pairs is not None:
            return _sum(map_ordered(lambda p: fn(*p), pairs))

        def job(j):
            x = self.draw(*j)
            return fn(x, distort(x))

        return _sum(map_ordered(job, self.jobs))


def _first_sums(W=None):
    def block(x, z):
        out = [gram(z, x), gram(z, z), gram(x, x)]
        if W is not None:
            out.append(abs2(z).T @ abs2(x @ np.conj(W)))
        return out

    return block


def gain_only(draw, distort, C_x, stream, n):
    """``B = C_zx C_x^{-1}`` with the configured ``C_x``; returns
    ``(B, B_se, used_pinv)``."""
    W, used = inverse_or_pinv(C_x)
    s_zx, _, _, s_g2 = _Sample(draw, stream, n).reduce(_first_sums(W), distort)
    B = (s_zx / n) @ W
    return B, entry_std_error(s_zx @ W, s_g2, n), used


def _moments(sample, distort, n, C_x, lean=False) -> Moments:
    """Two-pass moments for one distortion.

    ``lean`` skips the standard errors of ``B`` and of the orthogonality
    residual, and ``C_z``; the skipped fields are NaN.
    """
    pairs = sample.outputs(distort)
    if lean:
        s_zx, s_xx = sample.reduce(lambda x, z: (gram(z, x), gram(x, x)), distort, pairs)
        s_zz = np.full_like(s_zx, np.nan)
    else:
        s_zx, s_zz, s_xx = sample.reduce(_first_sums(), distort, pairs)
    C_zx = s_zx / n
    C_z = hermitize(s_zz / n)
    C_x_hat = hermitize(s_xx / n)
    gaussian = C_x is not None
    C_x = hermitize(C_x) if gaussian else C_x_hat
    W, used = inverse_or_pinv(C_x)
    B = C_zx @ W
    residual = C_zx - B @ C_x_hat
    # Regression gain against the sample correlation. Its residual has second
    # moment C_z_hat - C_zx_hat C_x_hat^+ C_xz_hat, which estimates
    # C_z - B C_x B^H without the term B (C_x_hat - C_x) C_x^{-1} x that the
    # configured-C_x gain leaves in eta. That term is correlated across
    # branches and dominates weak distortions.
    B_ls = B if not gaussian else C_zx @ inverse_or_pinv(C_x_hat)[0]

    def lean_block(x, z):
        eps = x @ B_ls.T
        np.subtract(z, eps, out=eps)
        return _outer_sums(eps, eps)

    def block(x, z):
        bx = x @ B.T
        eta = z - bx
        eps = eta if not gaussian else z - x @ B_ls.T
        xw = x @ np.conj(W)
        gain_a = z if gaussian else eta
        # linearized influence of the residual: -B x x^H (Gaussian) or eta x^H
        res_a = bx if gaussian else eta
        return (
            *_outer_sums(gain_a, xw),
            *_outer_sums(res_a, x),
            *_outer_sums(eps, eps),
        )

    if lean:
        e1, e2 = sample.reduce(lean_block, distort, pairs)
        B_se = residual_se = np.full(B.shape, np.nan)
    else:
        g1, g2, r1, r2, e1, e2 = sample.reduce(block, distort, pairs)
        B_se = entry_std_error(g1, g2, n)
        residual_se = entry_std_error(r1, r2, n)
    C_eta = hermitize(e1 / n)
    return Moments(
        n=n,
        B=B,
        C_x=C_x,
        C_x_hat=C_x_hat,
        C_z=C_z,
        C_zx=C_zx,
        C_eta=C_eta,
        B_se=B_se,
        residual=residual,
        residual_se=residual_se,
        C_eta_se=entry_std_error(e1, e2, n),
        used_pinv=used,
    )


def estimate(draw, distort, stream, n, C_x=None, dim=None) -> Moments:
    """Full decomposition.

    With ``C_x`` given (Gaussian input) the gain uses the configured
    correlation; with ``C_x=None`` it uses the sample correlation and its
    pseudo-inverse (linear MMSE form, valid for any input distribution).
    """
    return estimate_many(draw, [distort], stream, n, C_x, dim)[0]


def estimate_many(draw, distorts, stream, n, C_x=None, dim=None, lean=False) -> list:
    """:func:`estimate` for several distortions on one shared input sample."""
    n = int(n)
    if dim is None:
        dim = np.shape(C_x)[0] if C_x is not None else 1
    cache = len(distorts) > 1 or n * dim <= CACHE_LIMIT
    sample = _Sample(draw, stream, n, cache=cache)
    return [_moments(sample, U, n, C_x, lean) for U in distorts]
