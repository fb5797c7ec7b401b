"""Distortion correlation across ADC resolutions in a quantized Rayleigh MIMO link.

For every channel realization ``H`` (i.i.d. ``CN(0, 1)`` entries) the
received signal ``x = H s`` with ``s ~ CN(0, I)`` is conditionally Gaussian
with ``C_x = H H^H``. Each antenna quantizes the real and imaginary parts of
its sample with a uniform ``b``-bit ADC, and the absolute correlation
coefficients of the distortion ``eta`` are collected over all antenna pairs
and realizations.
"""
import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _engine
from .errors import DegenerateDiagonal, IoError, ValidationError
from .mimo import MIN_SAMPLES, ElementwiseDistortion, distortion_correlations
from .nonlinearity import MAX_BITS, UniformQuantizer, three_sigma_step
from .sampling import RandomStream, standard_complex_normal

POLICIES = ("three_sigma", "fixed")
DEGENERATE_RTOL = 1e-12

# stream ids; realization r uses path (r,) under each
CHANNEL_STREAM = 1
SAMPLE_STREAM = 0


def _check_bits(b):
    if isinstance(b, str) and b.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(b, float) and math.isinf(b) and b > 0:
        return math.inf
    try:
        v = int(b)
    except (TypeError, ValueError):
        raise ValidationError(f"bit depth must be an integer or 'inf', got {b!r}") from None
    if v != b and not isinstance(b, str):
        raise ValidationError(f"bit depth must be an integer, got {b!r}")
    if not 1 <= v <= MAX_BITS:
        raise ValidationError(f"bit depth must be in 1..{MAX_BITS}, got {v}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """``bits_list`` may contain ``math.inf`` (or ``"inf"``) for an ideal,
    distortion-free receiver."""

    M_rx: int = 4
    M_tx: int = 4
    bits_list: tuple = (1, 2, 3, 4, 5, 6)
    realizations: int = 200
    samples_per_realization: int = 100_000
    seed: int = 42
    quantizer_step_policy: str = "three_sigma"
    fixed_step: float = None

    def __post_init__(self):
        for name in ("M_rx", "M_tx", "realizations"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        bits = tuple(_check_bits(b) for b in self.bits_list)
        if not bits:
            raise ValidationError("bits_list must not be empty")
        object.__setattr__(self, "bits_list", bits)
        n = int(self.samples_per_realization)
        if n != self.samples_per_realization or n < MIN_SAMPLES:
            raise ValidationError(f"samples_per_realization must be an integer >= {MIN_SAMPLES}")
        object.__setattr__(self, "samples_per_realization", n)
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.quantizer_step_policy not in POLICIES:
            raise ValidationError(f"quantizer_step_policy must be one of {POLICIES}")
        if self.quantizer_step_policy == "fixed":
            if self.fixed_step is None or not self.fixed_step > 0:
                raise ValidationError("the fixed policy needs a positive fixed_step")
            object.__setattr__(self, "fixed_step", float(self.fixed_step))
        elif self.fixed_step is not None:
            raise ValidationError("fixed_step is only used with the fixed policy")

    def step(self, bits: int, power: float) -> float:
        """ADC step for an antenna with received power ``power``."""
        if self.quantizer_step_policy == "fixed":
            return self.fixed_step
        return three_sigma_step(bits, power)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["bits_list"] = [_bits_label(b) for b in self.bits_list]
        return rec


def _bits_label(b):
    return "inf" if b == math.inf else int(b)


@dataclass(frozen=True)
class CdfSeries:
    bits: object  # int, or math.inf for the unquantized reference
    sorted_values: np.ndarray = field(repr=False)
    summary: dict
    eps_mc: float = 0.0  # largest standard error of an accumulated |rho|
    degenerate: bool = False

    @property
    def count(self) -> int:
        return int(self.sorted_values.size)

    def cdf(self, t) -> np.ndarray:
        """Empirical CDF ``#{v <= t} / count``."""
        return np.searchsorted(self.sorted_values, t, side="right") / self.count


def _summary(values: np.ndarray) -> dict:
    if values.size == 0:
        return {"median": None, "p90": None, "max": None}
    return {
        "median": float(np.median(values)),
        "p90": float(np.percentile(values, 90)),
        "max": float(values[-1]),
    }


def channel(cfg: ExperimentConfig, r: int) -> np.ndarray:
    """Channel matrix of realization ``r``."""
    gen = RandomStream(cfg.seed, CHANNEL_STREAM, (r,)).generator()
    return standard_complex_normal(gen, (cfg.M_rx, cfg.M_tx))


def quantizers(cfg: ExperimentConfig, C_x: np.ndarray, bits: int) -> ElementwiseDistortion:
    powers = np.real(np.diag(C_x))
    return ElementwiseDistortion(tuple(UniformQuantizer(bits, cfg.step(bits, p)) for p in powers))


def _pairs(C_eta, C_eta_se, scale):
    """``|rho_ij|`` and their standard errors for i < j, skipping degenerate
    diagonals."""
    d = np.real(np.diag(C_eta))
    bad = d < DEGENERATE_RTOL * scale
    iu, ju = np.triu_indices(len(d), 1)
    keep = ~(bad[iu] | bad[ju])
    if np.any(bad) and iu.size:
        warnings.warn(
            f"distortion power below {DEGENERATE_RTOL:g} x scale on antennas "
            f"{np.flatnonzero(bad).tolist()}; pairs skipped",
            DegenerateDiagonal,
            stacklevel=3,
        )
    iu, ju = iu[keep], ju[keep]
    norm = np.sqrt(d[iu] * d[ju])
    return np.abs(C_eta[iu, ju]) / norm, C_eta_se[iu, ju] / norm


def _realization(cfg: ExperimentConfig, r: int):
    H = channel(cfg, r)
    C_x = H @ H.conj().T
    scale = float(np.real(np.trace(C_x))) / cfg.M_rx
    finite = [b for b in cfg.bits_list if b != math.inf]
    dists = [quantizers(cfg, C_x, b) for b in finite]
    stream = RandomStream(cfg.seed, SAMPLE_STREAM, (r,))
    out = {}
    if dists:
        results = distortion_correlations(dists, C_x, stream, cfg.samples_per_realization, lean=True)
        for b, res in zip(finite, results):
            out[b] = _pairs(res.C_eta, res.C_eta_std_error, scale)
    return out


def run_fig3(cfg: ExperimentConfig) -> list:
    """One :class:`CdfSeries` per entry of ``cfg.bits_list``, in that order.

    Realizations run on independent substreams and are merged in index
    order, so the result does not depend on the worker count.
    """
    per_real = _engine.map_ordered(lambda r: _realization(cfg, r), range(cfg.realizations))
    series = []
    for b in cfg.bits_list:
        if b == math.inf:
            # identity: B = I and C_eta = 0 exactly, no pair is defined
            series.append(CdfSeries(b, np.empty(0), _summary(np.empty(0)), 0.0, True))
            continue
        vals = [res[b][0] for res in per_real]
        ses = [res[b][1] for res in per_real]
        v = np.sort(np.concatenate(vals)) if vals else np.empty(0)
        se = np.concatenate(ses) if ses else np.empty(0)
        eps = float(se.max()) if se.size else 0.0
        series.append(CdfSeries(b, v, _summary(v), eps, v.size == 0))
    return series


def _float(v) -> str:
    return repr(float(v))


def emit_cdf_csv(series, path) -> int:
    """Write ``bits,abs_rho,cdf`` rows, one block per bit depth; returns the
    number of data rows."""
    series = list(series)
    if not series or all(s.count == 0 for s in series):
        raise ValidationError("no correlation values to write")
    rows = 0
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bits", "abs_rho", "cdf"])
            for s in series:
                n = s.count
                for k, v in enumerate(s.sorted_values, start=1):
                    w.writerow([_bits_label(s.bits), _float(v), _float(k / n)])
                    rows += 1
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return rows


def summary_record(series, cfg: ExperimentConfig) -> dict:
    return {
        "config": cfg.to_record(),
        "series": [
            {
                "bits": _bits_label(s.bits),
                "count": s.count,
                "degenerate": s.degenerate,
                "eps_mc": s.eps_mc,
                **s.summary,
            }
            for s in series
        ],
    }


def emit_summary_json(series, cfg: ExperimentConfig, path) -> dict:
    rec = summary_record(series, cfg)
    try:
        with open(path, "w") as fh:
            json.dump(rec, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return rec

