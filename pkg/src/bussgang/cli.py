"""Command-line front end.

Every command prints one JSON document (to stdout, or to ``--output``) that
echoes the fully resolved configuration under ``"config"``. Complex numbers
are written as ``[re, im]`` pairs and non-finite values as ``null``.

Exit codes: 0 success, 1 other library error, 2 non-linearity spec parse
error, 3 no closed form, 4 no derivative, 5 configuration file error,
6 invalid argument value, 7 linear algebra failure, 8 I/O error, 9 quantizer
lacks the conditional-mean property, 64 command-line usage error.
"""
import argparse
import json
import math
import sys
from importlib import resources

import numpy as np

from . import __version__, experiment, mimo, scalar
from .errors import (
    BussgangError,
    ConfigError,
    IoError,
    LinalgError,
    NoClosedForm,
    NoDerivative,
    ValidationError,
)
from .linalg import check_hermitian, hermitian_factor
from .nonlinearity import lloyd_max_quantizer, parse_nonlinearity
from .sampling import RandomStream, SignalSource

USAGE_EXIT = 64
COMMANDS = ("gain", "decompose", "rate", "theorem-check", "aqnm", "mimo", "fig3")

# independent stream ids for the routes of one command
CORRELATION_STREAM = 0
DERIVATIVE_STREAM = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def schema_path(command: str):
    """Location of the JSON schema describing the output of ``command``."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    return resources.files("bussgang") / "schemas" / f"{command}.schema.json"


# ----------------------------------------------------------------- encoding


def jsonable(v):
    """Recursively convert numpy and complex values to JSON-ready types."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [_finite(v.real), _finite(v.imag)]
    if isinstance(v, (float, np.floating)):
        return _finite(v)
    return v


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _dump(doc, path):
    text = json.dumps(jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ------------------------------------------------------------- arg helpers


def _count(text: str) -> int:
    """Positive sample count; accepts ``1e6`` style input."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _bits_list(text: str):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.lower() in ("inf", "infinity"):
            out.append(math.inf)
            continue
        try:
            out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad bit depth {part!r}") from None
    return out


def _common(p, samples):
    p.add_argument("--seed", type=_seed, default=42, help="64-bit unsigned seed (default 42)")
    p.add_argument("--samples", type=_count, default=samples, help=f"Monte Carlo samples (default {samples:g})")
    p.add_argument("-o", "--output", default=None, help="write JSON here instead of stdout")


def _scalar_args(p, samples=1_000_000):
    p.add_argument("--nl", required=True, help="non-linearity spec, e.g. 'soft_clipper(amax=1)'")
    p.add_argument("--cx", type=float, default=1.0, help="input power C_x (default 1)")
    p.add_argument("--real", action="store_true", help="real input N(0, C_x) for entries accepting both")
    _common(p, samples)


def _resolve(args):
    if not args.cx > 0 or not math.isfinite(args.cx):
        raise ValidationError(f"--cx must be positive and finite, got {args.cx}")
    U = parse_nonlinearity(args.nl, input_power=args.cx)
    return U, (True if args.real else None)


def _scalar_config(args, U, **extra):
    cfg = {
        "nl": args.nl,
        "nl_resolved": U.spec(),
        "cx": args.cx,
        "real": scalar._is_real(U, True if args.real else None),
        "seed": args.seed,
        "samples": args.samples,
    }
    cfg.update(extra)
    return cfg


def _estimate_record(g: scalar.GainEstimate, real: bool):
    v = complex(g.value)
    return {
        "method": g.method,
        "value": v.real if real else v,
        "std_error": g.std_error,
        "n_samples": g.n_samples,
    }


# ------------------------------------------------------------------ commands


def cmd_gain(args):
    U, real = _resolve(args)
    is_real = scalar._is_real(U, real)
    routes = {
        "closed": lambda: scalar.gain_closed_form(U, args.cx, real=real),
        "correlation": lambda: scalar.gain_correlation(
            U, args.cx, RandomStream(args.seed, CORRELATION_STREAM), args.samples, real=real
        ),
        "derivative": lambda: scalar.gain_derivative(
            U, args.cx, RandomStream(args.seed, DERIVATIVE_STREAM), args.samples, real=real
        ),
    }
    wanted = list(routes) if args.method == "all" else [args.method]
    estimates, skipped = [], []
    for name in wanted:
        try:
            estimates.append(routes[name]())
        except (NoClosedForm, NoDerivative) as exc:
            if args.method != "all":
                raise
            skipped.append({"method": name, "reason": str(exc)})
    doc = {
        "command": "gain",
        "config": _scalar_config(args, U, method=args.method),
        "estimates": [_estimate_record(g, is_real) for g in estimates],
    }
    if args.method == "all":
        doc["skipped"] = skipped
        doc["agreement"] = _agreement(estimates)
    return doc


def _agreement(estimates):
    out = []
    for i, a in enumerate(estimates):
        for b in estimates[i + 1 :]:
            delta = abs(complex(a.value) - complex(b.value))
            se = math.hypot(a.std_error, b.std_error)
            out.append(
                {
                    "pair": [a.method, b.method],
                    "delta": delta,
                    "combined_std_error": se,
                    "within_4sigma": bool(delta <= 4 * se),
                }
            )
    return out


def _decomposition(args, U, real, method):
    if method == "auto":
        method = "closed" if (U.has_closed_form_gain and U.has_closed_form_power) else "mc"
    if method == "closed":
        return scalar.decompose_closed_form(U, args.cx, real=real), method
    stream = RandomStream(args.seed, CORRELATION_STREAM)
    return scalar.decompose(U, args.cx, stream, args.samples, real=real), method


def _decomposition_record(d: scalar.ScalarDecomposition):
    rec = scalar.to_record(d)
    rec.pop("seed", None)
    rec["sdr_db"] = 10 * math.log10(d.sdr) if 0 < d.sdr < math.inf else None
    if d.real:
        rec["B"], rec["C_zx"] = float(np.real(d.B)), float(np.real(d.C_zx))
    else:
        rec["B"], rec["C_zx"] = complex(d.B), complex(d.C_zx)
    return rec


def cmd_decompose(args):
    U, real = _resolve(args)
    d, method = _decomposition(args, U, real, args.method)
    return {
        "command": "decompose",
        "config": _scalar_config(args, U, method=method),
        "decomposition": _decomposition_record(d),
    }


def cmd_rate(args):
    U, real = _resolve(args)
    d, method = _decomposition(args, U, real, args.method)
    rates = [{"sigma2": s2, "rate": scalar.rate_lower_bound(d, s2)} for s2 in args.sigma2]
    return {
        "command": "rate",
        "config": _scalar_config(args, U, method=method, sigma2=list(args.sigma2)),
        "decomposition": _decomposition_record(d),
        "rates": rates,
    }


def cmd_theorem_check(args):
    U, real = _resolve(args)
    if not args.cy > 0:
        raise ValidationError(f"--cy must be positive, got {args.cy}")
    rho = args.rho.real if scalar._is_real(U, real) and args.rho.imag == 0 else args.rho
    rep = scalar.verify_cross_correlation_theorem(
        U, args.cx, args.cy, rho, RandomStream(args.seed), args.samples, real=real
    )
    return {
        "command": "theorem-check",
        "config": _scalar_config(args, U, cy=args.cy, rho=args.rho),
        "result": {
            "C_zy_hat": complex(rep.C_zy_hat),
            "B_hat": complex(rep.B_hat),
            "C_xy_hat": complex(rep.C_xy_hat),
            "rhs": complex(rep.rhs),
            "deviation": rep.deviation,
            "std_error": rep.std_error,
            "within_4sigma": rep.within,
        },
    }


def cmd_aqnm(args):
    if not args.cx > 0:
        raise ValidationError(f"--cx must be positive, got {args.cx}")
    if args.nl is None:
        Q = lloyd_max_quantizer(args.bits, variance=args.cx)
        nl = f"lloyd_max_quantizer(bits={args.bits})"
    else:
        Q = parse_nonlinearity(args.nl, input_power=args.cx)
        nl = args.nl
    rep = scalar.aqnm_check(Q, args.cx, RandomStream(args.seed), args.samples)
    rec = {k: jsonable(v) for k, v in scalar.to_record(rep).items()}
    rec["B_hat"] = complex(rep.B_hat)
    rec["C_zx_hat"] = complex(rep.C_zx_hat)
    rec["within_4sigma"] = bool(rep.gap < 4 * rep.gap_std_error)
    rec["relative_within_4sigma"] = bool(rep.relative_gap < 4 * rep.relative_std_error)
    return {
        "command": "aqnm",
        "config": {
            "nl": nl,
            "nl_resolved": Q.spec(),
            "bits": getattr(Q, "bits", None),
            "cx": args.cx,
            "seed": args.seed,
            "samples": args.samples,
        },
        "result": rec,
    }


# --------------------------------------------------------------- mimo config

_MIMO_KEYS = {"C_x", "channel", "source", "nonlinearity", "samples", "seed"}


def _entry(v, where):
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number or [re, im], got {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if (
        isinstance(v, list)
        and len(v) == 2
        and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in v)
    ):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected a number or [re, im], got {v!r}")


def _matrix(v, field, square=True):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ConfigError(f"{field}: expected a nonempty list of rows")
    cols = len(v[0])
    rows = []
    for i, row in enumerate(v):
        if len(row) != cols:
            raise ConfigError(f"{field}[{i}]: row has {len(row)} entries, expected {cols}")
        rows.append([_entry(x, f"{field}[{i}][{j}]") for j, x in enumerate(row)])
    A = np.array(rows, dtype=complex)
    if square and A.shape[0] != A.shape[1]:
        raise ConfigError(f"{field}: expected a square matrix, got {A.shape[0]}x{A.shape[1]}")
    if not np.all(np.isfinite(A)):
        raise ConfigError(f"{field}: entries must be finite")
    return A


def load_mimo_config(path) -> dict:
    """Parse and validate a MIMO configuration file.

    Keys: ``C_x`` (correlation matrix) or ``channel`` (matrix ``H``, with
    ``x = H s``); ``source`` (``gaussian`` default, or ``qpsk`` which needs
    ``channel``); ``nonlinearity`` (one spec for every branch, or a list with
    one spec per branch); ``samples`` (default 1e5); ``seed`` (default 42).
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - _MIMO_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    if ("C_x" in raw) == ("channel" in raw):
        raise ConfigError(f"{path}: give exactly one of 'C_x' and 'channel'")
    source = raw.get("source", "gaussian")
    if source not in ("gaussian", "qpsk"):
        raise ConfigError(f"source: expected 'gaussian' or 'qpsk', got {source!r}")
    cfg = {"source": source}
    if "C_x" in raw:
        if source != "gaussian":
            raise ConfigError("source: 'qpsk' needs 'channel' instead of 'C_x'")
        C = _matrix(raw["C_x"], "C_x")
        try:
            check_hermitian(C)
            hermitian_factor(C)
        except LinalgError as exc:
            raise ConfigError(f"C_x: {exc}") from None
        cfg["C_x"] = C
    else:
        cfg["channel"] = _matrix(raw["channel"], "channel", square=False)
    M = (cfg["C_x"] if "C_x" in cfg else cfg["channel"]).shape[0]
    nl = raw.get("nonlinearity")
    if isinstance(nl, str):
        nl = [nl] * M
    if not isinstance(nl, list) or not nl or not all(isinstance(s, str) for s in nl):
        raise ConfigError("nonlinearity: expected a spec string or a list of spec strings")
    if len(nl) != M:
        raise ConfigError(f"nonlinearity: {len(nl)} entries for {M} branches")
    cfg["nonlinearity"] = nl
    for key, default in (("samples", 100_000), ("seed", 42)):
        v = raw.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v) or v < 0:
            raise ConfigError(f"{key}: expected a nonnegative integer, got {v!r}")
        cfg[key] = int(v)
    if cfg["seed"] >= 2**64:
        raise ConfigError("seed: must fit in 64 bits")
    return cfg


def _mimo_record(d: mimo.MimoDecomposition):
    return {
        "method": d.method,
        "n_samples": d.n_samples,
        "B": d.B,
        "B_std_error": d.B_std_error,
        "C_x": d.C_x,
        "C_z_hat": d.C_z_hat,
        "C_zx_hat": d.C_zx_hat,
        "C_eta": d.C_eta,
        "C_eta_std_error": d.C_eta_std_error,
        "correlation_coefficients": d.correlation_coefficients(),
        "diagnostics": vars(d.diagnostics),
    }


def cmd_mimo(args):
    cfg = load_mimo_config(args.config)
    powers = (
        np.real(np.diag(cfg["C_x"]))
        if "C_x" in cfg
        else np.sum(np.abs(cfg["channel"]) ** 2, axis=1)
    )
    branches = tuple(parse_nonlinearity(s, input_power=float(p)) for s, p in zip(cfg["nonlinearity"], powers))
    try:
        dist = mimo.ElementwiseDistortion(branches)
    except ValueError as exc:
        raise ConfigError(f"nonlinearity: {exc}") from None
    stream = RandomStream(cfg["seed"])
    if cfg["source"] == "qpsk":
        src = SignalSource("channel_product", channel=cfg["channel"], symbols="qpsk")
        d = mimo.decompose_general(dist, src, stream, cfg["samples"])
    else:
        C_x = cfg["C_x"] if "C_x" in cfg else cfg["channel"] @ cfg["channel"].conj().T
        d = mimo.distortion_correlation(dist, C_x, stream, cfg["samples"])
    echo = {k: v for k, v in cfg.items()}
    echo["nl_resolved"] = [U.spec() for U in branches]
    echo["path"] = str(args.config)
    return {"command": "mimo", "config": echo, "result": _mimo_record(d)}


def cmd_fig3(args):
    cfg = experiment.ExperimentConfig(
        M_rx=args.m_rx,
        M_tx=args.m_tx,
        bits_list=tuple(args.bits),
        realizations=args.realizations,
        samples_per_realization=args.samples,
        seed=args.seed,
        quantizer_step_policy=args.step_policy,
        fixed_step=args.step,
    )
    series = experiment.run_fig3(cfg)
    rows = experiment.emit_cdf_csv(series, args.csv) if any(s.count for s in series) else 0
    rec = experiment.summary_record(series, cfg)
    rec["config"]["csv"] = args.csv
    if args.summary:
        rec["config"]["summary"] = args.summary
        _dump({"command": "fig3", **rec}, args.summary)
    return {"command": "fig3", "csv_rows": rows, **rec}


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bussgang", description="Bussgang decomposition of memoryless non-linearities.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gain", help="Bussgang gain by closed form, correlation and/or derivative")
    _scalar_args(p)
    p.add_argument("--method", choices=("closed", "correlation", "derivative", "all"), default="all")
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("decompose", help="scalar decomposition with diagnostics")
    _scalar_args(p)
    p.add_argument("--method", choices=("mc", "closed", "auto"), default="mc")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("rate", help="achievable-rate lower bound")
    _scalar_args(p)
    p.add_argument("--sigma2", type=float, nargs="+", required=True, help="noise power(s)")
    p.add_argument(
        "--method",
        choices=("mc", "closed", "auto"),
        default="auto",
        help="decomposition route; auto uses closed forms when known (default)",
    )
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("theorem-check", help="check E{z y*} = B E{x y*} for jointly Gaussian x, y")
    _scalar_args(p)
    p.add_argument("--cy", type=float, default=1.0, help="power of y (default 1)")
    p.add_argument("--rho", type=_complex, default=0.5 + 0j, help="correlation coefficient of x and y")
    p.set_defaults(func=cmd_theorem_check)

    p = sub.add_parser("aqnm", help="AQNM equivalence for a conditional-mean quantizer")
    p.add_argument("--bits", type=int, default=1, help="Lloyd-Max resolution (default 1)")
    p.add_argument("--nl", default=None, help="quantizer spec overriding --bits")
    p.add_argument("--cx", type=float, default=1.0, help="input power C_x (default 1)")
    _common(p, 1_000_000)
    p.set_defaults(func=cmd_aqnm)

    p = sub.add_parser("mimo", help="MIMO decomposition from a JSON configuration file")
    p.add_argument("config", help="configuration file")
    p.add_argument("-o", "--output", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_mimo)

    p = sub.add_parser("fig3", help="distortion correlation CDFs across ADC resolutions")
    p.add_argument("--bits", type=_bits_list, default=[1, 2, 3, 4, 5, 6], help="comma-separated bit depths")
    p.add_argument("--realizations", type=_count, default=200)
    p.add_argument("--m-rx", type=_count, default=4, dest="m_rx")
    p.add_argument("--m-tx", type=_count, default=4, dest="m_tx")
    p.add_argument("--step-policy", choices=experiment.POLICIES, default="three_sigma")
    p.add_argument("--step", type=float, default=None, help="ADC step for the fixed policy")
    p.add_argument("--csv", default="fig3_cdf.csv", help="CDF output (default fig3_cdf.csv)")
    p.add_argument("--summary", default=None, help="also write the JSON summary to this file")
    _common(p, 100_000)
    p.set_defaults(func=cmd_fig3)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = args.func(args)
        _dump(doc, args.output)
    except BussgangError as exc:
        print(f"bussgang {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
