"""``fbsr`` command line: round values, compute biases, run the sweeps."""

from __future__ import annotations

import argparse
import contextlib
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bias import (
    Method,
    bias_closed,
    bias_enumerated,
    bias_floor_sum_srf,
    bias_floor_sum_srff,
    bias_monte_carlo,
)
from .experiments import QatConfig, run_figure1, run_figure2, run_qat, write_csv
from .formats import P3, PRESETS, FloatFormat, get_format
from .randbits import make_source
from .rounding import Mode, RoundingSpec, round_value, ulp_at

MODES = [m.value for m in Mode]
VARIANTS = ["srff", "srf", "src"]
METHODS = ["exact", "floorsum", "bound", "closed", "mc"]


class UsageError(Exception):
    pass


def format_exact(q) -> str:
    """Exact decimal of a dyadic rational, plus ``p/q`` when not an integer."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{dyadic_decimal(q)} ({q.numerator}/{q.denominator})"


def dyadic_decimal(q: Fraction) -> str:
    d = q.denominator
    if d & (d - 1):
        raise ValueError(f"{q} is not dyadic")
    k = d.bit_length() - 1
    digits = abs(q.numerator) * 5**k  # q = digits / 10^k
    s = str(digits).rjust(k + 1, "0")
    whole, frac = s[:-k] if k else s, s[-k:] if k else ""
    frac = frac.rstrip("0")
    out = whole + ("." + frac if frac else "")
    return "-" + out if q < 0 else out


def parse_value(text: str) -> Fraction:
    """Dyadic input: ``p/q`` or decimal if exactly dyadic, else nearest binary64."""
    try:
        q = Fraction(text)
    except ValueError:
        raise UsageError(f"cannot parse value {text!r}") from None
    d = q.denominator
    if d & (d - 1):
        return Fraction(float(q))
    return q


def _add_format_args(p: argparse.ArgumentParser, flag: str = "--format", default: str | None = None):
    p.add_argument(flag, default=default, help=f"preset name ({', '.join(PRESETS)})")
    p.add_argument("--precision", type=int, help="custom format precision P (with --bias, --emax)")
    p.add_argument("--bias", type=int, help="custom format exponent bias B")
    p.add_argument("--emax", type=int, help="custom format largest biased exponent")


def _resolve_format(args, name_attr: str = "format") -> FloatFormat:
    custom = (args.precision, args.bias, args.emax)
    if any(v is not None for v in custom):
        if None in custom:
            raise UsageError("custom formats need all of --precision, --bias and --emax")
        return FloatFormat(*custom, name=f"P{args.precision}B{args.bias}E{args.emax}")
    name = getattr(args, name_attr)
    if name is None:
        raise UsageError(f"--{name_attr.replace('_', '-')} or --precision/--bias/--emax is required")
    return get_format(name)


def _spec(mode: str, bits: int | None, inner: str) -> RoundingSpec:
    m = Mode(mode)
    if not m.stochastic:
        return RoundingSpec(m)
    if bits is None:
        raise UsageError(f"--bits is required for {m.value}")
    return RoundingSpec(m, bits, inner if m is Mode.SRC else None)


def _preamble(args) -> dict:
    skip = {"func", "out", "config", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            yield f


def _summary_stream(args):
    return sys.stderr if args.out in (None, "-") else sys.stdout


# --- subcommands -------------------------------------------------------------


def cmd_formats(args) -> None:
    for fmt in PRESETS.values():
        print(fmt.describe())


def cmd_round(args) -> None:
    if args.value is None:
        raise UsageError("--value is required")
    fmt = _resolve_format(args)
    spec = _spec(args.mode, args.bits, args.inner)
    x = parse_value(args.value)
    src = make_source(args.bit_source, args.seed) if spec.mode.stochastic else None
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    for _ in range(args.count):
        print(format_exact(round_value(x, fmt, spec, src)))


def cmd_bias(args) -> None:
    method = Method.CLOSED if args.method == "closed" else Method(args.method)
    D = args.excess
    if D is None and args.src_format and args.dst_format:
        D = get_format(args.src_format).precision - get_format(args.dst_format).precision
    N = args.bits
    if method is Method.CLOSED:
        r = bias_closed(args.variant, N, D)
        label = " (bound)" if r.is_bound else ""
        print(format_exact(r.value) + label)
        return
    if method in (Method.ENUMERATED, Method.FLOOR_SUM):
        if D is None:
            raise UsageError(f"--method {args.method} needs --excess or --src-format/--dst-format")
        if method is Method.ENUMERATED:
            r = bias_enumerated(args.variant, N, D, args.inner)
        elif args.variant == "srff":
            r = bias_floor_sum_srff(N, D)
        elif args.variant == "srf":
            r = bias_floor_sum_srf(N, D)
        else:
            raise UsageError("floorsum covers srff and srf; use --method exact for src")
        print(format_exact(r.value))
        return
    _bias_mc(args, N, D)


def _bias_mc(args, N: int, D: int | None) -> None:
    dst = get_format(args.dst_format) if args.dst_format else P3
    if args.src_format:
        src = get_format(args.src_format)
    elif D is not None:
        src = FloatFormat(dst.precision + D, 127, 254, f"P{dst.precision + D}")
    else:
        src = None
    lo = parse_value(args.lo)
    if args.hi is not None:
        hi = parse_value(args.hi)
    else:
        hi = lo + ulp_at(lo, dst) if src is not None else 2 * lo
    r = bias_monte_carlo(
        args.variant, dst, N, lo, hi, args.samples, args.seed, src=src, points=args.points,
        inner=args.inner, threads=args.threads,
    )
    print(
        f"{r.grid_bias_ulp:.17g} ulp (stderr {r.stderr_ulp:.3g}, exact grid average "
        f"{format_exact(r.exact_grid_bias_ulp)}, {len(r.x)} points x {r.samples_per_point} samples)"
    )
    if args.out:
        with _output(args.out) as f:
            write_csv(f, ("x", "mean", "bias"), r.rows(), _preamble(args))


def cmd_fig1(args) -> None:
    res = run_figure1(args.bits, args.samples, args.seed, points=args.points, threads=args.threads)
    with _output(args.out) as f:
        write_csv(f, res.columns, res.rows(), _preamble(args))
    for s in res.summaries.values():
        print(s.line(), file=_summary_stream(args))


def cmd_fig2(args) -> None:
    res = run_figure2(args.bits, args.samples, args.seed, inner=Mode(args.inner), threads=args.threads)
    with _output(args.out) as f:
        write_csv(f, res.columns, res.rows(), _preamble(args))
    for s in res.summaries.values():
        print(s.line(), file=_summary_stream(args))


def cmd_qat(args) -> None:
    fmt = _resolve_format(args)
    cfg = QatConfig(
        problem=args.problem,
        mode=args.mode,
        sr_bits=args.bits,
        inner=args.inner,
        weight_format=fmt,
        update_precision=args.update_precision,
        steps=args.steps,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
        replicas=args.replicas,
    )
    trace = run_qat(cfg, threads=args.threads)
    with _output(args.out) as f:
        trace.write(f)
    print(trace.summary(), file=_summary_stream(args))


# --- parser ------------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="fbsr", description="Few-bit stochastic rounding: emulation, bias analysis, sweeps."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value file; command-line flags override it")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps (default 1)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    subs = {}

    p = sub.add_parser("formats", help="list preset formats")
    p.set_defaults(func=cmd_formats)
    subs["formats"] = p

    p = sub.add_parser("round", help="round a value into a format")
    _add_format_args(p, default="binary8p4")
    p.add_argument("--mode", choices=MODES, default="tne", help="rounding mode (default tne)")
    p.add_argument("--bits", type=int, help="random bits N for srff/srf/src")
    p.add_argument("--inner", choices=["tne", "tno"], default="tne", help="SRC pre-round ties (default tne)")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed, counter start, or fixed draw")
    p.add_argument("--bit-source", choices=["prng", "counter", "fixed"], default="prng")
    p.add_argument("--value", help="value to round: decimal, p/q, or anything float() accepts")
    p.add_argument("--count", type=int, default=1, help="number of roundings (successive draws)")
    p.set_defaults(func=cmd_round)
    subs["round"] = p

    p = sub.add_parser("bias", help="bias of an SR variant")
    p.add_argument("--variant", choices=VARIANTS, default="srff")
    p.add_argument("--bits", type=int, default=3, help="random bits N (default 3)")
    p.add_argument("--excess", type=int, help="excess input bits D; omit for infinite precision")
    p.add_argument("--src-format", help="source preset; D = P_src - P_dst")
    p.add_argument("--dst-format", help="destination preset (mc default p3)")
    p.add_argument("--method", choices=METHODS, default="exact")
    p.add_argument("--inner", choices=["tne", "tno"], default="tne")
    p.add_argument("--samples", type=int, default=10000, help="mc samples per grid point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lo", default="1", help="mc interval start (default 1)")
    p.add_argument("--hi", help="mc interval end (default: one destination ulp, or one binade)")
    p.add_argument("--points", type=int, default=1024, help="mc midpoint grid size without a source format")
    p.add_argument("--out", help="mc CSV path (x,mean,bias)")
    p.set_defaults(func=cmd_bias)
    subs["bias"] = p

    p = sub.add_parser("fig1", help="SRFF/SRF sweep over real values in one binade")
    p.add_argument("--bits", type=int, default=2)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=1024)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_fig1)
    subs["fig1"] = p

    p = sub.add_parser("fig2", help="SRFF/SRF/SRC sweep over BFloat16 inputs into precision 3")
    p.add_argument("--bits", type=int, default=3)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inner", choices=["tne", "tno"], default="tne")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_fig2)
    subs["fig2"] = p

    p = sub.add_parser("qat", help="quantization-aware training toy")
    p.add_argument("--problem", choices=["drift", "linreg"], default="drift")
    _add_format_args(p, default="binary8p4")
    p.add_argument("--mode", choices=MODES, default="srff")
    p.add_argument("--bits", type=int, default=3)
    p.add_argument("--inner", choices=["tne", "tno"], default="tne")
    p.add_argument("--update-precision", type=int, default=8, help="update precision Q (default 8)")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.3, help="linreg learning rate")
    p.add_argument("--weight-decay", type=float, default=0.0, help="linreg decoupled weight decay")
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_qat)
    subs["qat"] = p
    return parser, subs


def read_config(path: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key == "help":
            raise UsageError(f"unknown config key {key!r} for this command")
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config {key}={value!r} is not one of {', '.join(action.choices)}")
    sub.set_defaults(**values)


def main(argv: list[str] | None = None) -> int:
    parser, subs = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        if args.config:
            _apply_config(subs[args.command], read_config(args.config))
            args = parser.parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        args.func(args)
    except UsageError as exc:
        subs.get(args.command, parser).print_usage(sys.stderr)
        print(f"fbsr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"fbsr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
