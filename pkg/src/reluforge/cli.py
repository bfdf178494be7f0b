"""Command-line entry point: ``reluforge <command> ...``.

Exit status is 0 on success, 1 when arguments fail validation and 2 when the
work itself fails. Errors are printed as a single ``error: ...`` line.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import constructors as C
from ._io import write_atomic
from .circuit import compile_circuit, parse_circuit
from .legendre import a2_lower_bound, legendre_report, quad_lower_bound, strongly_convex_lower_bound
from .network import evaluate, load, save
from .pwl import LineRestriction, optimal_pwl_oracle, region_bound, restrict_to_line

__all__ = ["main", "run", "build_parser", "named_function"]


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


_NAMED = {
    "x2": lambda x: x * x,
    "exp": np.exp,
    "sin3": lambda x: np.sin(3.0 * x),
}


def named_function(spec: str):
    """``x2``, ``exp``, ``sin3`` or ``poly:c0,c1,...`` (ascending coefficients)."""
    if spec.startswith("poly:"):
        coef = _floats(spec[5:])
        if not coef:
            raise UsageError("poly: needs at least one coefficient")
        return np.polynomial.Polynomial(coef)
    if spec in _NAMED:
        return _NAMED[spec]
    raise UsageError(f"unknown function {spec!r}; choose from {sorted(_NAMED)} or poly:c0,c1,...")


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _csv(header, rows) -> str:
    lines = [", ".join(header)]
    lines += [", ".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# --- commands -----------------------------------------------------------------------


def cmd_build(args) -> int:
    kind = args.kind
    if kind in ("multiplier", "square"):
        kw = {"max_bits": args.max_bits}
        if args.bits is not None:
            kw["bits"] = args.bits
        if args.delta is not None:
            kw["delta"] = args.delta
        net = (C.multiplier if kind == "multiplier" else C.square)(args.M, args.eps, **kw)
    elif kind == "ball":
        net = C.ball_indicator(args.d, args.delta, args.shell, inside=args.inside)
    elif kind == "circuit":
        circuit = parse_circuit(Path(args.spec).read_text())
        net = compile_circuit(circuit, args.eps).network
    elif kind == "l1radial":
        f = C.RadialPWL(args.c, args.a, args.knots or [], args.jumps or [])
        net = C.l1_radial(f, args.d)
    else:
        net = C.triangle_wave(args.i)
    save(net, args.out)
    print(f"wrote {args.out}: input={net.input_dim} depth={net.depth} width={net.width} params={net.n_params}")
    return 0


def cmd_eval(args) -> int:
    net = load(args.net)
    x = np.asarray(args.x, dtype=np.float64)
    if x.size % net.input_dim:
        raise UsageError(f"--x has {x.size} values, not a multiple of the input dimension {net.input_dim}")
    out = evaluate(net, x.reshape(-1, net.input_dim))
    for row in out:
        print(", ".join(f"{v:.12g}" for v in row))
    return 0


def _line_for(net, args) -> LineRestriction:
    d = net.input_dim
    p = np.zeros(d) if args.start is None else np.asarray(args.start)
    if args.end is None:
        q = np.zeros(d)
        q[0] = 1.0
    else:
        q = np.asarray(args.end)
    if p.size != d or q.size != d:
        raise UsageError(f"--from and --to need {d} coordinates")
    return LineRestriction.through(p, q)


def cmd_inspect(args) -> int:
    net = load(args.net)
    summary = [("input_dim", net.input_dim), ("depth", net.depth), ("width", net.width), ("params", net.n_params)]
    text = _csv(["quantity", "value"], summary)
    if not args.summary_only:
        if net.output_dim != 1:
            raise UsageError("segment extraction needs a scalar-output network; use --summary-only")
        line = _line_for(net, args)
        pwl = restrict_to_line(net, line)
        bound = region_bound(net.width, net.depth)
        text = _csv(
            ["quantity", "value"],
            summary + [("segments", pwl.n_segments), ("region_bound", bound), ("line_length", line.b)],
        )
        rows = zip(pwl.breakpoints.tolist(), pwl.slopes[:-1].tolist(), pwl.slopes[1:].tolist())
        text += "\n" + _csv(["t_break", "slope_left", "slope_right"], rows)
    _emit(text, args.out)
    return 0


def cmd_bounds(args) -> int:
    if not args.ell > 0:
        raise UsageError("--ell must be positive")
    f = named_function(args.f)
    rep = legendre_report(f, args.a, args.ell, args.K)
    text = _csv(["i", "a_i"], enumerate(rep.coefficients.tolist()))
    rows = [
        ("linear_fit_error", rep.linear_fit_error),
        ("tail_estimate", rep.tail_estimate),
        ("norm_sq", rep.norm_sq),
    ]
    if args.lam is not None:
        rows.append(("a2_floor", a2_lower_bound(args.lam, args.ell)))
        rows.append((f"strong_convexity_floor_n{args.n}", strongly_convex_lower_bound(args.lam, args.n)))
    if args.p2 is not None:
        rows.append((f"quadratic_floor_n{args.n}", quad_lower_bound(args.p2, args.n)))
    text += "\n" + _csv(["quantity", "value"], rows)
    _emit(text, args.out)
    return 0


def cmd_oracle(args) -> int:
    f = named_function(args.f)
    grid = args.grid if args.grid is not None else 400 * args.n
    res = optimal_pwl_oracle(
        f, args.n, grid, domain=(args.a, args.b), continuous=args.continuous, backend=args.backend
    )
    text = _csv(
        ["n", "grid_resolution", "pieces", "error", "backend"],
        [(args.n, grid, res.pieces, res.error, res.backend)],
    )
    text += "\n" + _csv(["knot"], [(float(k),) for k in res.breakpoints])
    _emit(text, args.out)
    return 0


def cmd_slab(args) -> int:
    from .sampling import slab_probability

    d = args.d
    if d < 2:
        raise UsageError("--d must be at least 2")
    if args.w is None:
        w = np.zeros(d)
        w[0] = d
    else:
        w = np.asarray(args.w)
        if w.size != d:
            raise UsageError(f"--w has {w.size} entries, expected {d}")
    full = slab_probability(w, args.eps, d, args.samples, args.seed)
    half = slab_probability(w, args.eps / 2, d, args.samples, args.seed)
    ratio = full.estimate / half.estimate if half.estimate > 0 else float("nan")
    rows = [
        (args.eps, full.estimate, full.half_width, full.acceptance_rate),
        (args.eps / 2, half.estimate, half.half_width, half.acceptance_rate),
    ]
    text = _csv(["eps", "estimate", "ci95_half_width", "acceptance_rate"], rows)
    text += "\n" + _csv(["quantity", "value"], [("ratio", ratio)])
    _emit(text, args.out)
    return 0


def cmd_experiment(args) -> int:
    from .experiment import TrainConfig, curve_csv, depth_vs_width_sweep, summary_csv, sweep_architectures

    if not 0 < args.scale <= 1:
        raise UsageError("--scale must lie in (0, 1]")
    seeds = list(range(args.seed, args.seed + args.seeds))
    archs = sweep_architectures(args.scale, tuple(args.deep))
    base = TrainConfig(max_batches=args.batches, decay_period=args.decay_period)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = depth_vs_width_sweep(args.d, args.scale, seeds, archs=archs, base=base)
    for (seed, arch), run in sorted(res.runs.items()):
        write_atomic(out / f"run_{arch}_seed{seed}.csv", curve_csv(run))
    write_atomic(out / "summary.csv", summary_csv(res.rows))
    names = ["-".join(map(str, a)) for a in archs]
    verdicts = res.verdicts(names[0], names[1:])
    print(_csv(["seed", "deep_wins", "diminishing"], [(s, v["deep_wins"], v["diminishing"]) for s, v in verdicts.items()]), end="")
    return 0


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reluforge", description="Build, inspect and analyse ReLU network constructions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct a network and save it")
    bsub = b.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in ("multiplier", "square"):
        q = bsub.add_parser(kind, help=f"{kind} network on [-M, M]")
        q.add_argument("--M", type=_finite, required=True, help="input magnitude bound")
        q.add_argument("--eps", type=_finite, required=True, help="target sup error off the bad set")
        q.add_argument("--bits", type=_positive_int, help="override the extracted bit count (drops the eps guarantee)")
        q.add_argument("--delta", type=_finite, help="override the threshold band width")
        q.add_argument("--max-bits", type=_positive_int, default=C.DEFAULT_MAX_BITS, help="bit-count cap")
        q.add_argument("--out", required=True, help="output network file")
    q = bsub.add_parser("ball", help="unit-ball indicator")
    q.add_argument("--d", type=_positive_int, required=True, help="input dimension")
    q.add_argument("--delta", type=_finite, required=True, help="L2 error target")
    q.add_argument("--shell", type=_finite, required=True, help="shell half-width in squared norm")
    q.add_argument("--inside", action="store_true", help="output ~1 inside the ball instead of outside")
    q.add_argument("--out", required=True, help="output network file")
    q = bsub.add_parser("circuit", help="compile an arithmetic circuit file")
    q.add_argument("--spec", required=True, help="circuit file")
    q.add_argument("--eps", type=_finite, required=True, help="target sup error")
    q.add_argument("--out", required=True, help="output network file")
    q = bsub.add_parser("l1radial", help="exact f(||x||_1) for piecewise-linear f")
    q.add_argument("--d", type=_positive_int, required=True, help="input dimension")
    q.add_argument("--c", type=_finite, default=0.0, help="constant term")
    q.add_argument("--a", type=_finite, default=0.0, help="initial slope")
    q.add_argument("--knots", type=_floats, help="comma-separated knots")
    q.add_argument("--jumps", type=_floats, help="comma-separated slope jumps")
    q.add_argument("--out", required=True, help="output network file")
    q = bsub.add_parser("triangle", help="triangle wave phi^i")
    q.add_argument("--i", type=_positive_int, required=True, help="number of compositions")
    q.add_argument("--out", required=True, help="output network file")

    q = sub.add_parser("eval", help="evaluate a saved network")
    q.add_argument("--net", required=True, help="network file")
    q.add_argument("--x", type=_floats, required=True, help="comma-separated inputs, row-major")

    q = sub.add_parser("inspect", help="size summary and line-restriction breakpoints")
    q.add_argument("net", help="network file")
    q.add_argument("--from", dest="start", type=_floats, help="line start point (default 0)")
    q.add_argument("--to", dest="end", type=_floats, help="line end point (default e1)")
    q.add_argument("--summary-only", action="store_true", help="skip segment extraction")
    q.add_argument("--out", help="write CSV here instead of stdout")

    q = sub.add_parser("bounds", help="Fourier-Legendre report and closed-form floors")
    q.add_argument("--f", required=True, help="x2, exp, sin3 or poly:c0,c1,...")
    q.add_argument("--a", type=_finite, default=0.0, help="interval start")
    q.add_argument("--ell", type=_finite, default=1.0, help="interval length")
    q.add_argument("--K", type=_positive_int, default=20, help="highest coefficient index")
    q.add_argument("--lam", type=_finite, help="strong convexity parameter")
    q.add_argument("--p2", type=_finite, help="leading coefficient of a quadratic")
    q.add_argument("--n", type=_positive_int, default=1, help="piece count for the floors")
    q.add_argument("--out", help="write CSV here instead of stdout")

    q = sub.add_parser("oracle", help="best n-piece linear fit on a knot grid")
    q.add_argument("--f", required=True, help="x2, exp, sin3 or poly:c0,c1,...")
    q.add_argument("--n", type=_positive_int, required=True, help="maximum number of pieces")
    q.add_argument("--grid", type=_positive_int, help="grid resolution (default 400 n)")
    q.add_argument("--a", type=_finite, default=0.0, help="domain start")
    q.add_argument("--b", type=_finite, default=1.0, help="domain end")
    q.add_argument("--continuous", action="store_true", help="refit the partition continuously")
    q.add_argument("--backend", choices=["cython", "python"], help="DP kernel (default: fastest available)")
    q.add_argument("--out", help="write CSV here instead of stdout")

    q = sub.add_parser("slab", help="slab probability under the L1 sphere sampler")
    q.add_argument("--d", type=_positive_int, required=True, help="dimension")
    q.add_argument("--eps", type=_finite, required=True, help="slab width")
    q.add_argument("--w", type=_floats, help="weight vector (default d e1)")
    q.add_argument("--samples", type=_positive_int, default=100_000, help="Monte-Carlo samples")
    q.add_argument("--seed", type=int, default=0, help="random seed")
    q.add_argument("--out", help="write CSV here instead of stdout")

    q = sub.add_parser("experiment", help="depth-versus-width training sweep")
    q.add_argument("--d", type=_positive_int, default=20, help="input dimension")
    q.add_argument("--scale", type=_finite, default=0.2, help="sample and width scale in (0, 1]")
    q.add_argument("--seeds", type=_positive_int, default=5, help="number of seeds")
    q.add_argument("--seed", type=int, default=0, help="first seed")
    q.add_argument("--batches", type=_positive_int, default=30_000, help="training batches per run")
    q.add_argument("--decay-period", type=_positive_int, default=1000, help="batches per lr decay step")
    q.add_argument("--deep", type=_positive_int, nargs=2, default=[100, 20], help="3-layer hidden widths")
    q.add_argument("--out-dir", required=True, help="directory for run and summary CSVs")
    return p


_COMMANDS = {
    "build": cmd_build,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
    "bounds": cmd_bounds,
    "oracle": cmd_oracle,
    "slab": cmd_slab,
    "experiment": cmd_experiment,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
