"""Command-line interface.

Subcommands::

    ghd volume N R                     exact Hamming-ball volume (--log2 for its log)
    ghd bounds det N T                 deterministic-protocol cost bounds in bits
    ghd bounds stream N C P            streaming space floor for a c-approximation
    ghd bench PROTOCOL --config FILE   run a sweep, write csv/json records
    ghd demo stream                    worked example of the streaming reduction

Exit codes: 0 on success, 2 when a bench run produced any bound-violation
record (for CI gating), 64 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bits import ball_volume, hamming_distance, log2_ball_volume, random_pair_at_distance
from .covering import det_complexity_bounds
from .experiments import load_config, normalize_protocol, run_experiment
from .streaming import ExactBitmapF0, encode_streams, ghd_via_streaming, space_lower_bound, write_stream_fixture

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # keep exit code 2 reserved for bound violations
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(64, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="ghd", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    volume = sub.add_parser("volume", help="exact Hamming-ball volume")
    volume.add_argument("n", type=int)
    volume.add_argument("r", type=int)
    volume.add_argument("--log2", action="store_true", help="print log2 of the volume instead")

    bounds = sub.add_parser("bounds", help="theoretical bound calculators")
    bounds_sub = bounds.add_subparsers(dest="kind", required=True)
    det = bounds_sub.add_parser("det", help="deterministic-protocol cost bounds")
    det.add_argument("n", type=int)
    det.add_argument("t", type=int)
    stream = bounds_sub.add_parser("stream", help="streaming space floor")
    stream.add_argument("n", type=int)
    stream.add_argument("c", type=float)
    stream.add_argument("p", type=int)

    bench = sub.add_parser("bench", help="run a configured sweep")
    bench.add_argument("protocol", choices=["sampling", "sketch", "det", "stream"])
    bench.add_argument("--config", required=True, help="key-value config file")
    bench.add_argument("--out", help="write the report here instead of stdout")
    bench.add_argument("--jobs", type=int, default=1, help="parallel workers over grid points")
    bench.add_argument("--code-dir", help="det only: read-through cache of covering-code files")

    demo = sub.add_parser("demo", help="worked examples")
    demo_sub = demo.add_subparsers(dest="what", required=True)
    demo_stream = demo_sub.add_parser("stream", help="streaming reduction walkthrough")
    demo_stream.add_argument("--n", type=int, default=8)
    demo_stream.add_argument("--c", type=float, default=1.5)
    demo_stream.add_argument("--passes", type=int, default=1)
    demo_stream.add_argument("--seed", type=int, default=1)
    demo_stream.add_argument("--fixture-dir", help="also write token fixtures (one per line)")

    return parser


def _cmd_volume(args) -> int:
    if args.log2:
        print(repr(log2_ball_volume(args.n, args.r)))
    else:
        print(ball_volume(args.n, args.r))
    return 0


def _cmd_bounds(args) -> int:
    if args.kind == "det":
        lower, upper = det_complexity_bounds(args.n, args.t)
        print(f"lower_bits {lower!r}")
        print(f"upper_bits {upper!r}")
    else:
        bound = space_lower_bound(args.n, args.c, args.p)
        print(f"gap {bound.gap}")
        print(f"state_bits_floor {bound.state_bits_floor!r}")
        print(f"asymptotic {bound.asymptotic!r}")
    return 0


def _cmd_bench(args) -> int:
    config = load_config(args.config, protocol=normalize_protocol(args.protocol))
    if args.code_dir:
        from dataclasses import replace

        config = replace(config, code_dir=args.code_dir)
    report = run_experiment(config, jobs=args.jobs)
    text = report.render(config.output_format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 2 if report.has_violation else 0


def _cmd_demo_stream(args) -> int:
    n, c, passes = args.n, args.c, args.passes
    gap = math.ceil(n * (c - 1.0))
    x, _ = random_pair_at_distance(n, 0, args.seed)
    far_x, far_y = random_pair_at_distance(n, gap, args.seed + 1)

    def make() -> ExactBitmapF0:
        return ExactBitmapF0(2 * n, passes=passes)

    print(f"n={n} c={c} passes={passes} gap=ceil(n*(c-1))={gap}")
    for label, (a, b) in (("equal", (x, x)), ("far", (far_x, far_y))):
        u, v = encode_streams(a, b, n)
        output, run = ghd_via_streaming(make, c, a, b)
        print(f"-- {label}: x={a} y={b}")
        print(f"   u={u}")
        print(f"   v={v}")
        print(
            f"   distinct={run.distinct_count} (= n + distance = {n} + {hamming_distance(a, b)})"
        )
        print(
            f"   estimate={run.estimate} threshold=n+gap={n + gap} output={output}"
        )
        print(
            f"   state_bits={run.state_bits} handoffs={2 * passes - 1} "
            f"communication={run.communication_bits} <= 2pS={2 * passes * run.state_bits}"
        )
        if args.fixture_dir:
            directory = Path(args.fixture_dir)
            directory.mkdir(parents=True, exist_ok=True)
            write_stream_fixture(u, directory / f"{label}-u.tokens")
            write_stream_fixture(v, directory / f"{label}-v.tokens")
    if args.fixture_dir:
        print(f"fixtures written to {args.fixture_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "volume":
        return _cmd_volume(args)
    if args.command == "bounds":
        return _cmd_bounds(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "demo":
        return _cmd_demo_stream(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
