"""Command-line figure rendering.

One subcommand per figure kind (trajectory, envelope, sweep,
quadrotor).  Inputs are the armpc export files; output is a PNG/SVG
path (default: next to the first input).  Exit codes: 0 rendered,
2 missing or schema-mismatched input.
"""

import argparse
import os
import sys
from dataclasses import dataclass, field

from matplotlib import pyplot as plt

from . import figures, io
from .io import SchemaError

__all__ = ["PlotJob", "render", "main"]

KINDS = ("trajectory", "envelope", "sweep", "quadrotor")


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: tuple
    out: str
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("no input files")


def _default_out(job_inputs, kind):
    stem, _ = os.path.splitext(job_inputs[0])
    return f"{stem}_{kind}.png"


def render(job):
    """Load, validate, draw, save.  Returns the output path."""
    if job.kind == "trajectory":
        trace = io.load_trace(job.inputs[0])
        sets = (io.load_sets(job.aux["sets"])
                if job.aux.get("sets") else None)
        fig = figures.plot_trajectory(trace, sets)
    elif job.kind == "envelope":
        fig = figures.plot_envelope(io.load_envelope(job.inputs[0]))
    elif job.kind == "sweep":
        fig = figures.plot_sweep(io.load_sweep(job.inputs[0]),
                                 xlabel=job.aux.get("xlabel",
                                                    "parameter value"))
    else:
        traces = [io.load_trace(p) for p in job.inputs]
        wind = io.load_wind(job.aux["wind"])
        fig = figures.plot_quadrotor(traces, wind)
    fig.savefig(job.out, dpi=150)
    plt.close(fig)
    return job.out


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="armpc-viz",
        description="Render figures from armpc export files")
    sub = parser.add_subparsers(dest="command", required=True)

    p_traj = sub.add_parser("trajectory",
                            help="state-space path with tubes")
    p_traj.add_argument("trace", help="trace CSV")
    p_traj.add_argument("--sets", default=None,
                        help="sets JSON (tubes + terminal set)")
    p_traj.add_argument("--out", default=None)

    p_env = sub.add_parser("envelope", help="feasible fractions")
    p_env.add_argument("envelope", help="envelope JSON")
    p_env.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="cost vs parameter")
    p_sweep.add_argument("sweep", help="sweep CSV")
    p_sweep.add_argument("--xlabel", default="parameter value")
    p_sweep.add_argument("--out", default=None)

    p_quad = sub.add_parser("quadrotor",
                            help="xy-paths over learned wind")
    p_quad.add_argument("traces", nargs="+", help="trace CSVs")
    p_quad.add_argument("--wind", required=True,
                        help="learned wind grid JSON")
    p_quad.add_argument("--out", default=None)
    return parser


def _job_from_args(args):
    if args.command == "trajectory":
        inputs, aux = (args.trace,), {"sets": args.sets}
    elif args.command == "envelope":
        inputs, aux = (args.envelope,), {}
    elif args.command == "sweep":
        inputs, aux = (args.sweep,), {"xlabel": args.xlabel}
    else:
        inputs, aux = tuple(args.traces), {"wind": args.wind}
    out = args.out or _default_out(inputs, args.command)
    return PlotJob(kind=args.command, inputs=inputs, out=out, aux=aux)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        out = render(_job_from_args(args))
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
