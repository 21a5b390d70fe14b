"""Command-line driver for the convergence study."""

from __future__ import annotations

import argparse
import sys

from .study import StudyConfig, format_report, run_study


def build_parser():
    parser = argparse.ArgumentParser(
        prog="surfbiharm",
        description="Unfitted C0 interior penalty solver for the surface "
        "biharmonic equation on the unit sphere.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="run the refinement/convergence study")
    st.add_argument("--case", choices=["paper", "harmonic"], default="paper")
    st.add_argument("--variant", type=int, choices=[0, 1, 2], default=0)
    st.add_argument("--levels", type=int, default=4)
    st.add_argument("--cells0", type=int, default=8)
    st.add_argument("--sigma", type=float, default=10.0)
    st.add_argument("--gamma", type=float, default=10.0)
    st.add_argument("--beta", type=float, default=10.0)
    st.add_argument("--box", type=float, default=1.2,
                    help="half-width of the background cube")
    st.add_argument("--tol", type=float, default=1e-10)
    st.add_argument("--format", choices=["csv", "md"], default="csv")
    st.add_argument("--out", default=None, help="output path (default stdout)")
    st.add_argument("--export-surface", default=None,
                    help="write the finest discrete surface as a triangle soup")
    st.add_argument("--reference-mode", action="store_true",
                    help="deterministic single-threaded execution")
    st.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "study":
        config = StudyConfig(
            case=args.case,
            variant=args.variant,
            levels=args.levels,
            cells0=args.cells0,
            sigma=args.sigma,
            gamma=args.gamma,
            beta=args.beta,
            box=args.box,
            tol=args.tol,
            export_surface=args.export_surface,
            reference_mode=args.reference_mode,
            verbose=not args.quiet,
        )
        report = run_study(config)
        text = format_report(report, fmt=args.format)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if report.aborted:
            print(f"aborted: {report.aborted}", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
