"""Command-line entry point ``vemsg``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import harness
from .mesh import check_regularity, generate_distorted_quads, generate_nonconvex, generate_voronoi, write_mesh


def _rect(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected xmin,xmax,ymin,ymax")
    return tuple(parts)


def _floats(text: str):
    return tuple(float(_fraction(v)) for v in text.split(","))


def _fraction(text: str) -> float:
    """``"1/40"`` -> 0.025; plain numbers pass through."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _ints(text: str):
    return tuple(int(v) for v in text.split(","))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vemsg", description="Virtual element solver for the damped sine-Gordon equation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = msub.add_parser("gen", help="generate a mesh file")
    gen.add_argument("--family", choices=["voronoi", "distorted", "nonconvex"], required=True)
    gen.add_argument("--n", type=int, required=True, help="cell count (voronoi) or grid columns and rows")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--lloyd", type=int, default=100, help="Lloyd iterations (voronoi)")
    gen.add_argument("--distortion", type=float, default=0.3, help="node perturbation (distorted)")
    gen.add_argument("--rect", type=_rect, default=(0.0, 1.0, 0.0, 1.0), help="xmin,xmax,ymin,ymax")
    gen.add_argument("--out", required=True)

    solve = sub.add_parser("solve", help="run an experiment described by a key = value config file")
    solve.add_argument("--config", required=True)
    _common(solve)

    sweep = sub.add_parser("sweep", help="convergence sweep for test 1, 2 or 3")
    sweep.add_argument("--test", choices=["1", "2", "3"], required=True)
    sweep.add_argument("--family", choices=harness.MESH_FAMILIES, default="voronoi")
    sweep.add_argument("--sizes", type=_ints, help="comma-separated cell counts or grid sizes")
    sweep.add_argument("--dt", type=_floats, help="comma-separated time steps, e.g. 1/5,1/10")
    sweep.add_argument("--lloyd", type=int, default=100)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--second-order-start", action=argparse.BooleanOptionalAction, default=None)
    _common(sweep)

    sol = sub.add_parser("solitons", help="ring-soliton collision on the quarter domain")
    sol.add_argument("--cells", type=int, default=harness.DEFAULT_SIZES["solitons"][0])
    sol.add_argument("--T", type=float, default=11.0)
    sol.add_argument("--dt", type=float, default=0.01)
    sol.add_argument("--lloyd", type=int, default=100)
    sol.add_argument("--seed", type=int, default=0)
    _common(sol)
    return p


def _common(p):
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--check", action="store_true", help="exit with status 1 if an acceptance window fails")
    p.add_argument("--no-timing", action="store_true", help="leave the seconds column empty")


def _report(tables, checks, check: bool) -> int:
    for stem, recs in tables.items():
        print(f"[{stem}]")
        print("  " + " ".join(f"{c:>11}" for c in harness.CSV_HEADER))
        for r in recs:
            row = [r.h, r.dt, r.dofs, r.l2_error, r.h1_error, r.rate_l2, r.rate_h1, r.newton_max, r.wall_seconds]
            print("  " + " ".join(f"{'-' if v is None else format(v, '.4g'):>11}" for v in row))
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}")
    return 1 if (check and failed) else 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "mesh":
        if args.family == "voronoi":
            mesh = generate_voronoi(args.rect, args.n, args.lloyd, args.seed)
        elif args.family == "distorted":
            mesh = generate_distorted_quads(args.n, args.n, args.distortion, args.seed, args.rect)
        else:
            mesh = generate_nonconvex(args.n, args.n, args.rect)
        write_mesh(mesh, args.out)
        q = check_regularity(mesh)
        print(
            f"{args.out}: {mesh.n_cells} cells, {mesh.n_vertices} vertices, h = {mesh.mesh_size:.6g}, "
            f"min edge ratio = {q.min_edge_ratio:.4g}, min star ratio = {q.min_star_ratio:.4g}"
        )
        return 0

    if args.command == "solve":
        config = harness.ExperimentConfig.from_file(args.config)
        config = replace(config, output_dir=args.out, timing=config.timing and not args.no_timing)
    elif args.command == "sweep":
        kw = dict(
            test_id=f"test{args.test}",
            mesh_family=args.family,
            lloyd_iterations=args.lloyd,
            seed=args.seed,
            second_order_start=args.second_order_start,
            output_dir=args.out,
            timing=not args.no_timing,
        )
        if args.sizes:
            kw["sizes"] = args.sizes
        if args.dt:
            kw["dts"] = args.dt
        if args.test == "2":
            kw["treatments"] = harness.TREATMENTS
        config = harness.ExperimentConfig(**kw)
    else:
        config = harness.ExperimentConfig(
            test_id="solitons",
            sizes=(args.cells,),
            T=args.T,
            dts=(args.dt,),
            lloyd_iterations=args.lloyd,
            seed=args.seed,
            output_dir=args.out,
            timing=not args.no_timing,
        )
    tables, checks = harness.execute(config)
    return _report(tables, checks, args.check)


if __name__ == "__main__":
    sys.exit(main())
