"""Command line interface.

Exit status: 0 on success, 1 for configuration or input errors, 2 for
numerical failures (including runs that stop without converging).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .config import parse_config
from .errors import ConfigError, GPVortexError, MeshError, NumericError
from .params import from_coefficients
from .post import OutputError

log = logging.getLogger("gpvortex")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def bundled_cases() -> dict:
    """``{name: {method: (physics_path, run_path)}}`` for the packaged examples."""
    root = resources.files("gpvortex") / "cases"
    cases: dict = {}
    for entry in root.iterdir():
        name = entry.name
        if not name.endswith("_physics.dat"):
            continue
        case = name[: -len("_physics.dat")]
        for run in root.iterdir():
            prefix = f"{case}_run_"
            if run.name.startswith(prefix) and run.name.endswith(".dat"):
                method = run.name[len(prefix) : -4]
                cases.setdefault(case, {})[method] = (Path(str(entry)), Path(str(run)))
    return cases


def _run_files(physics, run, root) -> int:
    from .runner import run as run_case

    cfg = parse_config(physics, run)
    res = run_case(cfg, root=root)
    count = "n/a" if res.vortices is None else res.vortices.count
    print(f"method={cfg.method} converged={res.converged} energy={res.energy:.12g} "
          f"vortices={count} vertices={res.u.mesh.n_vertices} wall={res.wall_time:.1f}s")
    print(f"outputs: {res.output_dir}")
    if not res.converged:
        print("error: solver stopped before reaching @EPS0", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_run(args) -> int:
    return _run_files(args.physics, args.run, args.root)


def cmd_examples(args) -> int:
    cases = bundled_cases()
    if args.name is None or args.list:
        for name in sorted(cases):
            print(f"{name}: methods {', '.join(sorted(cases[name]))}")
        return EXIT_OK
    if args.name not in cases:
        raise ConfigError(f"unknown example {args.name!r}; available: {', '.join(sorted(cases))}")
    methods = cases[args.name]
    if args.method not in methods:
        raise ConfigError(f"example {args.name!r} has no {args.method!r} run file")
    physics, run = methods[args.method]
    return _run_files(physics, run, args.root)


def cmd_tf_profile(args) -> int:
    from .tfinit import profile_for

    if args.physics:
        if not args.run:
            raise ConfigError("tf-profile with --physics also needs --run")
        p = parse_config(args.physics, args.run).model_params()
    else:
        if args.beta is None:
            raise ConfigError("tf-profile needs --physics/--run or --beta")
        p = from_coefficients(args.scaling, args.beta, args.omop, args.ax, args.ay, a_4=args.a4)
    prof = profile_for(p)
    summary = prof.summary()
    r_end = summary.get("r_max", summary.get("r_x"))
    r = np.linspace(0.0, r_end, args.points)
    rho = prof.density(r, 0.0 * r)
    print(json.dumps(summary, indent=2))
    if args.csv:
        try:
            np.savetxt(args.csv, np.column_stack([r, rho]), delimiter=",", header="r,rho", comments="")
        except OSError as exc:
            raise OutputError(f"cannot write {args.csv}: {exc}") from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpvortex", description="Stationary states of the rotating GP energy.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a physics/run parameter file pair")
    r.add_argument("--physics", required=True, type=Path)
    r.add_argument("--run", required=True, type=Path)
    r.add_argument("--root", default=".", type=Path, help="directory receiving Output/ (default: cwd)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("tf-profile", help="print the Thomas-Fermi profile")
    t.add_argument("--physics", type=Path)
    t.add_argument("--run", type=Path)
    t.add_argument("--scaling", default="Classical")
    t.add_argument("--beta", type=float)
    t.add_argument("--omop", type=float, default=0.0)
    t.add_argument("--ax", type=float, default=1.0)
    t.add_argument("--ay", type=float, default=1.0)
    t.add_argument("--a4", type=float, default=0.0)
    t.add_argument("--points", type=int, default=201)
    t.add_argument("--csv", type=Path, help="write r,rho samples along the x axis")
    t.set_defaults(func=cmd_tf_profile)

    e = sub.add_parser("examples", help="list or run a bundled example")
    e.add_argument("name", nargs="?")
    e.add_argument("--method", default="GradS", choices=["GradS", "Ipopt"])
    e.add_argument("--list", action="store_true")
    e.add_argument("--root", default=".", type=Path)
    e.set_defaults(func=cmd_examples)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MeshError, OutputError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GPVortexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
