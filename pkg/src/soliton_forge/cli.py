"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numerical failure.  All CSV output is space separated with 17
significant digits and LF line endings; identical arguments give
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .assembler import evaluate_psi
from .errors import (
    DegenerateNormError,
    DomainError,
    FocalPointError,
    RangeError,
    ScenarioError,
    SolitonForgeError,
    UnsupportedRegimeError,
)
from .feshbach import field_program, synchronization_residual, write_field_program
from .profile import profile_eval
from .scenarios import (
    _feshbach_inputs,
    build_solution,
    grid_spec,
    load_scenario,
    run_scenario,
    scenario_catalog,
)
from .verifier import FieldGrid, GridSpec, l2_relative_error, split_step_propagate, write_field_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
_FMT = "%.16e"
PHASE_HEADER = "t mu alpha beta gamma delta epsilon kappa xi"
_USAGE_ERRORS = (ScenarioError, DomainError, RangeError, UnsupportedRegimeError, DegenerateNormError)


class _UsageError(Exception):
    pass


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soliton-forge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=True):
        sp.add_argument("--scenario", required=True, help="catalog name or path to a scenario TOML file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        if grid:
            sp.add_argument("--grid-L", type=_positive(float), help="half-width of the x window")
            sp.add_argument("--grid-N", type=_positive(int), help="number of x nodes (power of two)")
            sp.add_argument("--t-max", type=_positive(float), help="final time")
            sp.add_argument("--dt", type=_positive(float), help="split-step time step")
            sp.add_argument("--tol", type=_positive(float), help="override every check tolerance")

    common(sub.add_parser("solve", help="evaluate the exact solution on a grid"))
    v = sub.add_parser("verify", help="run the scenario verification plan")
    common(v)
    v.add_argument("--only", nargs="+", metavar="CHECK", help="run only these checks")
    v.add_argument("--skip", nargs="+", default=[], metavar="CHECK", help="skip these checks")
    v.add_argument("--perturb-h0", type=float, metavar="FACTOR",
                   help="scale h0 in the emitted nonlinearity law (sensitivity run)")
    pr = sub.add_parser("propagate", help="split-step evolution of the scenario initial data")
    common(pr)
    pr.add_argument("--frames", type=_positive(int), default=11, help="number of stored time frames")
    pf = sub.add_parser("profile", help="tabulate the profile F(z)")
    common(pf, grid=False)
    pf.add_argument("--z-min", type=float, default=-20.0)
    pf.add_argument("--z-max", type=float, default=20.0)
    pf.add_argument("--samples", type=_positive(int), default=2001)
    fe = sub.add_parser("feshbach", help="magnetic-field program realizing the nonlinearity law")
    common(fe)
    fe.add_argument("--samples", type=_positive(int), default=401)
    sub.add_parser("catalog", help="list bundled scenarios")
    return p


# ---------------------------------------------------------------------------

def _scenario(args):
    s = load_scenario(args.scenario)
    if hasattr(args, "grid_N"):
        s = s.with_overrides(L=args.grid_L, N=args.grid_N, t_max=args.t_max, dt=args.dt, tol=args.tol)
    return s


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _savetxt(path, rows, header):
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, np.asarray(rows, dtype=float), fmt=_FMT, delimiter=" ", header=header, comments="")


def _manifest(path, args, scenario, extra=None):
    data = {
        "soliton_forge": __version__,
        "command": args.command,
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out")},
        "scenario": scenario.as_dict(),
    }
    if extra:
        data.update(extra)
    with open(path, "w", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _phase_rows(sol, t):
    st = sol.state(t)
    cols = [st.t, st.mu, st.alpha, st.beta, st.gamma, st.delta, st.epsilon, st.kappa, st.xi]
    return np.column_stack([np.broadcast_to(np.asarray(c, dtype=float), t.shape) for c in cols])


def cmd_solve(args) -> int:
    s = _scenario(args)
    sol = build_solution(s)
    spec = grid_spec(s)
    field = FieldGrid.sample(lambda x, t: evaluate_psi(sol, x, t), spec)
    out = _outdir(args)
    write_field_csv(out / "field.csv", field)
    t_phase = np.linspace(0.0, float(spec.t_nodes[-1]), len(spec.t_nodes))
    _savetxt(out / "phase.csv", _phase_rows(sol, t_phase), PHASE_HEADER)
    _manifest(out / "manifest.json", args, s, {
        "grid": {"L": spec.L, "N": spec.N, "t0": float(spec.t_nodes[0]), "t1": float(spec.t_nodes[-1]),
                 "nt": len(spec.t_nodes)},
        "caustic": sol.caustic,
        "profile": sol.profile.describe(),
        "coefficients": sol.coeffs.describe(),
    })
    print(f"wrote field.csv, phase.csv and manifest.json to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    s = _scenario(args)
    factor = 1.0 if args.perturb_h0 is None else args.perturb_h0
    report = run_scenario(s, only=args.only, skip=args.skip, h0_factor=factor)
    out = _outdir(args)
    with open(out / "verify.csv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter=" ", lineterminator="\n")
        w.writerow(["name", "value", "tolerance", "relation", "pass"])
        for c in report.checks:
            w.writerow([c.name, _FMT % c.value, _FMT % c.tolerance, c.relation, "PASS" if c.passed else "FAIL"])
    _manifest(out / "manifest.json", args, s, {"passed": report.passed})
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:30s} {c.value:.3e} {c.relation} {c.tolerance:.1e}  {c.detail}")
    print(f"{s.name}: {sum(c.passed for c in report.checks)}/{len(report.checks)} checks passed")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_propagate(args) -> int:
    s = _scenario(args)
    sol = build_solution(s)
    opt = s.checks.get("propagation", {})
    L = float(args.grid_L or opt.get("L", s.grid.get("L", 20.0)))
    N = int(args.grid_N or opt.get("N", s.grid.get("N", 512)))
    if N & (N - 1):
        raise _UsageError(f"--grid-N must be a power of two for propagate, got {N}")
    t_end = float(args.t_max or opt.get("t_end", 1.0))
    dt = float(args.dt or opt.get("dt", 1e-3))
    x = GridSpec(L, N, [0.0]).x_nodes
    psi0 = FieldGrid(x, [0.0], evaluate_psi(sol, x, 0.0))
    frames = np.linspace(0.0, t_end, args.frames)
    res = split_step_propagate(psi0, sol.coeffs, sol.laws, t_end, dt, store_times=frames)
    out = _outdir(args)
    write_field_csv(out / "field.csv", res)
    errors = [l2_relative_error(res.values[i], evaluate_psi(sol, x, t)) for i, t in enumerate(res.t_nodes)]
    _savetxt(out / "propagation.csv", np.column_stack([res.t_nodes, errors]), "t l2_relative_error")
    _manifest(out / "manifest.json", args, s, {"L": L, "N": N, "t_end": t_end, "dt": dt,
                                               "steps": res.meta.get("steps")})
    print(f"propagated to t={t_end} with dt={dt}: final L2 relative error vs exact {errors[-1]:.3e}")
    return EXIT_OK


def cmd_profile(args) -> int:
    s = _scenario(args)
    sol = build_solution(s)
    z = np.linspace(args.z_min, args.z_max, args.samples)
    F, dF = profile_eval(sol.profile, z)
    out = _outdir(args)
    _savetxt(out / "profile.csv", np.column_stack([z, F, dF]), "z F dF")
    _manifest(out / "manifest.json", args, s, {"profile": sol.profile.describe()})
    print(f"wrote profile.csv ({args.samples} samples) to {out}")
    return EXIT_OK


def cmd_feshbach(args) -> int:
    s = _scenario(args)
    sol = build_solution(s)
    p, consts, mu, Lam = _feshbach_inputs(s, sol)
    t1 = min(float(s.grid.get("t1", 1.0)), sol.validity_end * (1 - 1e-6))
    taus = np.linspace(0.0, t1, args.samples)
    rows, poles = field_program(mu, Lam, consts, p, taus)
    sync = synchronization_residual(mu, Lam, consts, p, rows[:, 0]) if len(rows) else 0.0
    out = _outdir(args)
    write_field_program(out / "bfield.csv", rows)
    report = {"synchronization_residual": sync, "poles": poles, "rows": int(len(rows)),
              "omitted_rows": int(len(taus) - len(rows))}
    with open(out / "feshbach_report.json", "w", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _manifest(out / "manifest.json", args, s, {"feshbach_params": asdict(p)})
    print(f"wrote bfield.csv ({len(rows)} rows, {len(poles)} pole(s)); synchronization residual {sync:.3e}")
    return EXIT_OK


def cmd_catalog(args) -> int:
    for s in scenario_catalog():
        print(f"{s.name:26s} {s.description}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "propagate": cmd_propagate,
    "profile": cmd_profile,
    "feshbach": cmd_feshbach,
    "catalog": cmd_catalog,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (_UsageError, *_USAGE_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FocalPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SolitonForgeError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
