"""Named end-to-end scenarios and their verification plans.

A scenario is a TOML file with the sections ``[coefficients]``,
``[profile]``, ``[initial]``, ``[solution]``, ``[grid]``, optional
``[feshbach]`` and ``[checks.<name>]`` tables (one per verification).  The
schema is documented in ``scenario_files/README.md``; bundled scenarios are
listed by :func:`scenario_catalog`.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .assembler import (
    SolitonSolution,
    assemble,
    autonomous_residual,
    classical_trajectory,
    evaluate_psi,
)
from .characteristic import (
    PRESETS,
    QuadraticCoefficients,
    TabulatedCoefficient,
    free_particle,
    make_preset,
)
from .errors import ScenarioError, SolitonForgeError
from .feshbach import (
    FeshbachParams,
    SolitonConstants,
    field_program,
    synchronization_residual,
    trap_frequency_from_mu,
)
from .kernels import (
    PhaseState,
    bkernel_defect,
    continuity_defect,
    riccati_residuals,
    sample_trajectory,
)
from .profile import build_profile_m0, build_profile_m1, first_integral
from .verifier import (
    FieldGrid,
    GridSpec,
    SimpleLaws,
    l2_relative_error,
    pde_residual,
    split_step_propagate,
)

__all__ = [
    "Scenario",
    "CheckResult",
    "ScenarioReport",
    "scenario_catalog",
    "scenario_names",
    "load_scenario",
    "parse_scenario",
    "build_solution",
    "run_scenario",
    "CHECKS",
]

_PACKAGE_DIR = "scenario_files"


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    coefficients: dict
    profile: dict
    initial: dict
    solution: dict
    grid: dict
    checks: dict
    feshbach: dict | None = None
    source: str | None = None

    @property
    def horizon(self) -> float:
        return float(self.coefficients.get("horizon", 2.0))

    def with_overrides(self, L=None, N=None, t_max=None, dt=None, tol=None) -> "Scenario":
        grid = dict(self.grid)
        if L is not None:
            grid["L"] = float(L)
        if N is not None:
            grid["N"] = int(N)
        if t_max is not None:
            grid["t1"] = float(t_max)
        checks = {k: dict(v) for k, v in self.checks.items()}
        if dt is not None and "propagation" in checks:
            checks["propagation"]["dt"] = float(dt)
        if tol is not None:
            for name, c in checks.items():
                if "tol" in c:
                    c["tol"] = float(tol)
        coeffs = dict(self.coefficients)
        if t_max is not None and float(t_max) > self.horizon:
            coeffs["horizon"] = float(t_max)
        return replace(self, grid=grid, checks=checks, coefficients=coeffs)

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "description": self.description,
            "coefficients": self.coefficients,
            "profile": self.profile,
            "initial": self.initial,
            "solution": self.solution,
            "grid": self.grid,
            "checks": self.checks,
        }
        if self.feshbach is not None:
            out["feshbach"] = self.feshbach
        return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    relation: str = "<"
    detail: str = ""


@dataclass
class ScenarioReport:
    scenario: Scenario
    solution: SolitonSolution
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------------------
# loading

_REQUIRED = ("coefficients", "profile", "initial")


def parse_scenario(data: dict, source: str | None = None) -> Scenario:
    """Validate a decoded TOML mapping and build a Scenario."""
    if "name" not in data:
        raise ScenarioError(f"scenario {source or ''} has no name")
    for key in _REQUIRED:
        if key not in data or not isinstance(data[key], dict):
            raise ScenarioError(f"scenario {data['name']!r} lacks the [{key}] table")
    coeffs = data["coefficients"]
    if "preset" in coeffs and coeffs["preset"] not in PRESETS:
        raise ScenarioError(f"scenario {data['name']!r}: unknown preset {coeffs['preset']!r}; known: {', '.join(PRESETS)}")
    if "preset" not in coeffs and "a" not in coeffs:
        raise ScenarioError(f"scenario {data['name']!r}: coefficients need a preset or an expression for a")
    prof = data["profile"]
    if int(prof.get("m", 0)) not in (0, 1):
        raise ScenarioError(f"scenario {data['name']!r}: profile m must be 0 or 1")
    if float(data["initial"].get("mu", 1.0)) == 0.0:
        raise ScenarioError(f"scenario {data['name']!r}: initial mu must be nonzero")
    checks = data.get("checks", {})
    unknown = sorted(set(checks) - set(CHECKS))
    if unknown:
        raise ScenarioError(f"scenario {data['name']!r}: unknown checks {unknown}; known: {sorted(CHECKS)}")
    return Scenario(
        name=str(data["name"]), description=str(data.get("description", "")),
        coefficients=dict(coeffs), profile=dict(prof), initial=dict(data["initial"]),
        solution=dict(data.get("solution", {})), grid=dict(data.get("grid", {})),
        checks={k: dict(v) for k, v in checks.items()}, feshbach=data.get("feshbach"), source=source,
    )


def _bundled():
    return resources.files("soliton_forge").joinpath(_PACKAGE_DIR)


def scenario_names() -> list:
    return sorted(p.name[:-5] for p in _bundled().iterdir() if p.name.endswith(".toml"))


def load_scenario(name_or_path) -> Scenario:
    """Load a bundled scenario by name, or any scenario file by path."""
    path = Path(str(name_or_path))
    if path.suffix == ".toml" or path.exists():
        if not path.is_file():
            raise ScenarioError(f"scenario file {path} not found")
        try:
            data = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioError(f"cannot parse {path}: {exc}") from exc
        return parse_scenario(data, str(path))
    res = _bundled().joinpath(f"{name_or_path}.toml")
    if not res.is_file():
        raise ScenarioError(f"unknown scenario {name_or_path!r}; catalog: {', '.join(scenario_names())}")
    return parse_scenario(tomllib.loads(res.read_text()), f"<bundled>/{name_or_path}.toml")


def scenario_catalog() -> list:
    return [load_scenario(n) for n in scenario_names()]


# ---------------------------------------------------------------------------
# construction

def _coefficients(spec: dict, base_dir: Path | None = None) -> QuadraticCoefficients:
    if "preset" in spec:
        return make_preset(spec["preset"], **dict(spec.get("params", {})))
    values = {}
    for key in "abcdfg":
        v = spec.get(key, 0)
        if isinstance(v, dict) and "file" in v:
            p = Path(v["file"])
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            values[key] = TabulatedCoefficient.from_file(p, label=key)
        else:
            values[key] = v
    return QuadraticCoefficients.from_values(name=spec.get("name", "custom"), **values)


def _profile(spec: dict):
    m = int(spec.get("m", 0))
    if m == 0:
        return build_profile_m0(spec["g0"], spec["h0"], spec.get("C0", 0.0))
    return build_profile_m1(spec["g0"], spec["h0"], spec["k"], spec.get("zeta_min", -40.0),
                            spec.get("zeta_max", 12.0))


def _initial(spec: dict) -> PhaseState:
    keys = ("mu", "alpha", "beta", "gamma", "delta", "epsilon", "kappa")
    return PhaseState.initial(**{k: float(spec[k]) for k in keys if k in spec})


def build_solution(s: Scenario) -> SolitonSolution:
    base = Path(s.source).parent if s.source and not s.source.startswith("<") else None
    coeffs = _coefficients(s.coefficients, base)
    return assemble(coeffs, _initial(s.initial), _profile(s.profile), s.horizon,
                    phi=float(s.solution.get("phi", 0.0)), y=float(s.solution.get("y", 0.0)))


def grid_spec(s: Scenario) -> GridSpec:
    g = s.grid
    return GridSpec.uniform(float(g.get("L", 20.0)), int(g.get("N", 512)), float(g.get("t0", 0.05)),
                            float(g.get("t1", 0.5)), int(g.get("nt", 200)))


def sampler(sol: SolitonSolution) -> Callable:
    return lambda x, t: evaluate_psi(sol, x, t)


# ---------------------------------------------------------------------------
# checks: each takes (scenario, solution, options) and returns a list of CheckResult

def _lt(name, value, tol, detail=""):
    value = float(value)
    return CheckResult(name, value, float(tol), bool(value < tol), "<", detail)


def _gt(name, value, threshold, detail=""):
    value = float(value)
    return CheckResult(name, value, float(threshold), bool(value > threshold), ">", detail)


def _check_wronskian(s, sol, opt):
    b = sol.kernels.basis
    t = np.linspace(0.0, b.T, 401)
    err = np.max(np.abs(b.wronskian(t) - b.wronskian_expected(t)))
    return [_lt("wronskian", err, opt.get("tol", 1e-8))]


def _window(s, sol, opt):
    t0 = float(opt.get("t0", s.grid.get("t0", 0.05)))
    t1 = float(opt.get("t1", s.grid.get("t1", 0.5)))
    return t0, min(t1, sol.validity_end * (1 - 1e-6))


def _check_riccati(s, sol, opt):
    t0, t1 = _window(s, sol, opt)
    tr = sample_trajectory(sol.kernels, sol.init, t0, t1, int(opt.get("n", 401)))
    rep = riccati_residuals(tr, sol.coeffs, tol=float(opt.get("tol", 1e-6)))
    return [_lt("riccati", rep.max_relative, rep.tol)]


def _check_continuity(s, sol, opt):
    d = continuity_defect(sol.kernels, sol.init, float(opt.get("t", 1e-5)))
    return [_lt("continuity", max(d.values()), opt.get("tol", 1e-6))]


def _check_bkernel(s, sol, opt):
    t0, t1 = _window(s, sol, opt)
    return [_lt("bkernel", bkernel_defect(sol.kernels, sol.init, np.linspace(t0, t1, 101)), opt.get("tol", 1e-10))]


def _check_residual(s, sol, opt):
    rep = pde_residual(sampler(sol), sol.coeffs, sol.laws, grid_spec(s), tol=float(opt.get("tol", 1e-6)))
    return [_lt("pde_residual", rep.rel_to_scale, opt.get("tol", 1e-6),
                f"worst at x={rep.worst_point[0]:.6g} t={rep.worst_point[1]:.6g}")]


def _check_negative(s, sol, opt):
    factor = float(opt.get("factor", 1.01))
    rep = pde_residual(sampler(sol), sol.coeffs, sol.laws.with_h0_scaled(factor), grid_spec(s), tol=1e-6)
    return [_gt("negative_control", rep.rel_to_scale, opt.get("threshold", 1e-3), f"h0 scaled by {factor}")]


def _check_first_integral(s, sol, opt):
    if sol.profile.m != 0:
        return []
    z = np.linspace(-10.0, 10.0, 2001)
    err = np.max(np.abs(first_integral(sol.profile, z) - sol.profile.C0))
    return [_lt("first_integral", err, opt.get("tol", 1e-8))]


def _check_painleve(s, sol, opt):
    from .specfun import airy_ai

    p2 = sol.profile.painleve
    k = p2.k
    seed = abs(p2(8.0)[0] - k * airy_ai(8.0)) / abs(k * airy_ai(8.0))
    zs = np.linspace(p2.zeta_min, p2.zeta_max, 4001)
    bound = float(np.max(np.abs(p2(zs)[0])))
    return [_lt("painleve_seed", seed, opt.get("seed_tol", 1e-6)),
            _lt("painleve_bounded", bound, opt.get("bound", 2.0))]


def _propagate_field(sol, L, N, t_end, dt):
    x = GridSpec(L, N, [0.0]).x_nodes
    psi0 = FieldGrid(x, [0.0], evaluate_psi(sol, x, 0.0))
    out = split_step_propagate(psi0, sol.coeffs, sol.laws, t_end, dt)
    return x, out


def _check_propagation(s, sol, opt):
    L, N = float(opt.get("L", s.grid.get("L", 20.0))), int(opt.get("N", 1024))
    t_end, dt = float(opt.get("t_end", 1.0)), float(opt.get("dt", 1e-4))
    x, out = _propagate_field(sol, L, N, t_end, dt)
    err = l2_relative_error(out.values[-1], evaluate_psi(sol, x, t_end))
    norms = np.asarray(out.meta["gauged_norms"])
    res = [_lt("propagation", err, opt.get("tol", 1e-4), f"N={N} dt={dt} t_end={t_end}")]
    if opt.get("norm_tol"):
        res.append(_lt("norm_drift", float(np.max(np.abs(norms - norms[0])) / norms[0]) / t_end, opt["norm_tol"]))
    return res


def _check_order(s, sol, opt):
    L, N = float(opt.get("L", s.grid.get("L", 20.0))), int(opt.get("N", 128))
    t_end, dt = float(opt.get("t_end", 1.0)), float(opt.get("dt", 1e-2))
    ref = _propagate_field(sol, L, N, t_end, dt / 8)[1].values[-1]
    e1 = l2_relative_error(_propagate_field(sol, L, N, t_end, dt)[1].values[-1], ref)
    e2 = l2_relative_error(_propagate_field(sol, L, N, t_end, dt / 2)[1].values[-1], ref)
    ratio = e1 / e2
    lo, hi = opt.get("band", [3.5, 4.5])
    return [CheckResult("propagation_order", ratio, hi, bool(lo <= ratio <= hi), "in",
                        f"band [{lo}, {hi}], errors {e1:.3e} / {e2:.3e}")]


def _check_trajectory(s, sol, opt):
    t0 = float(opt.get("t0", 0.0))
    t1 = min(float(opt.get("t1", s.grid.get("t1", 0.5))), sol.validity_end * (1 - 1e-6))
    rep = classical_trajectory(sol, t0, t1, int(opt.get("n", 401)))
    out = [_lt("trajectory_z", rep.z_drift, opt.get("z_tol", 1e-8)),
           _lt("trajectory_velocity_law", rep.velocity_residual, opt.get("tol", 1e-6)),
           _lt("trajectory_second_order_law", rep.second_order_residual, opt.get("tol", 1e-6))]
    expect = opt.get("expect")
    if expect == "quadratic":
        c2 = np.polyfit(rep.t, rep.x, 2)[0]
        k = float(s.coefficients.get("params", {}).get("k", 0.0))
        out.append(_lt("trajectory_acceleration", abs(c2 - 2 * k), opt.get("fit_tol", 1e-8),
                       f"t^2 coefficient {c2:.12g}, expected 2k = {2 * k:g}"))
    elif expect == "linear":
        c2 = np.polyfit(rep.t, rep.x, 2)[0]
        out.append(_lt("trajectory_constant_velocity", abs(c2), opt.get("fit_tol", 1e-8)))
    return out


def _check_autonomous(s, sol, opt):
    t0, t1 = _window(s, sol, opt)
    rep = autonomous_residual(sol, t0, t1, n=int(opt.get("n", 64)), xi_max=float(opt.get("xi_max", 8.0)))
    return [_lt("autonomous", rep.max_abs, opt.get("tol", 1e-4))]


def _check_retiming(s, sol, opt):
    """Compare with the free particle run in the time tau = -int a."""
    from scipy.integrate import quad

    free = assemble(free_particle(), sol.init, sol.profile, float(opt.get("free_horizon", 10.0)),
                    phi=sol.phi, y=sol.y)
    c = sol.coeffs
    t0, t1 = _window(s, sol, opt)
    ts = np.linspace(t0, t1, 41)
    x = np.linspace(-10.0, 10.0, 201)
    worst = 0.0
    for t in ts:
        tau = quad(lambda u: -c.a(u), 0.0, t, epsabs=1e-14, epsrel=1e-13)[0]
        Lam = quad(c.d, 0.0, t, epsabs=1e-14, epsrel=1e-13)[0]
        a = evaluate_psi(sol, x, t)
        b = np.exp(-Lam) * evaluate_psi(free, x, tau)
        worst = max(worst, float(np.max(np.abs(a - b))) / float(np.max(np.abs(b))))
    return [_lt("retiming", worst, opt.get("tol", 1e-8))]


def _check_gauge(s, sol, opt):
    """The forcing-gauged field solves the equation with the potential g0 a beta**3 x."""
    laws = sol.laws
    gauged = SimpleLaws(h=laws.h_of_t, forcing=laws.gauged_forcing)
    spec = GridSpec.uniform(float(opt.get("L", s.grid.get("L", 20.0))), int(opt.get("N", 128)),
                            *_window(s, sol, opt), int(opt.get("nt", 24)))
    coeffs = sol.coeffs
    psi = lambda x, t: evaluate_psi(sol, x, t, gauge=True)  # noqa: E731
    rep = pde_residual(psi, coeffs, gauged, spec, tol=float(opt.get("tol", 1e-6)))
    return [_lt("gauge_residual", rep.rel_to_scale, opt.get("tol", 1e-6))]


def _feshbach_inputs(s, sol):
    if s.feshbach is None:
        raise ScenarioError(f"scenario {s.name!r} has a feshbach check but no [feshbach] table")
    f = s.feshbach
    p = FeshbachParams(float(f["B0"]), float(f["Delta0"]), float(f["a_inf"]), float(f.get("a0_bohr", 1.0)))
    consts = SolitonConstants(sol.profile.h0, sol.init.beta, sol.init.mu)
    eta = float(f.get("eta", 0.0))

    def mu(tau):
        return sol.state(tau).mu

    def Lam(tau):
        return eta * np.asarray(tau, dtype=float)

    return p, consts, mu, Lam


def _check_feshbach(s, sol, opt):
    p, consts, mu, Lam = _feshbach_inputs(s, sol)
    t0, t1 = _window(s, sol, opt)
    taus = np.linspace(t0, t1, int(opt.get("n", 201)))
    rows, poles = field_program(mu, Lam, consts, p, taus)
    sync = synchronization_residual(mu, Lam, consts, p, rows[:, 0])
    # kappa = 2 exp(Lambda) a_s/a0 must reproduce the nonlinearity law h(tau)
    h = np.asarray(sol.laws.h_of_t(rows[:, 0]))
    kap = float(np.max(np.abs(rows[:, 3] - h) / np.abs(h)))
    return [_lt("feshbach_sync", sync, opt.get("tol", 1e-10), f"{len(poles)} pole(s) in window"),
            _lt("feshbach_kappa", kap, opt.get("tol", 1e-10))]


def _check_trap_frequency(s, sol, opt):
    t0, t1 = _window(s, sol, opt)
    ts = np.linspace(max(t0, 0.05), t1, 25)
    mu = lambda tau: sol.state(tau).mu  # noqa: E731
    w2 = np.asarray(trap_frequency_from_mu(mu, ts))
    target = 2.0 * np.asarray(sol.coeffs.b(ts))  # b = omega**2 / 2
    return [_lt("trap_frequency", float(np.max(np.abs(w2 - target))), opt.get("tol", 1e-6))]


def _check_gg_identity(s, sol, opt):
    """int_0^tau g = g0 (gamma(0) - gamma(tau)) with g = g0 a beta**2."""
    from scipy.integrate import quad

    t0, t1 = _window(s, sol, opt)
    g0 = sol.profile.g0
    a = sol.coeffs.a
    worst = 0.0
    for t in np.linspace(t0, t1, 11):
        lhs = quad(lambda u: g0 * a(u) * sol.state(u).beta ** 2, 0.0, t, epsabs=1e-13, epsrel=1e-12)[0]
        rhs = g0 * (sol.init.gamma - sol.state(t).gamma)
        worst = max(worst, abs(lhs - rhs))
    return [_lt("gg_identity", worst, opt.get("tol", 1e-8))]


CHECKS: dict[str, Callable[[Scenario, SolitonSolution, dict], list]] = {
    "wronskian": _check_wronskian,
    "riccati": _check_riccati,
    "continuity": _check_continuity,
    "bkernel": _check_bkernel,
    "residual": _check_residual,
    "negative_control": _check_negative,
    "first_integral": _check_first_integral,
    "painleve": _check_painleve,
    "propagation": _check_propagation,
    "propagation_order": _check_order,
    "trajectory": _check_trajectory,
    "autonomous": _check_autonomous,
    "retiming": _check_retiming,
    "gauge": _check_gauge,
    "feshbach": _check_feshbach,
    "trap_frequency": _check_trap_frequency,
    "gg_identity": _check_gg_identity,
}


def _with_context(exc: SolitonForgeError, where: str) -> SolitonForgeError:
    exc.args = (f"[{where}] {exc.args[0] if exc.args else ''}",) + tuple(exc.args[1:])
    return exc


def run_scenario(s: Scenario, only=None, skip=(), h0_factor: float = 1.0) -> ScenarioReport:
    """Assemble the scenario and run its verification plan.

    ``h0_factor`` scales h0 in the emitted nonlinearity law only, which turns
    a run into a sensitivity (negative-control) experiment.  Module errors
    propagate unchanged apart from a ``[scenario:check]`` message prefix.
    """
    try:
        sol = build_solution(s)
    except SolitonForgeError as exc:
        raise _with_context(exc, s.name)
    if h0_factor != 1.0:
        sol = replace(sol, laws=sol.laws.with_h0_scaled(h0_factor))
    report = ScenarioReport(s, sol)
    for name, opt in s.checks.items():
        if (only is not None and name not in only) or name in skip:
            continue
        try:
            report.checks.extend(CHECKS[name](s, sol, opt))
        except SolitonForgeError as exc:
            raise _with_context(exc, f"{s.name}:{name}")
    return report
