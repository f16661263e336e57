"""Command-line front end: ``mblab <pipeline> --config <file> [--out <dir>] [--seed N]``.

Exit codes: 0 ok, 1 verification failed, 2 configuration error,
3 solver did not converge, 4 gap condition violated.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib
import numpy as np
import scipy
import sympy

from . import __version__
from .errors import ConfigError, GapConditionViolated, MBLabError, NotInGamma1, NotInGamma2
from .grid import (
    ConstraintPair,
    DomainSpec,
    Field,
    constant_field,
    linear_field,
    read_field,
    write_field,
)
from .laminations import build_orbit, lamination_pipeline
from .lattice_geometry import make_direction_system
from .potential import from_records, pendulum, pendulum_x_factor, to_records, zero
from .quadratic import QuadraticNumber
from .solvers import (
    SCHEMES,
    SolverConfig,
    minimize_J1,
    minimize_J2,
    minimize_periodic,
    periodic_domain,
    residual,
)
from . import report, verify

log = logging.getLogger("mblab")

PIPELINES = ("periodic", "lamination", "j1-gap", "j2-heteroclinic", "verify")
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_GAP = 0, 1, 2, 3, 4


@dataclass
class RunConfig:
    pipeline: str
    spec: object
    alpha: tuple
    domain: Optional[DomainSpec]
    solver: SolverConfig
    out: Path
    seed: int
    parser: configparser.ConfigParser
    source_text: str
    sections: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.replace(",", " ").split()) if text.strip() else ()


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split()) if text.strip() else ()


def _get(cp, section, key, default=None, required=False):
    if cp.has_option(section, key):
        return cp.get(section, key).strip()
    if required:
        raise ConfigError(f"missing [{section}] {key}")
    return default


def parse_alpha(text: str) -> tuple:
    try:
        return tuple(QuadraticNumber.parse(p) for p in text.split(","))
    except Exception as exc:  # sympy raises a variety of parse errors
        raise ConfigError(f"cannot parse rotation vector {text!r}: {exc}") from exc


def parse_potential(cp, n: int):
    kind = _get(cp, "potential", "kind", "zero")
    eps = float(_get(cp, "potential", "eps", "0"))
    if kind == "zero":
        return zero(n)
    if kind == "pendulum":
        return pendulum(eps, n)
    if kind == "pendulum_x":
        return pendulum_x_factor(eps, n, int(_get(cp, "potential", "axis", "0")))
    if kind == "terms":
        try:
            records = json.loads(_get(cp, "potential", "terms", required=True))
            return from_records(n, records)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad potential terms: {exc}") from exc
    raise ConfigError(f"unknown potential kind {kind!r}")


def parse_solver(cp, seed: int) -> SolverConfig:
    s = "solver"
    try:
        return SolverConfig(
            max_iters=int(_get(cp, s, "max_iters", "200000")),
            residual_tol=float(_get(cp, s, "residual_tol", "1e-8")),
            energy_tol=float(_get(cp, s, "energy_tol", "1e-10")),
            scheme=_get(cp, s, "scheme", SCHEMES[0]),
            relaxation=float(_get(cp, s, "relaxation", "1.0")),
            seed=seed,
            multilevel=_get(cp, s, "multilevel", "true").lower() in ("1", "true", "yes"),
        )
    except ValueError as exc:
        raise ConfigError(f"bad [solver] section: {exc}") from exc


def parse_domain(cp, n: int) -> Optional[DomainSpec]:
    if not cp.has_section("domain"):
        return None
    d = "domain"
    try:
        n2 = int(_get(cp, d, "n2", "0"))
        return DomainSpec(
            n, n2, int(_get(cp, d, "R", "0")), _ints(_get(cp, d, "periods", "")),
            int(_get(cp, d, "m", "32")), _floats(_get(cp, d, "lambdas", "")),
            _ints(_get(cp, d, "jumps", "")),
        )
    except ValueError as exc:
        raise ConfigError(f"bad [domain] section: {exc}") from exc


def load_config(path: str, pipeline: str, out: Optional[str], seed: Optional[int]) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    text = p.read_text()
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    declared = _get(cp, "run", "pipeline")
    if declared and declared != pipeline:
        raise ConfigError(f"config is for pipeline {declared!r}, not {pipeline!r}")
    if seed is None:
        seed = int(_get(cp, "run", "seed", "0"))
    alpha_text = _get(cp, "rotation", "alpha")
    if alpha_text is None and pipeline != "verify":
        raise ConfigError("missing [rotation] alpha")
    alpha = parse_alpha(alpha_text) if alpha_text else ()
    n = len(alpha) if alpha else int(_get(cp, "domain", "n", "1"))
    spec = parse_potential(cp, n)
    domain = parse_domain(cp, n)
    outdir = Path(out) if out else Path(_get(cp, "run", "out", f"mblab_out/{pipeline}"))
    return RunConfig(pipeline, spec, alpha, domain, parse_solver(cp, seed), outdir, seed, cp, text)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _field_from(text: str, dom: DomainSpec, base: Path, rng=None, pair=None) -> Field:
    """const:c, linear:a1 a2 ...;c, file:path, or (with a pair) lower/upper/midpoint/random."""
    kind, _, arg = text.partition(":")
    kind = kind.strip()
    if kind == "const":
        return constant_field(dom, float(arg))
    if kind == "linear":
        coef, _, c = arg.partition(";")
        return linear_field(dom, _floats(coef), float(c or 0.0))
    if kind == "file":
        f = read_field(base / arg.strip() if not Path(arg.strip()).is_absolute() else arg.strip())
        if f.domain != dom:
            raise ConfigError(f"field file {arg} lives on a different domain")
        return f
    if pair is not None:
        lo, hi = pair.lower.values, pair.upper.values
        if kind == "lower":
            return pair.lower.copy()
        if kind == "upper":
            return pair.upper.copy()
        if kind == "midpoint":
            return pair.lower.copy(0.5 * (lo + hi))
        if kind == "random":
            t = rng.uniform(0.0, 1.0, size=lo.shape)
            vals = lo + t * (hi - lo)
            interior = dom.interior_mask()
            return pair.lower.copy(np.where(interior, vals, lo))
    raise ConfigError(f"unknown field description {text!r}")


def _pair(run: RunConfig, base: Path) -> ConstraintPair:
    if run.domain is None:
        raise ConfigError("missing [domain] section")
    lower = _field_from(_get(run.parser, "pair", "lower", "const:0"), run.domain, base)
    upper = _field_from(_get(run.parser, "pair", "upper", "const:1"), run.domain, base)
    try:
        return ConstraintPair(lower, upper)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _manifest(run: RunConfig, timings: dict, outputs: list) -> dict:
    return {
        "pipeline": run.pipeline,
        "config_sha256": hashlib.sha256(run.source_text.encode()).hexdigest(),
        "seed": run.seed,
        "versions": {
            "mblab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "sympy": sympy.__version__, "matplotlib": matplotlib.__version__,
        },
        "threads": os.environ.get("MBLAB_THREADS", ""),
        "timings_s": timings,
        "outputs": sorted(outputs),
    }


def _solve_summary(res, extra=None) -> dict:
    out = {
        "energy": res.energy.to_dict(),
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
    }
    diag = {k: v for k, v in res.diagnostics.items() if k != "minimizers"}
    if diag:
        out["diagnostics"] = verify._jsonable(diag)
    if extra:
        out.update(extra)
    return out


def _emit_solution(res, out: Path, name: str, written: list, title: str, others=()) -> None:
    write_field(res.field, out / f"{name}.mbf")
    report.write_history(res.history, out / "energy.csv")
    report.write_profile(res.field, out / f"{name}.dat")
    report.plot_field(res.field, out / f"{name}.png", title, others)
    report.plot_history(res.history, out / "residual.png")
    written += [f"{name}.mbf", "energy.csv", f"{name}.dat", f"{name}.png", "residual.png"]


def _wsi_tol(run: RunConfig) -> float:
    return float(_get(run.parser, "verify", "wsi_tol", str(max(10 * run.solver.residual_tol, 1e-7))))


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def cmd_periodic(run: RunConfig, written: list) -> int:
    if any(not a.is_rational for a in run.alpha):
        raise ConfigError("periodic pipeline needs a rational rotation vector")
    dom = run.domain
    if dom is None:
        periods = tuple(a.to_fraction().denominator for a in run.alpha)
        dom = DomainSpec(len(run.alpha), 0, 0, periods, 32)
    try:
        dom = periodic_domain(run.alpha, dom.periods, dom.m, dom.lambdas)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = minimize_periodic(run.spec, run.alpha, dom, run.solver)
    rep = verify.VerificationReport()
    rep.add(verify.check_wsi(res.field, 3, _wsi_tol(run), alpha=run.alpha))
    rep.add(verify.check_rotation_bound(res.field, run.alpha))
    _emit_solution(res, run.out, "minimizer", written, "periodic minimizer")
    report.write_json({"result": _solve_summary(res), "verification": rep.to_dict(),
                       "potential": to_records(run.spec)}, run.out / "report.json")
    written.append("report.json")
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_lamination(run: RunConfig, written: list) -> int:
    if all(a.is_rational for a in run.alpha):
        raise ConfigError("lamination pipeline needs an irrational rotation vector")
    sec = "lamination"
    depths = _ints(_get(run.parser, sec, "depths", "3, 4"))
    m = int(_get(run.parser, sec, "m", "32"))
    tol_text = _get(run.parser, sec, "tol")
    summary = lamination_pipeline(
        run.alpha, run.spec, depths=depths, m=m, cfg=run.solver,
        tol=float(tol_text) if tol_text else None,
        n_phases=int(_get(run.parser, sec, "n_phases", "8")),
        shift_bound=int(_get(run.parser, sec, "shift_bound", "2")),
        step=int(_get(run.parser, sec, "step", "2")),
        stability=float(_get(run.parser, sec, "stability", "0.2")),
    )
    data = summary.to_dict()
    for d, rep in summary.reports.items():
        refs = []
        for i, g in enumerate(rep.gaps):
            names = (f"gap_d{d}_{i}_lower.mbf", f"gap_d{d}_{i}_upper.mbf")
            write_field(g.pair[0], run.out / names[0])
            write_field(g.pair[1], run.out / names[1])
            refs.append(list(names))
            written.extend(names)
        data["depths"][str(d)]["pair_files"] = refs
        kept = summary.results[d - 1].diagnostics["minimizers"]
        orbit = build_orbit(kept, int(_get(run.parser, sec, "shift_bound", "2")))
        circle = sorted({round(v % 1.0, 12) for v in orbit.sorted_values})
        report.write_columns(run.out / f"orbit_d{d}.dat", "value index", circle, range(len(circle)))
        report.plot_orbit(circle, rep.gaps, run.out / f"orbit_d{d}.png",
                          f"depth {d}: {rep.classification}")
        written += [f"orbit_d{d}.dat", f"orbit_d{d}.png"]
    deepest = summary.results[-1]
    write_field(deepest.field, run.out / "minimizer.mbf")
    report.plot_field(deepest.field, run.out / "minimizer.png", "deepest periodic approximant")
    written += ["minimizer.mbf", "minimizer.png"]
    report.write_json(data, run.out / "gap_report.json")
    written.append("gap_report.json")
    ok = all(r.converged for r in summary.results)
    return EXIT_OK if ok else EXIT_CONVERGENCE


def cmd_j1(run: RunConfig, written: list, base: Path) -> int:
    pair = _pair(run, base)
    rng = np.random.default_rng(run.seed)
    init = _field_from(_get(run.parser, "pair", "init", "midpoint"), run.domain, base, rng, pair)
    res = minimize_J1(pair, init, run.spec, run.solver)
    rep = verify.VerificationReport()
    rep.add(verify.CheckEntry("J1_value", abs(res.energy.total) <= 1e-6, abs(res.energy.total), 1e-6))
    rep.add(verify.check_ordered([pair.lower, res.field, pair.upper], _wsi_tol(run)))
    rep.add(verify.check_wsi(res.field, 3, _wsi_tol(run), alpha=run.alpha))
    _emit_solution(res, run.out, "minimizer", written, "J1 minimizer",
                   [("v", pair.lower), ("w", pair.upper)])
    report.write_json({"result": _solve_summary(res), "verification": rep.to_dict()}, run.out / "report.json")
    written.append("report.json")
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_j2(run: RunConfig, written: list, base: Path) -> int:
    pair = _pair(run, base)
    strips = int(_get(run.parser, "j2", "strips", str(run.domain.R)))
    init_text = _get(run.parser, "j2", "init")
    init = _field_from(init_text, run.domain, base) if init_text else None
    res = minimize_J2(pair, strips, init, run.spec, run.solver)
    U = res.field
    rep = verify.VerificationReport()
    rep.add(verify.check_heteroclinic(U, pair, float(_get(run.parser, "verify", "heteroclinic_tol", "1e-3"))))
    try:
        system = make_direction_system(run.alpha, with_second=True)
        rep.add(verify.check_wsi(U, 3, _wsi_tol(run), system=system))
    except MBLabError as exc:
        rep.add(verify.CheckEntry("wsi", True, 0.0, 0.0, {"skipped": str(exc)}))
    rep.add(verify.check_strip_limits(U, pair, run.spec))
    dom = U.domain
    idx = list(range(-dom.R, dom.R))
    dl = [verify._strip_l2(U.values - pair.lower.values, dom, i) for i in idx]
    du = [verify._strip_l2(U.values - pair.upper.values, dom, i) for i in idx]
    report.write_columns(run.out / "strips.dat", "i |U-v|_L2(S_i) |U-w|_L2(S_i)", idx, dl, du)
    report.plot_strips(idx, dl, du, run.out / "strips.png")
    written += ["strips.dat", "strips.png"]
    _emit_solution(res, run.out, "heteroclinic", written, f"J2 minimizer, c2 = {res.energy.total:.6f}",
                   [("v", pair.lower), ("w", pair.upper)])
    summary = _solve_summary(res, {"c2": res.energy.total})
    report.write_json({"result": summary, "verification": rep.to_dict()}, run.out / "report.json")
    written.append("report.json")
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_verify(run: RunConfig, written: list, base: Path) -> int:
    sec = "verify"
    paths = [x.strip() for x in _get(run.parser, sec, "fields", required=True).split(",") if x.strip()]
    try:
        fields = [read_field(base / p if not Path(p).is_absolute() else p) for p in paths]
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read field: {exc}") from exc
    checks = [c.strip() for c in _get(run.parser, sec, "checks", "wsi, ordered").split(",")]
    tol = float(_get(run.parser, sec, "tol", "1e-7"))
    bound = int(_get(run.parser, sec, "shift_bound", "3"))
    rep = verify.VerificationReport()
    for c in checks:
        if c == "wsi":
            for f in fields:
                rep.add(verify.check_wsi(f, bound, tol, alpha=run.alpha or None))
        elif c == "ordered":
            rep.add(verify.check_ordered(fields, tol))
        elif c == "rotation_bound":
            for f in fields:
                rep.add(verify.check_rotation_bound(f, run.alpha, tol))
        elif c == "bangert_bound":
            if len(fields) != 2:
                raise ConfigError("bangert_bound needs exactly two fields (v, w)")
            eps = float(_get(run.parser, sec, "eps_quad", str(10 * fields[0].domain.h)))
            rep.add(verify.check_bangert_bound(fields[0], fields[1], run.alpha, eps))
        elif c == "residual":
            for f in fields:
                r = residual(f, run.spec)
                rep.add(verify.CheckEntry("residual", r <= tol, r, tol))
        else:
            raise ConfigError(f"unknown check {c!r}")
    report.write_json(rep.to_dict(), run.out / "report.json")
    (run.out / "report.txt").write_text(rep.table() + "\n")
    written += ["report.json", "report.txt"]
    print(rep.table())
    return EXIT_OK if rep.overall else EXIT_VERIFY


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mblab", description="Minimal solutions of periodic variational problems.")
    ap.add_argument("pipeline", choices=PIPELINES)
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="seed for randomized initializers")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run_pipeline(pipeline: str, config: str, out=None, seed=None) -> int:
    t0 = time.perf_counter()
    written: list = []
    try:
        run = load_config(config, pipeline, out, seed)
        base = Path(config).resolve().parent
        run.out.mkdir(parents=True, exist_ok=True)
        if pipeline == "periodic":
            code = cmd_periodic(run, written)
        elif pipeline == "lamination":
            code = cmd_lamination(run, written)
        elif pipeline == "j1-gap":
            code = cmd_j1(run, written, base)
        elif pipeline == "j2-heteroclinic":
            code = cmd_j2(run, written, base)
        else:
            code = cmd_verify(run, written, base)
    except ConfigError as exc:
        print(f"mblab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GapConditionViolated as exc:
        print(f"mblab: gap condition violated: {exc}", file=sys.stderr)
        return EXIT_GAP
    except (NotInGamma1, NotInGamma2) as exc:
        print(f"mblab: initial field not admissible: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MBLabError as exc:
        print(f"mblab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"mblab: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    timings = {"total": round(time.perf_counter() - t0, 3)}
    report.write_json(_manifest(run, timings, written), run.out / "manifest.json")
    if code == EXIT_CONVERGENCE:
        print("mblab: solver did not reach the residual tolerance", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return run_pipeline(args.pipeline, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
