"""Command-line interface: single computations and batch table runs.

Every command writes exactly one JSON document to stdout (JSON lines for
``table``); diagnostics go to stderr.  Exit codes: 0 success, 1 input error,
2 ran but did not converge (or, for ``table``, not all jobs passed).

Numeric flags accept expressions without free variables, so ``--s-lo pi/4``
works.  Expression flags use the library grammar verbatim; coordinates are
spelled ``x, y`` (square), ``t1, t2`` (torus) and ``theta, phi`` (sphere).

Batch configs are INI-style files, one section per job, e.g.::

    [row1]
    kind = bracket            ; bracket | mass | normalize | area
    domain = square
    tau = 1
    rho = 1
    f = x
    h = y
    expected = 1              ; optional, an expression
    tol_abs = 1e-8            ; acceptance tolerance against `expected`
    tol_rel = 0
    quad_abs_tol = 1e-10      ; optional quadrature overrides
    quad_rel_tol = 1e-10

Area jobs take ``rho``, ``theta_map``, ``phi_map``, ``s_lo``, ``s_hi``,
``t_lo``, ``t_hi`` and optional ``weight_mode`` (measure | literal).  A job
passes when it converged and, if ``expected`` is given,
``|value - expected| <= tol_abs + tol_rel * |expected|``.  All jobs are
validated before any of them runs.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass
from typing import Any, Callable

from . import __version__
from .areas import AreaProblem, FlowMap, WEIGHT_MODES, area
from .brackets import BracketProblem, bracket
from .expressions import Expr, ExpressionError, evaluate, parse
from .geometry import (
    GeometryError,
    NormalizationError,
    density_mass,
    domain_by_name,
    normalize,
)
from .quadrature import QuadSpec, QuadratureError

__all__ = ["main", "run_bracket", "run_area", "run_table"]


class CliInputError(Exception):
    """Bad flags or config; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise CliInputError(message)


def _parse_expr(text: str, what: str) -> Expr:
    try:
        return parse(text)
    except ExpressionError as exc:
        raise CliInputError(f"invalid expression for {what}: {exc}") from exc


def _parse_number(text: str, what: str) -> float:
    try:
        return evaluate(parse(text), {})
    except ExpressionError as exc:
        raise CliInputError(f"invalid number for {what}: {exc}") from exc


def _emit(payload: dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="densbrackets",
        description="Poisson brackets of density functionals and leaf areas",
    )
    parser.add_argument(
        "--version", action="version", version=f"densbrackets {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bracket", help="Poisson bracket of two functionals")
    b.add_argument("--domain", required=True, choices=["square", "torus", "sphere"])
    b.add_argument("--tau", default="1", help="conformal factor expression")
    b.add_argument("--rho", required=True, help="density expression")
    b.add_argument("--f", required=True, help="first function expression")
    b.add_argument("--h", required=True, help="second function expression")
    b.add_argument("--abs-tol", default="1e-10")
    b.add_argument("--rel-tol", default="1e-10")
    b.add_argument("--max-subdivisions", type=int, default=2000)
    b.add_argument(
        "--no-normalize",
        action="store_true",
        help="integrate the density as given instead of rescaling to mass 1",
    )

    a = sub.add_parser("area", help="symplectic area of a leaf patch")
    a.add_argument("--rho", required=True, help="normalized sphere density")
    a.add_argument("--theta-map", required=True)
    a.add_argument("--phi-map", required=True)
    a.add_argument("--s-lo", required=True)
    a.add_argument("--s-hi", required=True)
    a.add_argument("--t-lo", required=True)
    a.add_argument("--t-hi", required=True)
    a.add_argument("--weight-mode", default="measure", choices=list(WEIGHT_MODES))
    a.add_argument("--abs-tol", default="1e-7")
    a.add_argument("--rel-tol", default="1e-7")
    a.add_argument("--max-subdivisions", type=int, default=2000)
    a.add_argument("--max-evals", default=None)

    t = sub.add_parser("table", help="run a batch config, one JSON line per job")
    t.add_argument("config", help="path to an INI-style job file")

    return parser


def run_bracket(args: argparse.Namespace) -> int:
    domain = domain_by_name(args.domain)
    problem = BracketProblem(
        domain=domain,
        tau=_parse_expr(args.tau, "--tau"),
        rho=_parse_expr(args.rho, "--rho"),
        f=_parse_expr(args.f, "--f"),
        h=_parse_expr(args.h, "--h"),
        auto_normalize=not args.no_normalize,
    )
    spec = QuadSpec(
        abs_tol=_parse_number(args.abs_tol, "--abs-tol"),
        rel_tol=_parse_number(args.rel_tol, "--rel-tol"),
        max_subdivisions=args.max_subdivisions,
    )
    result = bracket(problem, spec)
    _emit(
        {
            "value": result.value,
            "error_estimate": result.error_estimate,
            "n_evals": result.n_evals,
            "converged": result.converged,
            "normalization_constant": result.normalization_constant,
        }
    )
    return 0 if result.converged else 2


def run_area(args: argparse.Namespace) -> int:
    s_lo = _parse_number(args.s_lo, "--s-lo")
    s_hi = _parse_number(args.s_hi, "--s-hi")
    t_lo = _parse_number(args.t_lo, "--t-lo")
    t_hi = _parse_number(args.t_hi, "--t-hi")
    if not (s_lo < s_hi and t_lo < t_hi):
        raise CliInputError("parameter intervals must satisfy lo < hi")
    problem = AreaProblem(
        rho=_parse_expr(args.rho, "--rho"),
        flow=FlowMap(
            theta_map=_parse_expr(args.theta_map, "--theta-map"),
            phi_map=_parse_expr(args.phi_map, "--phi-map"),
        ),
        s_interval=(s_lo, s_hi),
        t_interval=(t_lo, t_hi),
        weight_mode=args.weight_mode,
    )
    max_evals = None
    if args.max_evals is not None:
        max_evals = int(_parse_number(args.max_evals, "--max-evals"))
    spec = QuadSpec(
        abs_tol=_parse_number(args.abs_tol, "--abs-tol"),
        rel_tol=_parse_number(args.rel_tol, "--rel-tol"),
        max_subdivisions=args.max_subdivisions,
        max_evals=max_evals,
    )
    result = area(problem, spec)
    _emit(
        {
            "area": result.value,
            "error_estimate": result.error_estimate,
            "weight_mode": problem.weight_mode,
            "n_evals": result.n_evals,
            "converged": result.converged,
        }
    )
    return 0 if result.converged else 2


# -- table runner -------------------------------------------------------------

_JOB_KINDS = ("bracket", "mass", "normalize", "area")


@dataclass(frozen=True)
class _Job:
    label: str
    kind: str
    run: Callable[[], dict[str, Any]]
    expected: float | None
    tol_abs: float
    tol_rel: float


def _section_get(section, key: str, label: str, default: str | None = None) -> str:
    value = section.get(key, fallback=default)
    if value is None:
        raise CliInputError(f"job '{label}' is missing required key '{key}'")
    return value


def _job_spec(section, label: str, default_tol: float) -> QuadSpec:
    abs_tol = _parse_number(
        section.get("quad_abs_tol", fallback=repr(default_tol)), f"{label}.quad_abs_tol"
    )
    rel_tol = _parse_number(
        section.get("quad_rel_tol", fallback=repr(default_tol)), f"{label}.quad_rel_tol"
    )
    max_subdivisions = int(
        _parse_number(
            section.get("quad_max_subdivisions", fallback="2000"),
            f"{label}.quad_max_subdivisions",
        )
    )
    return QuadSpec(abs_tol=abs_tol, rel_tol=rel_tol, max_subdivisions=max_subdivisions)


def _build_job(label: str, section) -> _Job:
    kind = _section_get(section, "kind", label)
    if kind not in _JOB_KINDS:
        raise CliInputError(
            f"job '{label}' has unknown kind {kind!r}; expected one of {_JOB_KINDS}"
        )

    expected = None
    if section.get("expected", fallback=None) is not None:
        expected = _parse_number(section["expected"], f"{label}.expected")
    tol_abs = _parse_number(section.get("tol_abs", fallback="0"), f"{label}.tol_abs")
    tol_rel = _parse_number(section.get("tol_rel", fallback="0"), f"{label}.tol_rel")

    if kind == "bracket":
        domain = domain_by_name(_section_get(section, "domain", label))
        problem = BracketProblem(
            domain=domain,
            tau=_parse_expr(section.get("tau", fallback="1"), f"{label}.tau"),
            rho=_parse_expr(_section_get(section, "rho", label), f"{label}.rho"),
            f=_parse_expr(_section_get(section, "f", label), f"{label}.f"),
            h=_parse_expr(_section_get(section, "h", label), f"{label}.h"),
            auto_normalize=section.getboolean("normalize", fallback=True),
        )
        problem.validate()
        spec = _job_spec(section, label, 1e-10)

        def run() -> dict[str, Any]:
            r = bracket(problem, spec)
            return {
                "value": r.value,
                "error_estimate": r.error_estimate,
                "n_evals": r.n_evals,
                "converged": r.converged,
                "normalization_constant": r.normalization_constant,
            }

    elif kind in ("mass", "normalize"):
        domain = domain_by_name(_section_get(section, "domain", label))
        rho = _parse_expr(_section_get(section, "rho", label), f"{label}.rho")
        spec = _job_spec(section, label, 1e-10)

        if kind == "mass":
            def run() -> dict[str, Any]:
                r = density_mass(domain, rho, spec)
                return {
                    "value": r.value,
                    "error_estimate": r.error_estimate,
                    "n_evals": r.n_evals,
                    "converged": r.converged,
                }
        else:
            def run() -> dict[str, Any]:
                first = density_mass(domain, rho, spec)
                density = normalize(domain, rho, spec)
                check = density.mass
                return {
                    "value": check.value,
                    "error_estimate": check.error_estimate,
                    "n_evals": first.n_evals + check.n_evals,
                    "converged": check.converged,
                    "scale": first.value,
                }

    else:  # area
        s_lo = _parse_number(_section_get(section, "s_lo", label), f"{label}.s_lo")
        s_hi = _parse_number(_section_get(section, "s_hi", label), f"{label}.s_hi")
        t_lo = _parse_number(_section_get(section, "t_lo", label), f"{label}.t_lo")
        t_hi = _parse_number(_section_get(section, "t_hi", label), f"{label}.t_hi")
        problem = AreaProblem(
            rho=_parse_expr(_section_get(section, "rho", label), f"{label}.rho"),
            flow=FlowMap(
                theta_map=_parse_expr(
                    _section_get(section, "theta_map", label), f"{label}.theta_map"
                ),
                phi_map=_parse_expr(
                    _section_get(section, "phi_map", label), f"{label}.phi_map"
                ),
            ),
            s_interval=(s_lo, s_hi),
            t_interval=(t_lo, t_hi),
            weight_mode=section.get("weight_mode", fallback="measure"),
        )
        problem.validate()
        spec = _job_spec(section, label, 1e-7)

        def run() -> dict[str, Any]:
            r = area(problem, spec)
            return {
                "value": r.value,
                "error_estimate": r.error_estimate,
                "n_evals": r.n_evals,
                "converged": r.converged,
                "weight_mode": problem.weight_mode,
            }

    return _Job(
        label=label,
        kind=kind,
        run=run,
        expected=expected,
        tol_abs=tol_abs,
        tol_rel=tol_rel,
    )


def load_jobs(path: str) -> list[_Job]:
    """Parse and validate a job config; raises CliInputError before any job runs."""
    cp = configparser.RawConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise CliInputError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise CliInputError(f"malformed config {path!r}: {exc}") from exc
    try:
        return [_build_job(name, cp[name]) for name in cp.sections()]
    except (GeometryError, QuadratureError, ExpressionError) as exc:
        raise CliInputError(str(exc)) from exc


def run_table(args: argparse.Namespace) -> int:
    jobs = load_jobs(args.config)
    all_passed = True
    for job in jobs:
        line: dict[str, Any] = {"label": job.label, "kind": job.kind}
        try:
            line.update(job.run())
        except (GeometryError, ExpressionError, QuadratureError) as exc:
            print(f"job '{job.label}' failed: {exc}", file=sys.stderr)
            line.update({"error": str(exc), "converged": False})
        passed = bool(line.get("converged"))
        if passed and job.expected is not None:
            line["expected"] = job.expected
            deviation = abs(line["value"] - job.expected)
            passed = deviation <= job.tol_abs + job.tol_rel * abs(job.expected)
        elif job.expected is not None:
            line["expected"] = job.expected
            passed = False
        line["pass"] = passed
        all_passed = all_passed and passed
        _emit(line)
    return 0 if all_passed else 2


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "bracket":
            return run_bracket(args)
        if args.command == "area":
            return run_area(args)
        return run_table(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NormalizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExpressionError, GeometryError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
