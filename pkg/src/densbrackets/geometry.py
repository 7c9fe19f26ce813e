"""The three built-in base domains and density bookkeeping.

A :class:`Domain` fixes coordinates, the open integration box, the volume
weight (density of the surface measure with respect to the coordinate
measure) and the normalization prefactor:

* ``square``: coordinates ``(x, y)`` on (0,1) x (0,1), weight 1, prefactor 1;
* ``torus``: coordinates ``(t1, t2)`` on (0,2pi) x (0,2pi), weight 1,
  prefactor 1/(4 pi^2);
* ``sphere``: spherical coordinates ``(theta, phi)`` on (0,pi) x (0,2pi),
  weight sin(theta), prefactor 1/(4 pi).

A probability density on a domain is a positive expression ``rho`` in the
domain coordinates with ``prefactor * integral(rho * weight) = 1``.  Stated
normalization constants are never trusted: :func:`density_mass` recomputes
the total mass and :func:`normalize` rescales by it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expressions import (
    BinOp,
    Call,
    Const,
    Expr,
    Var,
    compile_expr,
    free_vars,
    locate_domain_error,
    simplify,
    to_text,
)
from .quadrature import QuadResult, QuadSpec, integrate_2d

__all__ = [
    "Domain",
    "Density",
    "PositivityReport",
    "GeometryError",
    "NormalizationError",
    "SQUARE",
    "TORUS",
    "SPHERE",
    "DOMAINS",
    "domain_by_name",
    "density_mass",
    "normalize",
    "check_positive",
]


class GeometryError(Exception):
    """Invalid domain/density input."""


class NormalizationError(GeometryError):
    """A density could not be normalized (non-positive or unresolved mass)."""


@dataclass(frozen=True)
class Domain:
    name: str
    coords: tuple[str, str]
    box: tuple[tuple[float, float], tuple[float, float]]
    weight: Expr
    prefactor: float


SQUARE = Domain(
    name="square",
    coords=("x", "y"),
    box=((0.0, 1.0), (0.0, 1.0)),
    weight=Const(1.0),
    prefactor=1.0,
)
TORUS = Domain(
    name="torus",
    coords=("t1", "t2"),
    box=((0.0, 2.0 * math.pi), (0.0, 2.0 * math.pi)),
    weight=Const(1.0),
    prefactor=1.0 / (4.0 * math.pi**2),
)
SPHERE = Domain(
    name="sphere",
    coords=("theta", "phi"),
    box=((0.0, math.pi), (0.0, 2.0 * math.pi)),
    weight=Call("sin", Var("theta")),
    prefactor=1.0 / (4.0 * math.pi),
)

DOMAINS = {d.name: d for d in (SQUARE, TORUS, SPHERE)}


def domain_by_name(name: str) -> Domain:
    try:
        return DOMAINS[name]
    except KeyError:
        raise GeometryError(
            f"unknown domain {name!r}; expected one of {sorted(DOMAINS)}"
        ) from None


@dataclass(frozen=True)
class Density:
    """A density expression together with its (optionally cached) mass."""

    expr: Expr
    mass: QuadResult | None = None


@dataclass(frozen=True)
class PositivityReport:
    """Sign audit of a density on an interior lattice.

    Exact zeros are reported but do not flip ``ok``: in double arithmetic a
    sharply decaying positive density (e.g. exp of a large negative number)
    underflows to +0.0, which is not evidence of a sign violation.  Only
    strictly negative samples are.
    """

    ok: bool
    n: int
    n_negative: int
    n_zero: int
    samples: tuple[tuple[float, float, float], ...]  # offending (u, v, value)


def require_domain_vars(domain: Domain, expr: Expr, what: str) -> None:
    extra = free_vars(expr) - set(domain.coords)
    if extra:
        raise GeometryError(
            f"{what} '{to_text(expr)}' uses variables {sorted(extra)} outside "
            f"the {domain.name} coordinates {domain.coords}"
        )


def compiled_integrand(expr: Expr, coords: tuple[str, str]):
    """Compile a 2-d integrand that raises a precise error on non-finite points."""
    compiled = compile_expr(expr, coords)

    def f(U, V):
        out = np.asarray(compiled(U, V), dtype=float)
        shape = np.broadcast_shapes(np.shape(U), np.shape(V))
        out = np.broadcast_to(out, shape)
        if not np.all(np.isfinite(out)):
            Ub, Vb = np.broadcast_arrays(np.asarray(U, float), np.asarray(V, float))
            Ub, Vb = np.broadcast_to(Ub, shape), np.broadcast_to(Vb, shape)
            idx = tuple(np.argwhere(~np.isfinite(out))[0])
            raise locate_domain_error(
                expr, coords, (float(Ub[idx]), float(Vb[idx]))
            )
        return out

    return f


def density_mass(domain: Domain, rho: Expr, spec: QuadSpec | None = None) -> QuadResult:
    """Total mass ``prefactor * integral(rho * weight)`` over the domain box."""
    require_domain_vars(domain, rho, "density")
    spec = spec or QuadSpec()
    integrand = simplify(BinOp("*", rho, domain.weight))
    result = integrate_2d(
        compiled_integrand(integrand, domain.coords),
        domain.box,
        spec,
        vectorized=True,
    )
    kappa = domain.prefactor
    return QuadResult(
        kappa * result.value,
        kappa * result.error_estimate,
        result.n_evals,
        result.converged,
    )


def normalize(domain: Domain, rho: Expr, spec: QuadSpec | None = None) -> Density:
    """Rescale ``rho`` to unit mass; the returned density caches its recomputed mass."""
    spec = spec or QuadSpec()
    mass = density_mass(domain, rho, spec)
    if not mass.converged:
        raise NormalizationError(
            f"mass integration of '{to_text(rho)}' did not converge "
            f"(estimate {mass.value!r} +/- {mass.error_estimate!r})"
        )
    # reject masses that are negative or lost in the quadrature noise
    if not (
        math.isfinite(mass.value)
        and mass.value > 0.0
        and mass.value > 10.0 * mass.error_estimate
    ):
        raise NormalizationError(
            f"density '{to_text(rho)}' has non-positive mass {mass.value!r} "
            f"(error estimate {mass.error_estimate!r})"
        )
    scaled = simplify(BinOp("/", rho, Const(mass.value)))
    check = density_mass(domain, scaled, spec)
    return Density(expr=scaled, mass=check)


def check_positive(domain: Domain, rho: Expr, n: int) -> PositivityReport:
    """Sample ``rho`` on an n x n interior lattice and report non-positive points."""
    if n < 2:
        raise GeometryError("positivity lattice needs n >= 2")
    require_domain_vars(domain, rho, "density")
    (ulo, uhi), (vlo, vhi) = domain.box
    steps = (np.arange(1, n + 1)) / (n + 1)
    us = ulo + (uhi - ulo) * steps
    vs = vlo + (vhi - vlo) * steps
    f = compiled_integrand(rho, domain.coords)
    values = f(us[:, None], vs[None, :])
    negative = values < 0.0
    zero = values == 0.0
    n_negative = int(np.count_nonzero(negative))
    n_zero = int(np.count_nonzero(zero))
    samples = []
    for mask in (negative, zero):
        for (i, j) in np.argwhere(mask)[: 16 - len(samples)]:
            samples.append((float(us[i]), float(vs[j]), float(values[i, j])))
    return PositivityReport(
        ok=n_negative == 0,
        n=n,
        n_negative=n_negative,
        n_zero=n_zero,
        samples=tuple(samples),
    )
