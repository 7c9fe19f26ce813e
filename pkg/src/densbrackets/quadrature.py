"""Deterministic adaptive Gauss-Kronrod quadrature in 1, 2 and 4 dimensions.

The only rule is the embedded G7/K15 pair.  One dimension is handled by
globally adaptive bisection: the interval with the largest local error
estimate ``|G - K|`` is split first, ties broken by the leftmost interval,
and the final value is a compensated (Kahan) sum of panel contributions in
left-to-right order.  The result is therefore a pure function of the inputs:
repeat runs are bit-identical, and batched (vectorised) evaluation cannot
change the reduction order.

Two and four dimensions are iterated tensor products of the 1-d scheme (inner
tolerance tightened by 10 per nesting for 2-d and by 100 for the 2-d-in-2-d
of the 4-d case).  The total error estimate of an iterated integral is the
outer ``|G - K|`` sum plus a Kronrod-weighted bound on the accumulated inner
error.  Kronrod nodes are strictly interior, so integrands defined on open
intervals are never evaluated at the endpoints.

Integrands may be plain scalar callables or, with ``vectorized=True``,
numpy-broadcasting callables (such as the ones produced by
:func:`densbrackets.expressions.compile_expr`).  Vectorised integrands must
return finite values; any NaN or infinity aborts the integration with the
offending point reported.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadSpec",
    "QuadResult",
    "QuadratureError",
    "NonFiniteIntegrandError",
    "integrate_1d",
    "integrate_2d",
    "integrate_4d",
    "kronrod_panel",
    "gauss_kronrod_rule",
]


class QuadratureError(Exception):
    """Raised for invalid quadrature inputs."""


class NonFiniteIntegrandError(QuadratureError):
    """A vectorised integrand produced NaN or infinity."""

    def __init__(self, point: tuple[float, ...]):
        self.point = point
        super().__init__(f"integrand is not finite at {point!r}")


# G7/K15 nodes and weights on [-1, 1], ascending.  Derived from the Legendre
# polynomial P7 and its Stieltjes extension by 50-digit moment matching; the
# embedded Gauss points sit at the odd indices.
_GK_NODES = np.array(
    (
        -0.991455371120812639,
        -0.949107912342758525,
        -0.864864423359769073,
        -0.741531185599394440,
        -0.586087235467691130,
        -0.405845151377397167,
        -0.207784955007898468,
        0.0,
        0.207784955007898468,
        0.405845151377397167,
        0.586087235467691130,
        0.741531185599394440,
        0.864864423359769073,
        0.949107912342758525,
        0.991455371120812639,
    )
)
_K15_WEIGHTS = np.array(
    (
        0.0229353220105292250,
        0.0630920926299785533,
        0.104790010322250184,
        0.140653259715525919,
        0.169004726639267903,
        0.190350578064785410,
        0.204432940075298892,
        0.209482141084727828,
        0.204432940075298892,
        0.190350578064785410,
        0.169004726639267903,
        0.140653259715525919,
        0.104790010322250184,
        0.0630920926299785533,
        0.0229353220105292250,
    )
)
_G7_WEIGHTS_EMBEDDED = np.zeros(15)
_G7_WEIGHTS_EMBEDDED[1::2] = (
    0.129484966168869693,
    0.279705391489276668,
    0.381830050505118945,
    0.417959183673469388,
    0.381830050505118945,
    0.279705391489276668,
    0.129484966168869693,
)

_RULES = ("g7k15",)


def gauss_kronrod_rule() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (nodes, kronrod weights, embedded gauss weights) on [-1, 1]."""
    return _GK_NODES.copy(), _K15_WEIGHTS.copy(), _G7_WEIGHTS_EMBEDDED.copy()


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances and budgets for one integration call.

    ``max_subdivisions`` limits the number of bisections per axis;
    ``max_evals`` (optional) caps the total number of scalar integrand
    evaluations across all nesting levels.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    rule: str = "g7k15"
    max_evals: int | None = None

    def __post_init__(self):
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise QuadratureError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise QuadratureError("max_subdivisions must be >= 1")
        if self.rule not in _RULES:
            raise QuadratureError(f"unknown rule {self.rule!r}")
        if self.max_evals is not None and self.max_evals < 15:
            raise QuadratureError("max_evals must allow at least one panel")

    def tightened(self, factor: float) -> "QuadSpec":
        return replace(
            self, abs_tol=self.abs_tol / factor, rel_tol=self.rel_tol / factor
        )


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    n_evals: int
    converged: bool


class _Budget:
    """Shared evaluation counter across nesting levels."""

    __slots__ = ("used", "limit")

    def __init__(self, limit: int | None):
        self.used = 0
        self.limit = limit

    def spend(self, n: int) -> None:
        self.used += n

    @property
    def exhausted(self) -> bool:
        return self.limit is not None and self.used >= self.limit


# Internal vector integrand protocol: f(nodes[n]) -> (values[..., n], aux)
# where aux is either None or per-node absolute error carried by the values
# (used to propagate inner-integral error estimates outward).
_VecIntegrand = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray | None]]


class _Panel:
    __slots__ = ("left", "right", "value", "err", "aux", "priority", "splittable")

    def __init__(self, left, right, value, err, aux):
        self.left = left
        self.right = right
        self.value = value  # ndarray, batch shape
        self.err = err  # ndarray, batch shape
        self.aux = aux  # ndarray, batch shape (zeros if no aux)
        self.priority = float(np.max(err + aux))
        mid = 0.5 * (left + right)
        self.splittable = left < mid < right


def _evaluate_panels(
    f: _VecIntegrand, bounds: Sequence[tuple[float, float]], budget: _Budget
) -> list[_Panel]:
    """Evaluate G7/K15 on each (a, b) in ``bounds`` with a single f call."""
    xs = []
    for a, b in bounds:
        half = 0.5 * (b - a)
        xs.append(0.5 * (a + b) + half * _GK_NODES)
    x = np.concatenate(xs)
    values, aux = f(x)
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != x.size:
        values = np.broadcast_to(values, values.shape[:-1] + (x.size,))
    budget.spend(values.size)
    panels = []
    for i, (a, b) in enumerate(bounds):
        half = 0.5 * (b - a)
        chunk = values[..., 15 * i : 15 * (i + 1)]
        if not np.all(np.isfinite(chunk)):
            bad = np.argwhere(~np.isfinite(chunk))[0]
            raise NonFiniteIntegrandError((float(x[15 * i + bad[-1]]),))
        k15 = half * (chunk @ _K15_WEIGHTS)
        g7 = half * (chunk @ _G7_WEIGHTS_EMBEDDED)
        err = np.abs(k15 - g7)
        if aux is None:
            aux_total = np.zeros_like(k15)
        else:
            achunk = np.broadcast_to(
                np.asarray(aux, dtype=float), values.shape
            )[..., 15 * i : 15 * (i + 1)]
            aux_total = half * (np.abs(achunk) @ _K15_WEIGHTS)
        panels.append(_Panel(a, b, k15, err, aux_total))
    return panels


def _kahan_total(parts: list[np.ndarray]) -> np.ndarray:
    total = np.zeros_like(parts[0])
    comp = np.zeros_like(parts[0])
    for p in parts:
        y = p - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _adaptive(
    f: _VecIntegrand,
    a: float,
    b: float,
    spec: QuadSpec,
    budget: _Budget,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Globally adaptive 1-d integration of a batched integrand.

    Returns per-component (value, error_estimate, converged); the error
    includes both the |G - K| sums and the accumulated aux error.
    """
    first = _evaluate_panels(f, [(a, b)], budget)[0]
    active: dict[int, _Panel] = {0: first}
    heap: list[tuple[float, float, int]] = []
    if first.splittable:
        heapq.heappush(heap, (-first.priority, first.left, 0))
    next_id = 1

    val_total = first.value.copy()
    err_total = first.err + first.aux
    splits = 0

    def converged_now() -> bool:
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(val_total))
        return bool(np.all(err_total <= tol))

    converged = converged_now()
    while not converged:
        if splits >= spec.max_subdivisions or budget.exhausted or not heap:
            break
        _, _, ident = heapq.heappop(heap)
        panel = active.pop(ident)
        mid = 0.5 * (panel.left + panel.right)
        halves = _evaluate_panels(
            f, [(panel.left, mid), (mid, panel.right)], budget
        )
        val_total = val_total - panel.value
        err_total = err_total - (panel.err + panel.aux)
        for h in halves:
            active[next_id] = h
            if h.splittable:
                heapq.heappush(heap, (-h.priority, h.left, next_id))
            next_id += 1
            val_total = val_total + h.value
            err_total = err_total + h.err + h.aux
        splits += 1
        converged = converged_now()

    # Deterministic final reduction: panels in left-to-right order.
    panels = sorted(active.values(), key=lambda p: p.left)
    value = _kahan_total([p.value for p in panels])
    error = _kahan_total([p.err + p.aux for p in panels])
    return value, error, converged


# -- public 1-d --------------------------------------------------------------


def _scalar_to_vec_1d(f: Callable[[float], float]) -> _VecIntegrand:
    def g(x: np.ndarray):
        return np.array([f(float(v)) for v in x], dtype=float), None

    return g


def _vectorized_to_vec_1d(f: Callable[..., np.ndarray]) -> _VecIntegrand:
    def g(x: np.ndarray):
        out = np.asarray(f(x), dtype=float)
        return np.broadcast_to(out, x.shape), None

    return g


def integrate_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    spec: QuadSpec | None = None,
    *,
    vectorized: bool = False,
) -> QuadResult:
    """Adaptive integral of ``f`` over the open interval (a, b)."""
    if not a < b:
        raise QuadratureError(f"invalid interval ({a!r}, {b!r})")
    spec = spec or QuadSpec()
    budget = _Budget(spec.max_evals)
    fv = _vectorized_to_vec_1d(f) if vectorized else _scalar_to_vec_1d(f)
    value, err, ok = _adaptive(fv, float(a), float(b), spec, budget)
    ok = ok and not budget.exhausted
    return QuadResult(float(value), float(err), budget.used, ok)


def kronrod_panel(
    f: Callable[[float], float], a: float, b: float
) -> tuple[float, float, float]:
    """Single G7/K15 panel on (a, b): returns (gauss, kronrod, |G - K|)."""
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _GK_NODES
    fx = np.array([f(float(v)) for v in x], dtype=float)
    k15 = half * float(fx @ _K15_WEIGHTS)
    g7 = half * float(fx @ _G7_WEIGHTS_EMBEDDED)
    return g7, k15, abs(k15 - g7)


# -- 2-d ---------------------------------------------------------------------

Box2D = tuple[tuple[float, float], tuple[float, float]]


def _check_box(box: Box2D) -> Box2D:
    (ulo, uhi), (vlo, vhi) = box
    if not (ulo < uhi and vlo < vhi):
        raise QuadratureError(f"invalid box {box!r}")
    return ((float(ulo), float(uhi)), (float(vlo), float(vhi)))


def _integrate_2d_core(
    fpair: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray | None]],
    box: Box2D,
    spec: QuadSpec,
    budget: _Budget,
) -> tuple[float, float, bool]:
    """Iterated adaptive 2-d driver; inner axis is the second box axis.

    ``fpair(U, V)`` must broadcast and return (values, aux-or-None).
    """
    (ulo, uhi), (vlo, vhi) = _check_box(box)
    inner_spec = spec.tightened(10.0)
    inner_ok = True

    def outer_integrand(u_nodes: np.ndarray):
        nonlocal inner_ok

        def inner_integrand(v_nodes: np.ndarray):
            return fpair(u_nodes[:, None], v_nodes[None, :])

        vals, errs, ok = _adaptive(inner_integrand, vlo, vhi, inner_spec, budget)
        inner_ok = inner_ok and ok
        return vals, errs

    value, err, outer_ok = _adaptive(outer_integrand, ulo, uhi, spec, budget)
    return float(value), float(err), outer_ok and inner_ok


def integrate_2d(
    f: Callable[[float, float], float],
    box: Box2D,
    spec: QuadSpec | None = None,
    *,
    vectorized: bool = False,
) -> QuadResult:
    """Iterated adaptive integral over a rectangle.

    Outer integration runs over the first box axis, inner over the second,
    with the inner tolerance tightened by a factor of 10.  The error estimate
    is the outer |G - K| sum plus the accumulated inner estimates.
    """
    spec = spec or QuadSpec()
    budget = _Budget(spec.max_evals)
    if vectorized:
        def fpair(U, V):
            out = np.asarray(f(U, V), dtype=float)
            shape = np.broadcast_shapes(np.shape(U), np.shape(V))
            return np.broadcast_to(out, shape), None
    else:
        def fpair(U, V):
            Ub, Vb = np.broadcast_arrays(U, V)
            out = np.empty(Ub.shape, dtype=float)
            flat = out.reshape(-1)
            for i, (uu, vv) in enumerate(zip(Ub.reshape(-1), Vb.reshape(-1))):
                flat[i] = f(float(uu), float(vv))
            return out, None

    value, err, ok = _integrate_2d_core(fpair, box, spec, budget)
    ok = ok and not budget.exhausted
    return QuadResult(value, err, budget.used, ok)


# -- 4-d ---------------------------------------------------------------------


def integrate_4d(
    f: Callable[[float, float, float, float], float],
    outer_box: Box2D,
    inner_box: Box2D,
    spec: QuadSpec | None = None,
    *,
    vectorized: bool = False,
) -> QuadResult:
    """Iterated 4-d integral: adaptive 2-d over the outer box whose integrand
    is an adaptive 2-d integral over the inner box at 100x tighter tolerance.

    ``f(s, t, u, v)`` takes the outer coordinates first.  With
    ``vectorized=True`` it must broadcast over ``u``/``v`` arrays for fixed
    scalar ``(s, t)``.  The evaluation budget (``spec.max_evals``) is shared
    by all levels; exhausting it yields the best estimate with
    ``converged=False``.
    """
    spec = spec or QuadSpec()
    outer_box = _check_box(outer_box)
    inner_box = _check_box(inner_box)
    inner_spec = spec.tightened(100.0)
    budget = _Budget(spec.max_evals)
    inner_ok = True

    if vectorized:
        def point_integrand(s: float, t: float):
            def g(U, V):
                out = np.asarray(f(s, t, U, V), dtype=float)
                shape = np.broadcast_shapes(np.shape(U), np.shape(V))
                return np.broadcast_to(out, shape), None

            return g
    else:
        def point_integrand(s: float, t: float):
            def g(U, V):
                Ub, Vb = np.broadcast_arrays(U, V)
                out = np.empty(Ub.shape, dtype=float)
                flat = out.reshape(-1)
                for i, (uu, vv) in enumerate(zip(Ub.reshape(-1), Vb.reshape(-1))):
                    flat[i] = f(s, t, float(uu), float(vv))
                return out, None

            return g

    def fpair(S, T):
        nonlocal inner_ok
        Sb, Tb = np.broadcast_arrays(S, T)
        vals = np.empty(Sb.shape, dtype=float)
        errs = np.empty(Sb.shape, dtype=float)
        for idx in np.ndindex(Sb.shape):
            v, e, ok = _integrate_2d_core(
                lambda U, V, _s=float(Sb[idx]), _t=float(Tb[idx]): point_integrand(
                    _s, _t
                )(U, V),
                inner_box,
                inner_spec,
                budget,
            )
            inner_ok = inner_ok and ok
            vals[idx] = v
            errs[idx] = e
        return vals, errs

    value, err, outer_ok = _integrate_2d_core(fpair, outer_box, spec, budget)
    converged = outer_ok and inner_ok and not budget.exhausted
    return QuadResult(value, err, budget.used, converged)
