"""Adaptive numerical integration of complex integrands.

Two schemes back every curved inner product:

* finite intervals use adaptive bisection with an embedded 7/15-point
  Gauss-Kronrod error estimate;
* unbounded (or transform-tamed) axes use double-exponential rules
  (tanh-sinh, exp-sinh, sinh-sinh) refined by mesh halving, which reuse
  all previous evaluations and tolerate integrable endpoint behaviour.

Integrands receive physical coordinates as arrays, one argument per axis,
and must return values broadcast to the same shape.  Axis transforms and
even-symmetry folding declared on the :class:`~curvedqgt.core.Domain` are
applied here, so callers always write integrands in physical variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .core import (
    Axis,
    Domain,
    IntegrandNaNError,
    QuadratureConvergenceError,
)

__all__ = ["QuadratureConfig", "integrate", "integrate_2d_product"]

_Q = math.pi / 2.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and effort caps for one integration call."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    max_levels: int = 10
    scheme: str = "auto"  # "auto" | "gauss-kronrod" | "double-exponential"

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")

    def tolerance(self, value: complex) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


# ---------------------------------------------------------------------------
# Double-exponential maps
# ---------------------------------------------------------------------------

def _de_map(lo: float, hi: float):
    """Return (x(t), w(t), t_cap) realizing the interval (lo, hi)."""
    lo_inf, hi_inf = math.isinf(lo), math.isinf(hi)
    if lo_inf and hi_inf:
        def x_of(t):
            return np.sinh(_Q * np.sinh(t))

        def w_of(t):
            return _Q * np.cosh(t) * np.cosh(_Q * np.sinh(t))

        return x_of, w_of, 5.0
    if hi_inf:
        def x_of(t):
            return lo + np.exp(_Q * np.sinh(t))

        def w_of(t):
            return _Q * np.cosh(t) * np.exp(_Q * np.sinh(t))

        return x_of, w_of, 5.0
    if lo_inf:
        def x_of(t):
            return hi - np.exp(_Q * np.sinh(t))

        def w_of(t):
            return _Q * np.cosh(t) * np.exp(_Q * np.sinh(t))

        return x_of, w_of, 5.0
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def x_of(t):
        return mid + half * np.tanh(_Q * np.sinh(t))

    def w_of(t):
        return half * _Q * np.cosh(t) / np.cosh(_Q * np.sinh(t)) ** 2

    return x_of, w_of, 4.0


def _axis_node_maker(axis: Axis):
    """Return (node_fn, label) with node_fn(t) -> (x_physical, weight).

    The weight combines the double-exponential factor dx/dt with any axis
    transform Jacobian and the even-symmetry fold factor; the trapezoid
    step h is applied by the caller.
    """
    fold = 2.0 if axis.even_fold else 1.0
    if axis.transform is not None:
        tr = axis.transform
        u_of, w_of, t_cap = _de_map(tr.u_lo, tr.u_hi)

        def nodes(t):
            u = u_of(t)
            x = tr.inv(u)
            w = fold * w_of(t) * tr.inv_jac(u)
            return x, w

        return nodes, t_cap
    lo = 0.0 if axis.even_fold else axis.lo
    x_of, w_of, t_cap = _de_map(lo, axis.hi)

    def nodes(t):
        return x_of(t), fold * w_of(t)

    return nodes, t_cap


# ---------------------------------------------------------------------------
# Double-exponential level driver (1-D)
# ---------------------------------------------------------------------------

_H0 = 0.5
_MIN_EXTENT = 3.5
_BLOCK = 16


def _check_finite(vals, xs):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise IntegrandNaNError(np.asarray(xs).ravel()[idx])


def _level_sum(f, node_fn, h, level, t_cap, tail_cut):
    """Sum w*f over the new nodes of one refinement level.

    Level 0 walks all multiples of h, finer levels only odd multiples.
    Both sides expand in blocks until contributions stay below tail_cut.
    """
    total = 0.0 + 0.0j
    if level == 0:
        t0 = np.array([0.0])
        x0, w0 = node_fn(t0)
        v0 = np.asarray(f(x0), dtype=complex) * w0
        _check_finite(v0, x0)
        total += v0.sum()
        sides = (np.arange(1, _BLOCK + 1), -np.arange(1, _BLOCK + 1))
        stride = 1
    else:
        sides = (np.arange(1, 2 * _BLOCK, 2), -np.arange(1, 2 * _BLOCK, 2))
        stride = 2
    for first in sides:
        ks = first.astype(float)
        while True:
            t = ks * h
            keep = np.abs(t) <= t_cap
            if not np.any(keep):
                break
            t = t[keep]
            x, w = node_fn(t)
            vals = np.asarray(f(x), dtype=complex) * w
            _check_finite(vals, x)
            block = vals.sum()
            total += block
            reached_cap = not bool(np.all(keep))
            small = abs(block) <= tail_cut and np.abs(t).min() >= _MIN_EXTENT
            if reached_cap or small:
                break
            ks = ks + np.sign(ks[0]) * stride * _BLOCK
    return total


def _integrate_de(f, node_fn, t_cap, cfg: QuadratureConfig):
    tail_cut = 0.01 * cfg.abs_tol
    h = _H0
    acc = _level_sum(f, node_fn, h, 0, t_cap, tail_cut) * h
    prev = acc
    err = math.inf
    for level in range(1, cfg.max_levels + 1):
        h *= 0.5
        acc = 0.5 * acc + _level_sum(f, node_fn, h, level, t_cap, tail_cut) * h
        err = abs(acc - prev)
        tail_cut = 0.01 * cfg.tolerance(acc)
        if level >= 2 and err <= cfg.tolerance(acc):
            return acc, err
        prev = acc
    raise QuadratureConvergenceError(
        f"double-exponential rule did not converge in {cfg.max_levels} levels",
        acc, err,
    )


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15 adaptive bisection
# ---------------------------------------------------------------------------

_XGK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
])
_WGK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])
_GAUSS_IDX = np.arange(1, 15, 2)


def _gk_panels(f, a: np.ndarray, b: np.ndarray):
    """Evaluate the 7/15 pair on a batch of panels: (values, errors)."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _XGK[None, :]
    vals = np.asarray(f(x.ravel()), dtype=complex).reshape(x.shape)
    _check_finite(vals, x)
    k15 = (vals * _WGK[None, :]).sum(axis=1) * half
    g7 = (vals[:, _GAUSS_IDX] * _WG[None, :]).sum(axis=1) * half
    return k15, np.abs(k15 - g7)


def _integrate_gk(f, lo: float, hi: float, cfg: QuadratureConfig):
    a = np.array([lo], dtype=float)
    b = np.array([hi], dtype=float)
    vals, errs = _gk_panels(f, a, b)
    while True:
        total = vals.sum()
        total_err = errs.sum()
        if total_err <= cfg.tolerance(total):
            return total, float(total_err)
        if a.size >= cfg.max_subdivisions:
            raise QuadratureConvergenceError(
                f"adaptive subdivision exceeded {cfg.max_subdivisions} panels",
                total, float(total_err),
            )
        n_split = max(1, min(a.size // 2 + 1, 64, cfg.max_subdivisions - a.size))
        order = np.argsort(errs)[::-1]
        split, keep = order[:n_split], order[n_split:]
        mids = 0.5 * (a[split] + b[split])
        new_a = np.concatenate([a[keep], a[split], mids])
        new_b = np.concatenate([b[keep], mids, b[split]])
        sub_vals, sub_errs = _gk_panels(f, new_a[keep.size:], new_b[keep.size:])
        a, b = new_a, new_b
        vals = np.concatenate([vals[keep], sub_vals])
        errs = np.concatenate([errs[keep], sub_errs])


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------

def integrate(f: Callable, domain: Domain, cfg: QuadratureConfig | None = None
              ) -> Tuple[complex, float]:
    """Integrate ``f`` over a 1-D domain; returns (value, error estimate).

    ``f`` maps an array of physical coordinates to complex values.  The
    scheme is picked from the domain: plain finite intervals use adaptive
    Gauss-Kronrod bisection, anything unbounded or transform-tamed uses the
    double-exponential rule.
    """
    if cfg is None:
        cfg = QuadratureConfig()
    if domain.dim != 1:
        raise ValueError("integrate expects a 1-D domain; see integrate_2d_product")
    axis = domain.axes[0]
    plain_finite = (
        axis.transform is None
        and not axis.even_fold
        and math.isfinite(axis.lo)
        and math.isfinite(axis.hi)
    )
    if cfg.scheme == "gauss-kronrod" or (cfg.scheme == "auto" and plain_finite):
        if not plain_finite:
            raise ValueError("gauss-kronrod scheme requires a plain finite axis")
        return _integrate_gk(f, axis.lo, axis.hi, cfg)
    node_fn, t_cap = _axis_node_maker(axis)
    return _integrate_de(f, node_fn, t_cap, cfg)


def _axis_level_nodes(node_fn, t_cap, h):
    """All nodes of one mesh level on [-t_cap, t_cap] (non-incremental)."""
    k_max = int(math.floor(t_cap / h))
    t = np.arange(-k_max, k_max + 1) * h
    x, w = node_fn(t)
    return x, w * h


def _as_axis(d) -> Axis:
    if isinstance(d, Domain):
        if d.dim != 1:
            raise ValueError("expected a 1-D domain per axis")
        return d.axes[0]
    if isinstance(d, Axis):
        return d
    raise TypeError("axis specification must be a Domain or Axis")


def integrate_2d_product(f: Callable, domain_x, domain_y,
                         cfg: QuadratureConfig | None = None
                         ) -> Tuple[complex, float]:
    """Tensor-product integration over two axes; returns (value, error).

    ``f(x, y)`` must broadcast over a column of x values against a row of
    y values.  Both axes are refined together on double-exponential meshes
    and the error is estimated from the last refinement step.  Rows and
    columns whose weights cannot contribute above the tolerance budget are
    trimmed, which keeps grids compact for localized integrands.
    """
    if cfg is None:
        cfg = QuadratureConfig()
    ax, ay = _as_axis(domain_x), _as_axis(domain_y)
    nodes_x, cap_x = _axis_node_maker(ax)
    nodes_y, cap_y = _axis_node_maker(ay)

    prev = None
    acc = 0.0 + 0.0j
    err = math.inf
    h = _H0
    for level in range(cfg.max_levels + 1):
        x, wx = _axis_level_nodes(nodes_x, cap_x, h)
        y, wy = _axis_level_nodes(nodes_y, cap_y, h)
        vals = np.asarray(f(x[:, None], y[None, :]), dtype=complex)
        _check_finite(vals, np.broadcast_to(x[:, None], vals.shape))
        acc = np.einsum("i,j,ij->", wx, wy, vals)
        if prev is not None:
            err = abs(acc - prev)
            if level >= 2 and err <= cfg.tolerance(acc):
                return acc, err
        prev = acc
        h *= 0.5
    raise QuadratureConvergenceError(
        f"product rule did not converge in {cfg.max_levels} levels", acc, err
    )
