"""Shared domain types, error hierarchy, and model validation.

Conventions used across the package:

* Parameter vectors are ordered 1-D float arrays; ``ParameterPoint`` wraps
  them with names for user-facing surfaces.  Evaluation callables accept
  either a ``ParameterPoint`` or a bare array (see :func:`param_values`).
* Configuration-space points are passed to evaluation callables as one
  broadcastable array per axis, e.g. ``eval(lam, n, x)`` in one dimension
  and ``eval(lam, n, x, y)`` in two.
* Quantum numbers are tuples; a bare integer is promoted to a 1-tuple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "EngineError",
    "DimensionMismatchError",
    "MetricPositivityError",
    "ParameterBoundaryError",
    "QuadratureError",
    "QuadratureConvergenceError",
    "IntegrandNaNError",
    "NoAnalyticReferenceError",
    "LevelCrossingError",
    "EigensolveError",
    "FitResidualError",
    "EngineWarning",
    "ImaginaryResidueWarning",
    "LinearTermWarning",
    "ParameterPoint",
    "MetricFamily",
    "WavefunctionFamily",
    "AxisTransform",
    "Axis",
    "Domain",
    "GeometricTensors",
    "ValidationReport",
    "param_values",
    "as_quantum_number",
    "validate_model",
]


# ---------------------------------------------------------------------------
# Errors and warnings
# ---------------------------------------------------------------------------

class EngineError(Exception):
    """Base class for all engine failures."""


class DimensionMismatchError(EngineError):
    """Inputs disagree on the configuration-space dimension."""

    def __init__(self, field_name: str, expected: int, got: int):
        self.field_name = field_name
        self.expected = expected
        self.got = got
        super().__init__(
            f"dimension mismatch in '{field_name}': expected {expected}, got {got}"
        )


class MetricPositivityError(EngineError):
    """The metric failed a positive-definiteness or finiteness check."""

    def __init__(self, message: str, location=None):
        self.location = location
        super().__init__(message)


class ParameterBoundaryError(EngineError):
    """A finite-difference stencil would leave the parameter domain."""


class QuadratureError(EngineError):
    """Base class for quadrature failures."""


class QuadratureConvergenceError(QuadratureError):
    """Requested tolerance was not reached; carries the best estimate."""

    def __init__(self, message: str, best_value: complex, err_estimate: float):
        self.best_value = best_value
        self.err_estimate = err_estimate
        super().__init__(
            f"{message} (best value {best_value}, error estimate {err_estimate:.3e})"
        )


class IntegrandNaNError(QuadratureError):
    """The integrand returned a non-finite value; carries the location."""

    def __init__(self, location):
        self.location = location
        super().__init__(f"integrand returned a non-finite value at x = {location}")


class NoAnalyticReferenceError(EngineError):
    """No analytic reference exists for the requested quantity."""


class LevelCrossingError(EngineError):
    """Two eigenvalues approach within the gap threshold; names the pair."""

    def __init__(self, n_low: int, n_high: int, gap: float):
        self.pair = (n_low, n_high)
        super().__init__(
            f"eigenvalue gap between levels {n_low} and {n_high} is {gap:.3e}; "
            "phase alignment across the stencil is unreliable"
        )


class EigensolveError(EngineError):
    """The eigensolver failed to converge."""


class FitResidualError(EngineError):
    """The susceptibility fit residual exceeded its threshold."""

    def __init__(self, residual: float, threshold: float):
        self.residual = residual
        self.threshold = threshold
        super().__init__(
            f"susceptibility fit residual {residual:.3e} exceeds threshold "
            f"{threshold:.3e}; the state may sit near a cusp or domain boundary"
        )


class EngineWarning(UserWarning):
    """Base class for engine diagnostics raised as warnings."""


class ImaginaryResidueWarning(EngineWarning):
    """A nominally real quantity carried a noticeable imaginary part."""


class LinearTermWarning(EngineWarning):
    """The fidelity expansion showed a non-vanishing linear term."""


# ---------------------------------------------------------------------------
# Parameter points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterPoint:
    """An ordered point lambda = (lambda_1, ..., lambda_m) in parameter space."""

    values: tuple
    names: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        names = tuple(str(s) for s in self.names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        if len(values) != len(names):
            raise ValueError(
                f"{len(values)} values but {len(names)} names"
            )
        if len(values) < 1:
            raise ValueError("a parameter point needs at least one component")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite parameter values: {values}")

    @property
    def m(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))

    def get(self, name: str) -> float:
        return self.values[self.names.index(name)]

    def shifted(self, index: int, delta: float) -> "ParameterPoint":
        vals = list(self.values)
        vals[index] += delta
        return ParameterPoint(tuple(vals), self.names)

    def with_values(self, values) -> "ParameterPoint":
        return ParameterPoint(tuple(float(v) for v in values), self.names)


def param_values(lam) -> np.ndarray:
    """Normalize a parameter argument to a 1-D float array."""
    if isinstance(lam, ParameterPoint):
        return lam.as_array()
    arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if arr.ndim != 1:
        raise ValueError("parameter point must be one-dimensional")
    return arr


def as_quantum_number(n) -> tuple:
    if isinstance(n, tuple):
        return n
    if isinstance(n, (list, np.ndarray)):
        return tuple(int(k) for k in n)
    return (int(n),)


# ---------------------------------------------------------------------------
# Metric and wavefunction families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricFamily:
    """Spatial metric g_ij(x, lambda) with determinant helpers.

    ``eval(lam, *axes)`` returns the metric with shape ``(..., dim, dim)``
    where ``...`` broadcasts over the axis arrays.  ``det`` is an optional
    vectorized fast path for det g; ``analytic_log_det_grad(lam, rho, *axes)``
    optionally returns d ln det g / d lambda_rho.
    """

    dim: int
    eval: Callable
    det: Optional[Callable] = None
    analytic_log_det_grad: Optional[Callable] = None

    def det_at(self, lam, *axes) -> np.ndarray:
        lamv = param_values(lam)
        if self.det is not None:
            return np.asarray(self.det(lamv, *axes))
        g = np.asarray(self.eval(lamv, *axes))
        return np.linalg.det(g)

    def sqrt_det(self, lam, *axes) -> np.ndarray:
        d = self.det_at(lam, *axes)
        if np.any(np.asarray(d) <= 0):
            raise MetricPositivityError(
                "metric not positive-definite: det g <= 0 inside the domain"
            )
        return np.sqrt(d)

    def quarter_root_det(self, lam, *axes) -> np.ndarray:
        return np.power(self.det_at(lam, *axes), 0.25)


@dataclass(frozen=True)
class WavefunctionFamily:
    """Complex amplitude psi_n(x, lambda) with optional analytic derivatives.

    ``eval(lam, n, *axes)`` returns complex amplitudes broadcast over the
    axis arrays.  ``analytic_param_grad(lam, n, rho, *axes)``, when present,
    returns d psi / d lambda_rho and is used as the default derivative
    route.  ``gauge_phase`` records an applied gauge phase alpha(lambda).
    """

    dim: int
    eval: Callable
    analytic_param_grad: Optional[Callable] = None
    gauge_phase: Optional[Callable] = None


# ---------------------------------------------------------------------------
# Integration domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisTransform:
    """Change of variables u = fwd(x) taming one integration axis.

    ``inv`` maps the computational variable back to the physical one and
    ``inv_jac`` is |dx/du| > 0 on the interior.  ``u_lo < u_hi`` are the
    computational bounds (may be infinite; the double-exponential rule
    handles them).
    """

    fwd: Callable
    inv: Callable
    inv_jac: Callable
    u_lo: float
    u_hi: float

    def roundtrip_error(self, u_samples: np.ndarray) -> float:
        x = self.inv(u_samples)
        u_back = self.fwd(x)
        scale = np.maximum(1.0, np.abs(u_samples))
        return float(np.max(np.abs(u_back - u_samples) / scale))


@dataclass(frozen=True)
class Axis:
    """One integration axis: physical bounds plus optional taming devices.

    ``even_fold`` asserts the integrand is even under x -> -x so the full
    line can be folded onto (0, inf) with weight 2.
    """

    lo: float = -np.inf
    hi: float = np.inf
    transform: Optional[AxisTransform] = None
    even_fold: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty axis [{self.lo}, {self.hi}]")
        if self.even_fold and not (self.lo == -self.hi):
            raise ValueError("even_fold requires a symmetric axis")


@dataclass(frozen=True)
class Domain:
    """Integration region, a product of 1-D axes."""

    dim: int
    axes: tuple
    kind: str = "custom"

    def __post_init__(self):
        if len(self.axes) != self.dim:
            raise ValueError(f"{self.dim}-dimensional domain needs {self.dim} axes")

    @staticmethod
    def full_line(transform=None, even_fold=False) -> "Domain":
        return Domain(1, (Axis(-np.inf, np.inf, transform, even_fold),), "full-line")

    @staticmethod
    def half_line(transform=None) -> "Domain":
        return Domain(1, (Axis(0.0, np.inf, transform),), "half-line")

    @staticmethod
    def interval(lo: float, hi: float) -> "Domain":
        return Domain(1, (Axis(lo, hi),), "custom")

    @staticmethod
    def product(ax: Axis, ay: Axis) -> "Domain":
        return Domain(2, (ax, ay), "product-of-1D")


# ---------------------------------------------------------------------------
# Bundled geometric output
# ---------------------------------------------------------------------------

@dataclass
class GeometricTensors:
    """All parameter-space tensors for one state at one parameter point.

    ``qgt`` is the complex Hermitian tensor; ``qmt`` its real symmetric
    part; ``berry_curvature`` the antisymmetric curvature F with
    F = 2 Im(qgt); ``berry_connection`` the real connection vector.
    ``quad_error`` sums the quadrature error estimates of every bracket
    that entered the assembly and ``fd_steps`` records the parameter
    steps used for derivatives.
    """

    qgt: np.ndarray
    qmt: np.ndarray
    berry_curvature: np.ndarray
    berry_connection: np.ndarray
    quad_error: float
    fd_steps: np.ndarray

    def tolerance(self, floor: float = 1e-10) -> float:
        """Assertion tolerance policy: 10x summed bracket error, floored."""
        return max(floor, 10.0 * self.quad_error)

    def invariant_residues(self) -> dict:
        g = self.qgt
        return {
            "hermiticity": float(np.max(np.abs(g - g.conj().T))),
            "qmt_symmetry": float(np.max(np.abs(self.qmt - self.qmt.T))),
            "curvature_antisymmetry": float(
                np.max(np.abs(self.berry_curvature + self.berry_curvature.T))
            ),
            "qmt_vs_re_qgt": float(np.max(np.abs(self.qmt - g.real))),
            "curvature_vs_im_qgt": float(
                np.max(np.abs(self.berry_curvature - 2.0 * g.imag))
            ),
        }

    def check_invariants(self, atol: float = 1e-10) -> None:
        for name, res in self.invariant_residues().items():
            if res > atol:
                raise EngineError(f"tensor invariant '{name}' violated: {res:.3e} > {atol:.1e}")


# ---------------------------------------------------------------------------
# Model validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    norm_deviation: float
    metric_min_eigenvalue: float
    sigma_max_abs: float
    n_samples: int
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def _sample_points(domain: Domain, n_samples: int, rng: np.random.Generator):
    """Draw interior sample points, one array per axis."""
    axes_samples = []
    for ax in domain.axes:
        q = rng.uniform(0.05, 0.95, size=n_samples)
        lo, hi = ax.lo, ax.hi
        if ax.even_fold:
            lo = 0.0
        if np.isinf(lo) and np.isinf(hi):
            pts = np.tan(np.pi * (q - 0.5)) * 1.5
        elif np.isinf(hi):
            pts = lo + np.tan(0.5 * np.pi * q) * 1.5
        elif np.isinf(lo):
            pts = hi - np.tan(0.5 * np.pi * q) * 1.5
        else:
            pts = lo + (hi - lo) * q
        axes_samples.append(pts)
    return axes_samples


def validate_model(metric: MetricFamily, psi: WavefunctionFamily, domain: Domain,
                   lam, n=(0,), cfg=None, n_samples: int = 64,
                   seed: int = 2023) -> ValidationReport:
    """Cross-check a (metric, state, domain) triple at one parameter point.

    Samples positive-definiteness of g, the curved norm of psi, and the
    finiteness of the curvature source sigma_rho.  Raises on dimension
    mismatches and non-finite or non-positive-definite metric samples;
    softer findings are collected in the report's problem list.
    """
    from . import geometry  # local import to keep core dependency-free
    from .diffops import FdConfig, d_log_det_g
    from .quadrature import QuadratureConfig

    if psi.dim != metric.dim:
        raise DimensionMismatchError("psi.dim", metric.dim, psi.dim)
    if domain.dim != metric.dim:
        raise DimensionMismatchError("domain.dim", metric.dim, domain.dim)

    lamv = param_values(lam)
    n = as_quantum_number(n)
    rng = np.random.default_rng(seed)
    axes_samples = _sample_points(domain, n_samples, rng)

    g = np.asarray(metric.eval(lamv, *axes_samples))
    if not np.all(np.isfinite(g)):
        bad = np.argwhere(~np.all(np.isfinite(g), axis=(-2, -1)))[0]
        loc = tuple(float(s[bad[0]]) for s in axes_samples)
        raise MetricPositivityError(
            f"metric eval returned a non-finite value at x = {loc}", location=loc
        )
    sym_res = float(np.max(np.abs(g - np.swapaxes(g, -1, -2))))
    eigs = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))
    min_eig = float(np.min(eigs))
    if min_eig <= 0.0:
        bad = int(np.argmin(np.min(eigs, axis=-1)))
        loc = tuple(float(s[bad]) for s in axes_samples)
        raise MetricPositivityError(
            f"metric not positive-definite at sampled x = {loc}", location=loc
        )

    problems = []
    if sym_res > 1e-10:
        problems.append(f"metric asymmetry {sym_res:.3e} at sampled points")

    if cfg is None:
        cfg = geometry.EngineConfig()
    norm = geometry.inner_product(
        geometry.state_of(psi, n), geometry.state_of(psi, n),
        metric, domain, lamv, cfg
    )
    norm_dev = abs(norm[0] - 1.0)

    fd = cfg.fd if hasattr(cfg, "fd") else FdConfig()
    sigma_max = 0.0
    for rho in range(lamv.size):
        sig = -d_log_det_g(metric, lamv, rho, fd, *axes_samples)
        if not np.all(np.isfinite(sig)):
            problems.append(f"sigma_{rho} non-finite at sampled points")
        else:
            sigma_max = max(sigma_max, float(np.max(np.abs(sig))))

    if norm_dev > 1e-6:
        problems.append(f"norm deviation {norm_dev:.3e} exceeds 1e-6")

    return ValidationReport(
        norm_deviation=float(norm_dev),
        metric_min_eigenvalue=min_eig,
        sigma_max_abs=sigma_max,
        n_samples=n_samples,
        problems=problems,
    )
