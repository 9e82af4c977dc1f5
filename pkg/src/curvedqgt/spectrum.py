"""1-D spectral solver for the curved-space kinetic operator.

The kinetic term is the curved Laplacian (1/sqrt(g)) d_x (sqrt(g) g^xx d_x)
discretized in flux form on a uniform grid in a model-chosen coordinate u:
with measure weight w(u) = sqrt(g) |dx/du| the flux coefficient collapses
to c(u) = 1/w(u), so the discrete operator is symmetric under the
w-weighted inner product by construction.  Eigenpairs solve the
generalized problem H phi = E W phi, reduced to a standard symmetric
tridiagonal one through the diagonal similarity W^(-1/2) H W^(-1/2).

Models whose measure degenerates at an endpoint are solved on the half
coordinate range; when two boundary passes are declared (zero-derivative
and zero-value at the inner edge) their spectra interleave to form the
full level sequence.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.interpolate import CubicSpline

from .core import (
    EigensolveError,
    EngineError,
    LevelCrossingError,
    MetricPositivityError,
    WavefunctionFamily,
    as_quantum_number,
    param_values,
)
from .models import ModelSpec

__all__ = [
    "Grid1D",
    "DiscreteHamiltonian",
    "make_grid",
    "build_hamiltonian",
    "eigensolve",
    "model_spectrum",
    "numerical_wavefunction_family",
]

_END_OFFSET = 1e-8  # inward nudge for coefficient evaluation at degenerate endpoints


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered grid in the solver coordinate u."""

    points: np.ndarray
    spacing: float
    boundary: tuple  # (left, right), each "dirichlet" | "neumann"
    lam: np.ndarray
    x_of: Callable
    dxdu: Callable
    u_of: Callable
    u_lo: float
    u_hi: float

    def __post_init__(self):
        if not np.all(np.diff(self.points) > 0):
            raise ValueError("grid points must be strictly increasing")
        for side in self.boundary:
            if side not in ("dirichlet", "neumann"):
                raise ValueError(f"unknown boundary condition '{side}'")

    @property
    def n(self) -> int:
        return self.points.size

    def with_boundary(self, left: str, right: str = "dirichlet") -> "Grid1D":
        return dataclasses.replace(self, boundary=(left, right))


@dataclass(frozen=True)
class DiscreteHamiltonian:
    """Sparse symmetric H and the diagonal measure weights W."""

    h_matrix: scipy.sparse.spmatrix
    weights: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        res = abs(self.h_matrix - self.h_matrix.T).max()
        if res > 1e-12 * max(1.0, abs(self.h_matrix).max()):
            raise EngineError(f"discrete operator asymmetry {res:.3e}")
        if np.any(self.weights <= 0):
            raise MetricPositivityError("non-positive measure weight on the grid")


def make_grid(model: ModelSpec, lam, n_points: int = 2000,
              n_max: int = 6, left_boundary: Optional[str] = None) -> Grid1D:
    """Uniform grid spanning the region holding the bound-state mass."""
    if model.spectral is None:
        raise EngineError(f"model {model.name} declares no spectral coordinate")
    if model.dim != 1:
        raise EngineError("the spectral solver is one-dimensional")
    lamv = param_values(lam)
    x_of, dxdu, u_of = model.spectral.coordinate(lamv)
    u_lo, u_hi = model.spectral.u_range(lamv, n_max)
    h = (u_hi - u_lo) / n_points
    points = u_lo + (np.arange(n_points) + 0.5) * h
    left = left_boundary or model.spectral.left_boundaries[0]
    return Grid1D(
        points=points, spacing=h, boundary=(left, "dirichlet"), lam=lamv,
        x_of=x_of, dxdu=dxdu, u_of=u_of, u_lo=u_lo, u_hi=u_hi,
    )


def build_hamiltonian(model: ModelSpec, grid: Grid1D,
                      lam=None) -> DiscreteHamiltonian:
    """Flux-form discretization of -(hbar^2/2) Laplacian + V on the grid.

    Face coefficients are 1/w at the cell faces, with the outermost faces
    nudged inward since coordinate-degenerate endpoints (where the measure
    vanishes or the map blows up) sit exactly on them.
    """
    lamv = grid.lam if lam is None else param_values(lam)
    h = grid.spacing
    u_cells = grid.points
    x_cells = grid.x_of(u_cells)
    w = np.asarray(model.metric.sqrt_det(lamv, x_cells)) \
        * np.abs(np.asarray(grid.dxdu(u_cells)))
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise MetricPositivityError("sqrt(g) is not positive on the grid")

    u_faces = grid.u_lo + np.arange(grid.n + 1) * h
    u_faces = u_faces.astype(float)
    u_faces[0] += _END_OFFSET * h
    u_faces[-1] -= _END_OFFSET * h
    x_faces = grid.x_of(u_faces)
    w_faces = np.asarray(model.metric.sqrt_det(lamv, x_faces)) \
        * np.abs(np.asarray(grid.dxdu(u_faces)))
    c_faces = 1.0 / w_faces

    left, right = grid.boundary
    c_left = 0.0 if left == "neumann" else 2.0 * c_faces[0]
    c_right = 0.0 if right == "neumann" else 2.0 * c_faces[-1]

    diag = c_faces[1:-1].copy()
    main = np.empty(grid.n)
    main[0] = c_left + c_faces[1]
    main[-1] = c_faces[-2] + c_right
    if grid.n > 2:
        main[1:-1] = c_faces[1:-2] + c_faces[2:-1]
    off = -diag

    potential = model.potential
    if model.spectral is not None and model.spectral.effective_potential is not None:
        potential = model.spectral.effective_potential
    v_cells = np.asarray(potential(lamv, x_cells), dtype=float)

    hbar = model.hbar
    h_main = 0.5 * hbar * hbar * main / h + w * v_cells * h
    h_off = 0.5 * hbar * hbar * off / h
    h_matrix = scipy.sparse.diags(
        [h_off, h_main, h_off], offsets=[-1, 0, 1], format="csr"
    )
    return DiscreteHamiltonian(h_matrix=h_matrix, weights=w * h, grid=grid)


def eigensolve(dh: DiscreteHamiltonian, k: int):
    """k lowest eigenpairs of H phi = E W phi, W-orthonormal, with residuals."""
    if k > 10:
        raise ValueError("eigensolve serves the lowest k <= 10 levels")
    if k <= 0:
        return []
    winv = 1.0 / np.sqrt(dh.weights)
    main = dh.h_matrix.diagonal() * winv * winv
    off = dh.h_matrix.diagonal(1) * winv[:-1] * winv[1:]
    try:
        vals, vecs = scipy.linalg.eigh_tridiagonal(
            main, off, select="i", select_range=(0, k - 1)
        )
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigensolveError(f"tridiagonal eigensolve failed: {exc}") from exc
    out = []
    for j in range(k):
        phi = vecs[:, j] * winv
        h_phi = dh.h_matrix @ phi
        w_phi = dh.weights * phi
        residual = float(
            np.linalg.norm(h_phi - vals[j] * w_phi) / np.linalg.norm(w_phi)
        )
        out.append((float(vals[j]), phi, residual))
    return out


def model_spectrum(model: ModelSpec, lam, k: int, n_points: int = 2000):
    """Lowest k levels, merging boundary-condition passes when declared.

    Returns a list of (energy, residual) sorted by energy.
    """
    if k <= 0:
        return []
    levels = solve_levels(model, lam, k, n_points)
    return [(e, r) for e, _, r, _ in levels]


def solve_levels(model: ModelSpec, lam, k: int, n_points: int = 2000,
                 grid: Optional[Grid1D] = None):
    """Merged eigenpairs (energy, phi, residual, pass_index) across passes."""
    if model.spectral is None:
        raise EngineError(f"model {model.name} declares no spectral coordinate")
    lamv = param_values(lam)
    base = grid or make_grid(model, lamv, n_points, n_max=2 * k + 3)
    merged = []
    for idx, left in enumerate(model.spectral.left_boundaries):
        g = base.with_boundary(left)
        dh = build_hamiltonian(model, g, lamv)
        per_pass = min(10, k)
        for e, phi, res in eigensolve(dh, per_pass):
            merged.append((e, phi, res, idx))
    merged.sort(key=lambda t: t[0])
    return merged[:k]


def numerical_wavefunction_family(model: ModelSpec, lam, n_levels: int,
                                  n_points: int = 1500,
                                  gap_threshold: float = 1e-6
                                  ) -> WavefunctionFamily:
    """Wavefunction family backed by grid eigenvectors.

    Solves lazily at every requested parameter point on a frozen grid (the
    one built at the base point), aligns eigenvector signs against the
    base solve so parameter differentiation sees a smooth gauge, and
    interpolates in the solver coordinate.  Accuracy is grid-limited;
    expect metric components at the few-1e-3 level.
    """
    base_lam = param_values(lam)
    grid = make_grid(model, base_lam, n_points, n_max=2 * n_levels + 3)
    cache: dict = {}

    def solve(lamv: np.ndarray):
        key = lamv.tobytes()
        if key in cache:
            return cache[key]
        levels = solve_levels(model, lamv, n_levels + 1, grid=grid)
        gaps = np.diff([e for e, _, _, _ in levels])
        if np.any(gaps < gap_threshold):
            j = int(np.argmin(gaps))
            raise LevelCrossingError(j, j + 1, float(gaps[j]))
        base = cache.get(base_lam.tobytes())
        splines = []
        for j, (e, phi, _, _) in enumerate(levels[:n_levels]):
            if base is not None:
                overlap = float(np.sum(phi * base[j][1] * grid.spacing))
                if overlap < 0:
                    phi = -phi
            splines.append((e, phi, CubicSpline(grid.points, phi)))
        cache[key] = splines
        return splines

    solve(base_lam)

    # the physical norm picks up the covering multiplicity of the grid
    # coordinate, so the interpolated state is rescaled to unit curved norm
    scale = 1.0 / np.sqrt(model.spectral.fold)

    def ev(lamv, n, x):
        n = as_quantum_number(n)
        if len(n) != 1 or not 0 <= n[0] < n_levels:
            raise EngineError(f"numerical family holds levels 0..{n_levels - 1}")
        _, _, spline = solve(np.asarray(lamv, dtype=float))[n[0]]
        x = np.asarray(x, dtype=float)
        u = np.asarray(grid.u_of(x))
        out = np.zeros(u.shape, dtype=complex)
        # extrapolate across the half-cell sliver at the inner edge; beyond
        # the outer edge the state has decayed to zero
        inside = (u >= grid.u_lo) & (u <= grid.points[-1])
        if np.any(inside):
            out[inside] = scale * spline(u[inside])
        return out

    return WavefunctionFamily(dim=1, eval=ev, analytic_param_grad=None)
