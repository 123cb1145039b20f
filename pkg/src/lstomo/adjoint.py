"""Traveltime misfit, adjoint transport solve, and the slowness gradient.

The misfit is the boundary L2 norm

    E = 1/2 sum_j int_Gamma (T_j - T*_j)^2 ds

discretized with trapezoid weights (h per node, halved at the four domain
corners).  Each adjoint field solves the stationary transport

    -div(lambda * grad T) = 0        in Omega
    lambda * dT/dn = T - T*          on Gamma
    lambda = 0                       on the rest of the boundary

with a conservative face-flux upwind scheme: face velocities are -grad T
from the two adjacent nodes, inflow faces take the neighbour lambda and
outflow faces the node's own, and the resulting linear system is relaxed by
four-ordering Gauss-Seidel sweeps.  Information then flows from the
measurement boundary backward along rays, which is what makes the problem
well-posed.  The slowness gradient is dE/dS = sum_j lambda_j * S, summed in
fixed source order so runs are bit-reproducible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .eikonal import EikonalSolution, SourceSpec
from .errors import DataError
from .grid import BoundarySet, ScalarField

EPS_NORMAL = 1e-6
DEFAULT_TOL = 1e-9
DEFAULT_MAX_SWEEPS = 1000


@dataclass
class Survey:
    """Sources, measurement boundary, and observed boundary traveltimes."""

    sources: list[SourceSpec]
    gamma_set: BoundarySet
    observed: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.observed) != len(self.sources):
            raise DataError(
                f"{len(self.observed)} observed arrays for {len(self.sources)} sources"
            )
        m = len(self.gamma_set)
        obs = []
        for k, arr in enumerate(self.observed):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != (m,):
                raise DataError(
                    f"observed[{k}] has shape {arr.shape}, expected ({m},)"
                )
            if np.any(arr < 0.0):
                raise DataError(f"observed[{k}] contains negative traveltimes")
            obs.append(arr)
        self.observed = obs

    @property
    def n_sources(self) -> int:
        return len(self.sources)


def misfit(T_sim: list[np.ndarray], survey: Survey) -> float:
    """Boundary L2 misfit of simulated vs observed traveltimes."""
    if len(T_sim) != survey.n_sources:
        raise DataError(f"{len(T_sim)} simulated traces for {survey.n_sources} sources")
    w = survey.gamma_set.quad_weights()
    total = 0.0
    for sim, obs in zip(T_sim, survey.observed):
        sim = np.asarray(sim, dtype=np.float64)
        if sim.shape != obs.shape:
            raise DataError(f"trace shape {sim.shape} != observed {obs.shape}")
        r = sim - obs
        total += float(np.sum(w * r * r))
    return 0.5 * total


def boundary_normal_derivative(T: ScalarField, gamma_set: BoundarySet) -> np.ndarray:
    """One-sided outward dT/dn at each Gamma node (max of both at corners)."""
    g = T.grid
    v = T.values
    h = g.h
    out = np.empty(len(gamma_set))
    for k in range(len(gamma_set)):
        i = int(gamma_set.ii[k])
        j = int(gamma_set.jj[k])
        cands = []
        if i == 0:
            cands.append((v[j, 0] - v[j, 1]) / h)
        if i == g.nx - 1:
            cands.append((v[j, g.nx - 1] - v[j, g.nx - 2]) / h)
        if j == 0:
            cands.append((v[0, i] - v[1, i]) / h)
        if j == g.ny - 1:
            cands.append((v[g.ny - 1, i] - v[g.ny - 2, i]) / h)
        out[k] = max(cands)
    return out


@njit(cache=True, nogil=True)
def _adjoint_sweeps(lam, wx, wz, tol, max_cycles):
    """Gauss-Seidel sweeps for the conservative upwind transport.

    lam carries Dirichlet values on the whole boundary; only interior nodes
    are updated.  wx[j,i] is the velocity on the face between nodes (i,j)
    and (i+1,j); wz likewise in z.  Returns (cycles, last_change).
    """
    ny, nx = lam.shape
    cycles = 0
    change = 1e30
    while cycles < max_cycles:
        change = 0.0
        for ordering in range(4):
            if ordering == 0:
                i0, i1, istep = 1, nx - 1, 1
                j0, j1, jstep = 1, ny - 1, 1
            elif ordering == 1:
                i0, i1, istep = nx - 2, 0, -1
                j0, j1, jstep = 1, ny - 1, 1
            elif ordering == 2:
                i0, i1, istep = 1, nx - 1, 1
                j0, j1, jstep = ny - 2, 0, -1
            else:
                i0, i1, istep = nx - 2, 0, -1
                j0, j1, jstep = ny - 2, 0, -1
            for j in range(j0, j1, jstep):
                for i in range(i0, i1, istep):
                    w_e = wx[j, i]
                    w_w = wx[j, i - 1]
                    w_n = wz[j, i]
                    w_s = wz[j - 1, i]
                    denom = (
                        max(w_e, 0.0)
                        - min(w_w, 0.0)
                        + max(w_n, 0.0)
                        - min(w_s, 0.0)
                    )
                    if denom <= 0.0:
                        new = 0.0
                    else:
                        num = (
                            -min(w_e, 0.0) * lam[j, i + 1]
                            + max(w_w, 0.0) * lam[j, i - 1]
                            - min(w_n, 0.0) * lam[j + 1, i]
                            + max(w_s, 0.0) * lam[j - 1, i]
                        )
                        new = num / denom
                    diff = abs(new - lam[j, i])
                    if diff > change:
                        change = diff
                    lam[j, i] = new
        cycles += 1
        if change <= tol:
            break
    return cycles, change


@dataclass
class AdjointSolution:
    lam: ScalarField
    residual_norm: float
    sweeps_used: int
    converged: bool
    n_nonoutflow: int = 0  # Gamma nodes with dT/dn <= 0, forced to lambda = 0
    source: SourceSpec | None = field(default=None, repr=False)


def solve_adjoint(
    T: EikonalSolution,
    residual: np.ndarray,
    gamma_set: BoundarySet,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> AdjointSolution:
    """Solve the adjoint transport for one source given boundary residuals."""
    grid = T.T.grid
    if not grid.same_as(gamma_set.grid):
        raise DataError("traveltime field and boundary set live on different grids")
    residual = np.asarray(residual, dtype=np.float64)
    if residual.shape != (len(gamma_set),):
        raise DataError(
            f"residual has shape {residual.shape}, expected ({len(gamma_set)},)"
        )
    h = grid.h
    Tv = T.T.values
    wx = -(Tv[:, 1:] - Tv[:, :-1]) / h
    wz = -(Tv[1:, :] - Tv[:-1, :]) / h

    lam = np.zeros(grid.shape)
    dTdn = boundary_normal_derivative(T.T, gamma_set)
    usable = dTdn > 0.0
    n_nonoutflow = int(np.count_nonzero(~usable))
    vals = np.where(usable, residual / np.maximum(dTdn, EPS_NORMAL), 0.0)
    lam[gamma_set.jj, gamma_set.ii] = vals

    cycles, change = _adjoint_sweeps(lam, wx, wz, float(tol), int(max_sweeps))
    converged = change <= tol
    if not converged:
        warnings.warn(
            f"adjoint solve stopped at {cycles} sweep cycles with change {change:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return AdjointSolution(
        lam=ScalarField(grid, lam),
        residual_norm=float(change),
        sweeps_used=cycles,
        converged=converged,
        n_nonoutflow=n_nonoutflow,
        source=T.source,
    )


def slowness_gradient(
    adjoints: list[AdjointSolution],
    S: ScalarField,
    exclude_nodes: list[tuple[int, int]] = (),
) -> ScalarField:
    """dE/dS = sum_j lambda_j * S, accumulated in list (source) order.

    exclude_nodes zeroes the gradient at the given (i, j) nodes; the eikonal
    solution is not differentiable at snapped source nodes, so the inversion
    passes them here.
    """
    acc = np.zeros(S.grid.shape)
    for adj in adjoints:
        acc += adj.lam.values
    out = acc * S.values
    for i, j in exclude_nodes:
        out[j, i] = 0.0
    return ScalarField(S.grid, out)
