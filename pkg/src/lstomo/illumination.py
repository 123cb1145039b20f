"""Ray-illumination labeling and the illumination-weighted error.

A labeling field F is constant along first-arrival rays, so it satisfies
grad F . grad T = 0.  Setting F = 1 on the measurement boundary and 0 on
the rest, and sweeping the value back into the domain against the ray
direction, marks every point whose ray reaches a receiver.  Each interior
node takes a convex combination of its neighbours on the downstream (larger
T) side, weighted by the one-sided T differences; that keeps F in [0, 1] by
the max principle.  Nodes with no downstream neighbour (flat plateaus,
exact local maxima of T) take the max of their neighbours and are counted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .eikonal import EikonalSolution
from .errors import ConfigurationError, DataError
from .grid import BoundarySet, ScalarField

DEFAULT_TOL = 1e-9
DEFAULT_MAX_SWEEPS = 1000
_OVERSHOOT = 1e-9


@njit(cache=True, nogil=True)
def _labeling_sweeps(F, T, fixed, h, tol, max_cycles):
    ny, nx = F.shape
    cycles = 0
    change = 1e30
    stagnant = 0
    while cycles < max_cycles:
        change = 0.0
        stagnant = 0
        for ordering in range(4):
            if ordering == 0:
                i0, i1, istep = 0, nx, 1
                j0, j1, jstep = 0, ny, 1
            elif ordering == 1:
                i0, i1, istep = nx - 1, -1, -1
                j0, j1, jstep = 0, ny, 1
            elif ordering == 2:
                i0, i1, istep = 0, nx, 1
                j0, j1, jstep = ny - 1, -1, -1
            else:
                i0, i1, istep = nx - 1, -1, -1
                j0, j1, jstep = ny - 1, -1, -1
            for j in range(j0, j1, jstep):
                for i in range(i0, i1, istep):
                    if fixed[j, i]:
                        continue
                    t0 = T[j, i]
                    num = 0.0
                    den = 0.0
                    fmax = 0.0
                    if i + 1 < nx:
                        w = (T[j, i + 1] - t0) / h
                        if w > 0.0:
                            num += w * F[j, i + 1]
                            den += w
                        if F[j, i + 1] > fmax:
                            fmax = F[j, i + 1]
                    if i - 1 >= 0:
                        w = (T[j, i - 1] - t0) / h
                        if w > 0.0:
                            num += w * F[j, i - 1]
                            den += w
                        if F[j, i - 1] > fmax:
                            fmax = F[j, i - 1]
                    if j + 1 < ny:
                        w = (T[j + 1, i] - t0) / h
                        if w > 0.0:
                            num += w * F[j + 1, i]
                            den += w
                        if F[j + 1, i] > fmax:
                            fmax = F[j + 1, i]
                    if j - 1 >= 0:
                        w = (T[j - 1, i] - t0) / h
                        if w > 0.0:
                            num += w * F[j - 1, i]
                            den += w
                        if F[j - 1, i] > fmax:
                            fmax = F[j - 1, i]
                    if den > 0.0:
                        new = num / den
                    else:
                        new = fmax
                        stagnant += 1
                    diff = abs(new - F[j, i])
                    if diff > change:
                        change = diff
                    F[j, i] = new
        cycles += 1
        if change <= tol:
            break
    return cycles, change, stagnant


@dataclass
class LabelingResult:
    F: ScalarField
    sweeps_used: int
    final_update: float
    converged: bool
    n_stagnant: int


def solve_labeling(
    T: EikonalSolution,
    gamma_set: BoundarySet,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> LabelingResult:
    """Per-source labeling F: 1 on Gamma, 0 elsewhere on the boundary,
    propagated into the domain along the rays of T."""
    grid = T.T.grid
    if not grid.same_as(gamma_set.grid):
        raise DataError("traveltime field and boundary set live on different grids")
    F = np.zeros(grid.shape)
    fixed = np.zeros(grid.shape, dtype=np.bool_)
    fixed[0, :] = fixed[-1, :] = True
    fixed[:, 0] = fixed[:, -1] = True
    F[gamma_set.jj, gamma_set.ii] = 1.0
    cycles, change, stagnant = _labeling_sweeps(
        F, T.T.values, fixed, grid.h, float(tol), int(max_sweeps)
    )
    converged = change <= tol
    if not converged:
        warnings.warn(
            f"labeling solve stopped at {cycles} sweep cycles with change {change:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return LabelingResult(
        F=ScalarField(grid, F),
        sweeps_used=cycles,
        final_update=float(change),
        converged=converged,
        n_stagnant=stagnant,
    )


@dataclass
class IlluminationMap:
    F: ScalarField
    per_source: list[ScalarField] | None = None


def total_illumination(F_j: list[ScalarField], keep_per_source: bool = False) -> IlluminationMap:
    """Arithmetic mean of the per-source labelings, clamped to [0, 1] after
    asserting any numerical overshoot stays below 1e-9."""
    if not F_j:
        raise ConfigurationError("total_illumination needs at least one labeling")
    grid = F_j[0].F.grid if isinstance(F_j[0], LabelingResult) else F_j[0].grid
    fields = [f.F if isinstance(f, LabelingResult) else f for f in F_j]
    acc = np.zeros(grid.shape)
    for f in fields:
        if not f.grid.same_as(grid):
            raise DataError("labelings live on different grids")
        lo = float(f.values.min())
        hi = float(f.values.max())
        if lo < -_OVERSHOOT or hi > 1.0 + _OVERSHOOT:
            raise DataError(f"labeling exceeds [0,1] beyond tolerance: [{lo}, {hi}]")
        acc += f.values
    acc /= len(fields)
    np.clip(acc, 0.0, 1.0, out=acc)
    return IlluminationMap(
        F=ScalarField(grid, acc),
        per_source=fields if keep_per_source else None,
    )


def illum_error(S: ScalarField, S_true: ScalarField, F: IlluminationMap) -> ScalarField:
    """Illumination-weighted slowness error e_F = F * |S - S_true|."""
    if not S.grid.same_as(S_true.grid) or not S.grid.same_as(F.F.grid):
        raise DataError("fields live on different grids")
    return ScalarField(S.grid, F.F.values * np.abs(S.values - S_true.values))
