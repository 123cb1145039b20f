"""Multilayer level-set core.

A single function phi represents the nested regions Omega_n = {phi < i_n}
for an arithmetic sequence of levels i_0 < i_1 < ... < i_{N-1}.  Near each
i_n-level-set phi behaves like i_n plus a local signed distance, clamped to
[-di/2, di/2], so phi always lies in [i_0 - di/2, i_{N-1} + di/2].

A piecewise slowness is synthesised from phi and parameter fields p_0..p_N
through smoothed Heavisides:

    S = sum_n p_n (1 - H_tau(phi - i_n)) + p_N H_tau(phi - i_{N-1})

Reinitialisation evolves, per level, psi_n = phi - i_n under the usual
sign(psi)(|grad psi| - 1) flow for a few pseudo-time steps and rebuilds phi
with the nearest-level clamp rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import ConfigurationError, InvalidSlownessError
from .grid import Grid2D, ScalarField

_ARITH_TOL = 1e-12
DEFAULT_REINIT_STEPS = 5


@dataclass(frozen=True)
class LevelSequence:
    """Arithmetic sequence of level values i_0 < i_1 < ... < i_{N-1}."""

    levels: tuple[float, ...]
    spacing: float

    def __post_init__(self) -> None:
        if len(self.levels) < 1:
            raise ConfigurationError("level sequence needs at least one level")
        if self.spacing <= 0.0:
            raise ConfigurationError(f"level spacing must be positive, got {self.spacing}")
        diffs = np.diff(self.levels)
        if len(diffs) and np.any(np.abs(diffs - self.spacing) > _ARITH_TOL):
            raise ConfigurationError(
                f"levels {self.levels} are not arithmetic with spacing {self.spacing}"
            )

    @classmethod
    def make(cls, levels, spacing: float | None = None) -> "LevelSequence":
        levels = tuple(float(v) for v in levels)
        if spacing is None:
            if len(levels) < 2:
                raise ConfigurationError("spacing required for a single-level sequence")
            spacing = levels[1] - levels[0]
        return cls(levels, float(spacing))

    def __len__(self) -> int:
        return len(self.levels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels)


@dataclass
class MultilayerLevelSet:
    phi: ScalarField
    levels: LevelSequence

    def __post_init__(self) -> None:
        lo = self.levels.levels[0] - 0.5 * self.levels.spacing
        hi = self.levels.levels[-1] + 0.5 * self.levels.spacing
        v = self.phi.values
        slack = 1e-9 * self.levels.spacing
        if v.min() < lo - slack or v.max() > hi + slack:
            raise ConfigurationError(
                f"phi range [{v.min()}, {v.max()}] exceeds clamp range [{lo}, {hi}]"
            )

    @property
    def grid(self) -> Grid2D:
        return self.phi.grid

    def copy(self) -> "MultilayerLevelSet":
        return MultilayerLevelSet(self.phi.copy(), self.levels)


def build_from_distances(d: list[ScalarField], levels: LevelSequence) -> MultilayerLevelSet:
    """Combine per-interface signed distances into one multilayer function.

    Per node: pick the interface with the smallest |d_n| (ties to smaller n)
    and set phi = i_n + clamp(d_n, -di/2, di/2).
    """
    if len(d) == 0:
        raise ConfigurationError("empty distance list")
    if len(d) != len(levels):
        raise ConfigurationError(f"{len(d)} distance fields for {len(levels)} levels")
    grid = d[0].grid
    stack = np.stack([f.values for f in d])
    if not np.all(np.isfinite(stack)):
        raise ConfigurationError("distance fields must be finite")
    nearest = np.argmin(np.abs(stack), axis=0)  # first minimum -> smaller n
    dn = np.take_along_axis(stack, nearest[None], axis=0)[0]
    half = 0.5 * levels.spacing
    phi = levels.as_array()[nearest] + np.clip(dn, -half, half)
    return MultilayerLevelSet(ScalarField(grid, phi), levels)


# ---------------------------------------------------------------------------
# smoothed Heaviside / delta


def smooth_heaviside(x, tau: float):
    """H_tau(x) = (tanh(x/tau) + 1) / 2; accepts scalars or arrays."""
    if tau <= 0.0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    return 0.5 * (np.tanh(np.asarray(x, dtype=np.float64) / tau) + 1.0)


def smooth_delta(x, tau: float):
    """delta_tau(x) = H_tau'(x) = 1 / (2 tau cosh^2(x/tau))."""
    if tau <= 0.0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    x = np.asarray(x, dtype=np.float64)
    return 1.0 / (2.0 * tau * np.cosh(x / tau) ** 2)


# ---------------------------------------------------------------------------
# slowness model


@dataclass
class SlownessModel:
    """phi plus parameter fields p_0..p_N and the Heaviside width tau."""

    mlsf: MultilayerLevelSet
    p: list[ScalarField]
    tau: float
    frozen: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        if self.tau <= 0.0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        n_levels = len(self.mlsf.levels)
        if len(self.p) != n_levels + 1:
            raise ConfigurationError(
                f"need {n_levels + 1} parameter fields for {n_levels} levels, got {len(self.p)}"
            )
        if not self.frozen:
            self.frozen = tuple(False for _ in self.p)
        elif len(self.frozen) != len(self.p):
            raise ConfigurationError("frozen flags must match parameter fields")
        else:
            self.frozen = tuple(bool(b) for b in self.frozen)

    @property
    def grid(self) -> Grid2D:
        return self.mlsf.grid

    @property
    def n_levels(self) -> int:
        return len(self.mlsf.levels)

    def copy(self) -> "SlownessModel":
        return SlownessModel(
            self.mlsf.copy(), [f.copy() for f in self.p], self.tau, self.frozen
        )


def synthesize_slowness(model: SlownessModel) -> ScalarField:
    """Evaluate S from the multilayer representation (smoothed Heavisides)."""
    phi = model.mlsf.phi.values
    levels = model.mlsf.levels.levels
    S = np.zeros_like(phi)
    for n, i_n in enumerate(levels):
        S += model.p[n].values * (1.0 - smooth_heaviside(phi - i_n, model.tau))
    S += model.p[-1].values * smooth_heaviside(phi - levels[-1], model.tau)
    if np.any(S <= 0.0):
        raise InvalidSlownessError(
            f"synthesized slowness has non-positive values (min {S.min():.6g})"
        )
    return ScalarField(model.grid, S)


def p_from_S(S: list[ScalarField]) -> list[ScalarField]:
    """Convert region values S_0..S_N to layer parameters p_0..p_N."""
    if len(S) < 2:
        raise ConfigurationError("need at least S_0 and S_1")
    N = len(S) - 1
    out = []
    for n in range(N - 1):
        out.append(ScalarField(S[n].grid, S[n].values - S[n + 1].values))
    out.append(S[N - 1].copy())
    out.append(S[N].copy())
    return out


def S_from_p(p: list[ScalarField]) -> list[ScalarField]:
    """Inverse of p_from_S: S_n = sum_{k=n}^{N-1} p_k, S_N = p_N."""
    if len(p) < 2:
        raise ConfigurationError("need at least p_0 and p_1")
    N = len(p) - 1
    out: list[ScalarField] = [None] * (N + 1)  # type: ignore[list-item]
    out[N] = p[N].copy()
    acc = np.zeros_like(p[0].values)
    for n in range(N - 1, -1, -1):
        acc = acc + p[n].values
        out[n] = ScalarField(p[n].grid, acc.copy())
    return out


def region_masks(mlsf: MultilayerLevelSet) -> list[ScalarField]:
    """Sharp indicators of D_0..D_N by phi thresholds (H(0) = 1 convention:
    a node with phi == i_n belongs to the region outside Omega_n)."""
    phi = mlsf.phi.values
    levels = mlsf.levels.levels
    masks = []
    below_prev = np.zeros(phi.shape, dtype=bool)
    for i_n in levels:
        below = phi < i_n
        masks.append(ScalarField(mlsf.grid, (below & ~below_prev).astype(np.float64)))
        below_prev = below
    masks.append(ScalarField(mlsf.grid, (~below_prev).astype(np.float64)))
    return masks


# ---------------------------------------------------------------------------
# reinitialization


@njit(cache=True, nogil=True, parallel=True, fastmath=True)
def _reinit_level(phi, level, psi_out, buf, h, dxi, steps, cutoff):
    """Reinitialize one level: evolve psi = phi - level under
    sign(psi0) * (|grad psi| - 1) = -psi_xi for `steps` pseudo-time steps.

    Stabilisation, fixed from the initial data psi0 = phi - level:

    * smoothed sign s = psi0 / sqrt(psi0^2 + (max(|grad psi0|, 1) h)^2);
      scaling the bandwidth by the local gradient keeps the update bounded
      by |psi0| per step where psi0 jumps steeply across one cell (squeezed
      interfaces), so a crossing cannot be pushed through a node;
    * nodes adjacent to a zero crossing relax toward the distance to the
      chord through the interpolated edge crossings instead of following
      the Godunov flow; this pins every crossing to its current sub-cell
      position, so repeated reinitialization does not drift interfaces;
    * nodes with |psi0| > cutoff are left untouched: the flow only moves
      them away from zero and the clamped rebuild cannot depend on them.
    """
    ny, nx = phi.shape
    lam = dxi / h
    # per-node constants packed into buf's memory would alias; recompute the
    # cheap sign each step instead of storing three extra arrays
    cur = psi_out
    nxt = buf
    for j in prange(ny):
        for i in range(nx):
            cur[j, i] = phi[j, i] - level
    for _ in range(steps):
        for j in prange(ny):
            for i in range(nx):
                p0 = phi[j, i] - level
                a0 = abs(p0)
                if a0 > cutoff:
                    nxt[j, i] = cur[j, i]
                    continue
                w0 = (phi[j, i - 1] - level) if i > 0 else p0
                e0 = (phi[j, i + 1] - level) if i < nx - 1 else p0
                s0 = (phi[j - 1, i] - level) if j > 0 else p0
                n0 = (phi[j + 1, i] - level) if j < ny - 1 else p0
                if p0 == 0.0:
                    nxt[j, i] = 0.0
                    continue
                if p0 * w0 < 0.0 or p0 * e0 < 0.0 or p0 * s0 < 0.0 or p0 * n0 < 0.0:
                    # sub-cell anchor: first-order distance from the initial
                    # data, psi0 / |grad psi0| with a centered gradient
                    gx0 = (e0 - w0) / (2.0 * h) if 0 < i < nx - 1 else (e0 - w0) / h
                    gz0 = (n0 - s0) / (2.0 * h) if 0 < j < ny - 1 else (n0 - s0) / h
                    gm = np.sqrt(gx0 * gx0 + gz0 * gz0)
                    if gm < 1e-12:
                        gm = 1e-12
                    tgt = p0 / gm
                    if tgt > h:
                        tgt = h
                    elif tgt < -h:
                        tgt = -h
                    c = cur[j, i]
                    sg = 1.0 if p0 > 0.0 else -1.0
                    nxt[j, i] = c - lam * (sg * abs(c) - tgt)
                    continue
                c = cur[j, i]
                if i == 0:
                    dxp = (cur[j, 1] - c) / h
                    dxm = dxp
                elif i == nx - 1:
                    dxm = (c - cur[j, nx - 2]) / h
                    dxp = dxm
                else:
                    dxm = (c - cur[j, i - 1]) / h
                    dxp = (cur[j, i + 1] - c) / h
                if j == 0:
                    dzp = (cur[1, i] - c) / h
                    dzm = dzp
                elif j == ny - 1:
                    dzm = (c - cur[ny - 2, i]) / h
                    dzp = dzm
                else:
                    dzm = (c - cur[j - 1, i]) / h
                    dzp = (cur[j + 1, i] - c) / h
                gx0 = (e0 - w0) / (2.0 * h) if 0 < i < nx - 1 else (e0 - w0) / h
                gz0 = (n0 - s0) / (2.0 * h) if 0 < j < ny - 1 else (n0 - s0) / h
                g2 = gx0 * gx0 + gz0 * gz0
                s = p0 / np.sqrt(p0 * p0 + max(g2, 1.0) * h * h)
                if s > 0.0:
                    a = max(dxm, 0.0)
                    b = min(dxp, 0.0)
                    cc = max(dzm, 0.0)
                    d = min(dzp, 0.0)
                else:
                    a = min(dxm, 0.0)
                    b = max(dxp, 0.0)
                    cc = min(dzm, 0.0)
                    d = max(dzp, 0.0)
                gn = np.sqrt(a * a + b * b + cc * cc + d * d)
                nxt[j, i] = c - dxi * s * (gn - 1.0)
        tmp = cur
        cur = nxt
        nxt = tmp
    if steps % 2 == 1:  # result currently sits in buf
        for j in prange(ny):
            for i in range(nx):
                psi_out[j, i] = cur[j, i]


@njit(cache=True, nogil=True, parallel=True)
def _reinit_multilayer_ws(phi, out, psis, buf, levels, spacing, h, dxi, steps):
    """Full multilayer reinit writing into `out`; psis and buf are scratch."""
    ny, nx = phi.shape
    n_levels = levels.shape[0]
    cutoff = 0.5 * spacing + steps * dxi + 2.0 * h
    for n in range(n_levels):
        _reinit_level(phi, levels[n], psis[n], buf, h, dxi, steps, cutoff)
    half = 0.5 * spacing
    for j in prange(ny):
        for i in range(nx):
            best = 0
            best_abs = abs(psis[0, j, i])
            for n in range(1, n_levels):
                a = abs(psis[n, j, i])
                if a < best_abs:
                    best_abs = a
                    best = n
            v = psis[best, j, i]
            if v < -half:
                v = -half
            elif v > half:
                v = half
            out[j, i] = levels[best] + v


def _reinit_multilayer(phi, levels, spacing, h, dxi, steps):
    out = np.empty_like(phi)
    psis = np.empty((levels.shape[0],) + phi.shape)
    buf = np.empty_like(phi)
    _reinit_multilayer_ws(phi, out, psis, buf, levels, spacing, h, dxi, steps)
    return out


def reinitialize(
    mlsf: MultilayerLevelSet,
    steps: int = DEFAULT_REINIT_STEPS,
    dxi: float | None = None,
) -> MultilayerLevelSet:
    """Restore the local signed-distance property around every i_n-level-set.

    dxi defaults to h/2 and must not exceed it (explicit Euler stability).
    """
    h = mlsf.grid.h
    if dxi is None:
        dxi = 0.5 * h
    if steps < 1:
        raise ConfigurationError(f"steps must be >= 1, got {steps}")
    if not (0.0 < dxi <= 0.5 * h + 1e-15):
        raise ConfigurationError(f"dxi must satisfy 0 < dxi <= h/2 = {0.5 * h}, got {dxi}")
    phi = _reinit_multilayer(
        mlsf.phi.values,
        mlsf.levels.as_array(),
        mlsf.levels.spacing,
        h,
        float(dxi),
        int(steps),
    )
    return MultilayerLevelSet(ScalarField(mlsf.grid, phi), mlsf.levels)
