"""Sobolev smoothing of parameter updates and arc-length penalization.

Smoothing solves (I - gamma * Lap) P = p with homogeneous Neumann boundary,
using the same reflected-ghost stencil as grid.laplacian_neumann.  That
stencil diagonalizes exactly under the type-I DCT, so the solve is spectral:
one forward transform, a diagonal division, one inverse transform.  The
residual is checked against the stencil afterwards, so the contract
(relative residual <= 1e-10) is enforced, not assumed.

The arc-length penalty contributes -chi(tube) * Lap(phi) to dE/dphi, where
the tube is the union of bands |phi - i_n| < tau_hat around the represented
interfaces.  tau_hat must stay below di/2: past the clamp bands phi is not
differentiable and the Laplacian would blow up.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

from .errors import ConfigurationError, SolverError
from .grid import ScalarField, laplacian_neumann
from .mlsf import MultilayerLevelSet

_RESIDUAL_RTOL = 1e-10


def _neumann_eigenvalues(n: int, h: float) -> np.ndarray:
    k = np.arange(n)
    return -2.0 * (1.0 - np.cos(np.pi * k / (n - 1))) / (h * h)


def sobolev_smooth(p_tilde: ScalarField, gamma: float) -> ScalarField:
    """Solve (I - gamma * Lap) P = p with reflected-Neumann boundary."""
    if gamma < 0.0:
        raise ConfigurationError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0.0:
        return p_tilde.copy()
    g = p_tilde.grid
    lam_x = _neumann_eigenvalues(g.nx, g.h)
    lam_z = _neumann_eigenvalues(g.ny, g.h)
    denom = 1.0 - gamma * (lam_z[:, None] + lam_x[None, :])
    coef = scipy.fft.dctn(p_tilde.values, type=1)
    out = scipy.fft.idctn(coef / denom, type=1)
    smoothed = ScalarField(g, out)
    # the operator is SPD, so a large residual can only mean a bug
    resid = smoothed.values - gamma * laplacian_neumann(smoothed).values - p_tilde.values
    scale = float(np.max(np.abs(p_tilde.values)))
    if scale > 0.0 and float(np.max(np.abs(resid))) > _RESIDUAL_RTOL * scale:
        raise SolverError(
            f"sobolev solve residual {np.max(np.abs(resid)):.3e} exceeds "
            f"{_RESIDUAL_RTOL:g} * {scale:.3e}"
        )
    return smoothed


def interface_tube(mlsf: MultilayerLevelSet, tau_hat: float) -> np.ndarray:
    """Indicator of the union of bands |phi - i_n| < tau_hat (bool array)."""
    phi = mlsf.phi.values
    tube = np.zeros(phi.shape, dtype=bool)
    for i_n in mlsf.levels.levels:
        tube |= np.abs(phi - i_n) < tau_hat
    return tube


def arc_length_gradient(mlsf: MultilayerLevelSet, tau_hat: float) -> ScalarField:
    """dEr/dphi ~= -chi(tube) * Lap(phi), zero outside the tube."""
    if tau_hat <= 0.0:
        raise ConfigurationError(f"tau_hat must be positive, got {tau_hat}")
    if tau_hat >= 0.5 * mlsf.levels.spacing:
        raise ConfigurationError(
            f"tau_hat {tau_hat} must be < half the level spacing "
            f"{0.5 * mlsf.levels.spacing} (tube would cross the clamp kinks)"
        )
    lap = laplacian_neumann(mlsf.phi).values
    out = np.where(interface_tube(mlsf, tau_hat), -lap, 0.0)
    return ScalarField(mlsf.grid, out)


def total_gradient_phi(
    dE_dphi: ScalarField,
    mlsf: MultilayerLevelSet,
    gamma_phi: float,
    tau_hat: float,
) -> ScalarField:
    """dE_total/dphi = dE/dphi - gamma_phi * chi(tube) * Lap(phi)."""
    if gamma_phi < 0.0:
        raise ConfigurationError(f"gamma_phi must be >= 0, got {gamma_phi}")
    if gamma_phi == 0.0:
        return dE_dphi.copy()
    pen = arc_length_gradient(mlsf, tau_hat)
    return ScalarField(dE_dphi.grid, dE_dphi.values + gamma_phi * pen.values)
