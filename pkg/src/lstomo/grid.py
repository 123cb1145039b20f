"""Uniform 2-D grid, node-indexed scalar fields, and discrete operators.

Conventions used across the package:

* the grid covers [xmin, xmax] x [zmin, zmax] with nx x ny nodes and a
  single mesh size h (square cells are mandatory);
* field values are stored as float64 arrays of shape (ny, nx), C order,
  so ``values[j, i]`` lives at ``(x_i, z_j)`` and the flat layout is
  row-major with x fastest;
* the "unset" sentinel for not-yet-computed traveltimes is ``UNSET``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, FieldFormatError

#: Sentinel for "no value yet"; far above any traveltime in the test domains.
UNSET = 1.0e10

_SQUARE_RTOL = 1e-12


@dataclass(frozen=True)
class Grid2D:
    """Uniform rectangular grid with square cells of size h."""

    xmin: float
    xmax: float
    zmin: float
    zmax: float
    nx: int
    ny: int
    h: float

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (ny, nx) of fields living on this grid."""
        return (self.ny, self.nx)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    def xs(self) -> np.ndarray:
        return self.xmin + self.h * np.arange(self.nx)

    def zs(self) -> np.ndarray:
        return self.zmin + self.h * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Z) coordinate arrays of shape (ny, nx)."""
        return np.meshgrid(self.xs(), self.zs())

    def same_as(self, other: "Grid2D") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.xmin == other.xmin
            and self.xmax == other.xmax
            and self.zmin == other.zmin
            and self.zmax == other.zmax
        )


def make_grid(bounds: tuple[float, float, float, float], nx: int, ny: int) -> Grid2D:
    """Build a Grid2D from (xmin, xmax, zmin, zmax) and node counts.

    Cells must come out square: (xmax-xmin)/(nx-1) == (zmax-zmin)/(ny-1)
    to 1e-12 relative.
    """
    xmin, xmax, zmin, zmax = (float(b) for b in bounds)
    if not (xmax > xmin and zmax > zmin):
        raise ConfigurationError(f"degenerate bounds {bounds!r}")
    nx = int(nx)
    ny = int(ny)
    if nx < 3 or ny < 3:
        raise ConfigurationError(f"node counts must be >= 3, got nx={nx} ny={ny}")
    hx = (xmax - xmin) / (nx - 1)
    hz = (zmax - zmin) / (ny - 1)
    if abs(hx - hz) > _SQUARE_RTOL * max(abs(hx), abs(hz)):
        raise ConfigurationError(
            f"non-square cells: hx={hx!r} hz={hz!r} for bounds={bounds!r} nx={nx} ny={ny}"
        )
    return Grid2D(xmin, xmax, zmin, zmax, nx, ny, hx)


@dataclass
class ScalarField:
    """Real field sampled at the nodes of a Grid2D, shape (ny, nx)."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            if v.size == self.grid.n_nodes:
                v = v.reshape(self.grid.shape)
            else:
                raise ConfigurationError(
                    f"field has {v.size} values, grid wants {self.grid.n_nodes}"
                )
        self.values = np.ascontiguousarray(v)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    @classmethod
    def full(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "ScalarField":
        X, Z = grid.mesh()
        return cls(grid, np.asarray(fn(X, Z), dtype=np.float64))


def trapezoid_weights(grid: Grid2D) -> np.ndarray:
    """Node quadrature weights for the area integral: h^2, halved on edges,
    quartered at corners.  This is the mass consistent with the reflected
    Neumann stencil (see regularize)."""
    w = np.ones(grid.shape)
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w * grid.h * grid.h


def field_mean(f: ScalarField) -> float:
    """Trapezoid-weighted mean of a field over the domain."""
    w = trapezoid_weights(f.grid)
    return float(np.sum(w * f.values) / np.sum(w))


def field_inner(f: ScalarField, g: ScalarField) -> float:
    """Trapezoid-weighted L2 inner product of two fields."""
    return float(np.sum(trapezoid_weights(f.grid) * f.values * g.values))


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """5-point Laplacian with reflected ghost values (homogeneous Neumann).

    Every row of the induced linear operator sums to zero; the operator is
    self-adjoint under the trapezoid weights.
    """
    h2 = f.grid.h * f.grid.h
    p = np.pad(f.values, 1, mode="reflect")
    lap = (p[1:-1, 2:] + p[1:-1, :-2] + p[2:, 1:-1] + p[:-2, 1:-1] - 4.0 * f.values) / h2
    return ScalarField(f.grid, lap)


def _one_sided_diffs(values: np.ndarray, h: float) -> tuple[np.ndarray, ...]:
    """Backward/forward differences in x and z; at boundary nodes the missing
    one-sided difference is replaced by the available one."""
    p = np.pad(values, 1, mode="edge")
    dxm = (values - p[1:-1, :-2]) / h
    dxp = (p[1:-1, 2:] - values) / h
    dzm = (values - p[:-2, 1:-1]) / h
    dzp = (p[2:, 1:-1] - values) / h
    # edge replication gives a zero difference on the outside; copy the
    # interior one-sided difference instead
    dxm[:, 0] = dxp[:, 0]
    dxp[:, -1] = dxm[:, -1]
    dzm[0, :] = dzp[0, :]
    dzp[-1, :] = dzm[-1, :]
    return dxm, dxp, dzm, dzp


def upwind_grad_norm(f: ScalarField, direction: str) -> ScalarField:
    """Godunov |grad f| for sign-definite normal motion.

    direction="expand" is the stencil for fronts moving toward larger f
    (v_n > 0); "contract" mirrors the one-sided choices.
    """
    if direction not in ("expand", "contract"):
        raise ConfigurationError(f"direction must be expand|contract, got {direction!r}")
    dxm, dxp, dzm, dzp = _one_sided_diffs(f.values, f.grid.h)
    if direction == "expand":
        g2 = (
            np.maximum(dxm, 0.0) ** 2
            + np.minimum(dxp, 0.0) ** 2
            + np.maximum(dzm, 0.0) ** 2
            + np.minimum(dzp, 0.0) ** 2
        )
    else:
        g2 = (
            np.minimum(dxm, 0.0) ** 2
            + np.maximum(dxp, 0.0) ** 2
            + np.minimum(dzm, 0.0) ** 2
            + np.maximum(dzp, 0.0) ** 2
        )
    return ScalarField(f.grid, np.sqrt(g2))


# ---------------------------------------------------------------------------
# boundary node sets


@dataclass(frozen=True)
class BoundarySet:
    """Ordered set of boundary nodes (a measurement boundary Gamma)."""

    grid: Grid2D
    ii: np.ndarray  # x indices, int64
    jj: np.ndarray  # z indices, int64

    def __post_init__(self) -> None:
        g = self.grid
        on_edge = (self.ii == 0) | (self.ii == g.nx - 1) | (self.jj == 0) | (self.jj == g.ny - 1)
        if not bool(np.all(on_edge)):
            raise ConfigurationError("boundary set contains interior nodes")
        flat = self.jj * g.nx + self.ii
        if len(np.unique(flat)) != len(flat):
            raise ConfigurationError("boundary set contains duplicate nodes")

    def __len__(self) -> int:
        return len(self.ii)

    def is_corner(self) -> np.ndarray:
        g = self.grid
        return ((self.ii == 0) | (self.ii == g.nx - 1)) & ((self.jj == 0) | (self.jj == g.ny - 1))

    def quad_weights(self) -> np.ndarray:
        """Trapezoid line weights: h per node, halved at the domain corners."""
        w = np.full(len(self.ii), self.grid.h)
        w[self.is_corner()] *= 0.5
        return w

    def trace(self, f: ScalarField) -> np.ndarray:
        """Values of f at the boundary nodes, in set order."""
        return f.values[self.jj, self.ii].copy()


_EDGE_NAMES = ("bottom", "right", "top", "left")


def make_boundary(grid: Grid2D, edges="all") -> BoundarySet:
    """Boundary nodes of the requested edges, ordered counterclockwise
    starting from (xmin, zmin): bottom, right, top, left.  Corner nodes
    belong to both adjacent edges but are emitted once."""
    if edges == "all" or edges == ("all",) or edges == ["all"]:
        wanted = set(_EDGE_NAMES)
    else:
        if isinstance(edges, str):
            edges = [edges]
        wanted = set(edges)
        unknown = wanted - set(_EDGE_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown boundary edges {sorted(unknown)}")
        if not wanted:
            raise ConfigurationError("empty edge selection")
    nx, ny = grid.nx, grid.ny
    seen: set[tuple[int, int]] = set()
    ii: list[int] = []
    jj: list[int] = []

    def emit(i: int, j: int, edge: str) -> None:
        if edge in wanted and (i, j) not in seen:
            seen.add((i, j))
            ii.append(i)
            jj.append(j)

    for i in range(nx):
        emit(i, 0, "bottom")
    for j in range(1, ny):
        emit(nx - 1, j, "right")
    for i in range(nx - 2, -1, -1):
        emit(i, ny - 1, "top")
    for j in range(ny - 2, 0, -1):
        emit(0, j, "left")
    # corners skipped above because a neighbouring edge was not selected
    corner_edges = {
        (0, 0): ("bottom", "left"),
        (nx - 1, 0): ("bottom", "right"),
        (nx - 1, ny - 1): ("right", "top"),
        (0, ny - 1): ("top", "left"),
    }
    for (i, j), owners in corner_edges.items():
        if (i, j) not in seen and any(e in wanted for e in owners):
            seen.add((i, j))
            ii.append(i)
            jj.append(j)
    return BoundarySet(grid, np.asarray(ii, dtype=np.int64), np.asarray(jj, dtype=np.int64))


def empty_boundary(grid: Grid2D) -> BoundarySet:
    return BoundarySet(grid, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))


# ---------------------------------------------------------------------------
# field file I/O: line 1 "nx ny xmin xmax zmin zmax", then ny rows of nx
# ASCII decimals (x fastest, z increasing), 17 significant digits.


def write_field(f: ScalarField, path: str | os.PathLike) -> None:
    g = f.grid
    with open(path, "w") as fh:
        fh.write(f"{g.nx} {g.ny} {g.xmin:.17g} {g.xmax:.17g} {g.zmin:.17g} {g.zmax:.17g}\n")
        for j in range(g.ny):
            fh.write(" ".join(f"{v:.17g}" for v in f.values[j]) + "\n")


def read_field(path: str | os.PathLike) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6:
            raise FieldFormatError(f"{path}: header must have 6 entries, got {len(header)}")
        try:
            nx, ny = int(header[0]), int(header[1])
            bounds = tuple(float(t) for t in header[2:])
        except ValueError as exc:
            raise FieldFormatError(f"{path}: unparsable header: {exc}") from exc
        try:
            grid = make_grid(bounds, nx, ny)
        except ConfigurationError as exc:
            raise FieldFormatError(f"{path}: bad grid header: {exc}") from exc
        try:
            data = np.array(fh.read().split(), dtype=np.float64)
        except ValueError as exc:
            raise FieldFormatError(f"{path}: unparsable values: {exc}") from exc
    if data.size != nx * ny:
        raise FieldFormatError(f"{path}: expected {nx * ny} values, found {data.size}")
    return ScalarField(grid, data.reshape(ny, nx))
