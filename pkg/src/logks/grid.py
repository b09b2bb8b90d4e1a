"""Uniform cell-centered grids and second-order Neumann operators.

Fields are plain ``numpy`` arrays whose shape is ``grid.shape``.  For a 2-D
grid the array is indexed ``[iy, ix]`` so that the row-major flattening runs
with x fastest.  Face data is a tuple with one array per *spatial* axis
(x first); the array for axis ``k`` has one more entry than the field along
that axis and its first/last entries are the boundary faces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

FaceData = Tuple[np.ndarray, ...]

DEFAULT_FLOOR = 1e-300
MIN_CELLS = 4


class FloorViolation(ValueError):
    """Raised when a field that must stay positive reaches the floor guard."""

    def __init__(self, min_value: float, floor: float, index: tuple):
        self.min_value = min_value
        self.floor = floor
        self.index = index
        super().__init__(
            f"min value {min_value!r} at cell {index} is <= floor {floor!r}"
        )


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box ``[0, L_x] x [0, L_y]`` split into uniform cells."""

    lengths: Tuple[float, ...]
    cells: Tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        cells = tuple(int(n) for n in self.cells)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)
        if len(lengths) not in (1, 2) or len(cells) != len(lengths):
            raise ValueError("grid must be 1-D or 2-D with one cell count per axis")
        if any(n < MIN_CELLS for n in cells):
            raise ValueError(f"need at least {MIN_CELLS} cells per axis, got {cells}")
        if any(not (math.isfinite(L) and L > 0) for L in lengths):
            raise ValueError(f"axis lengths must be positive, got {lengths}")

    @property
    def dimension(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def shape(self) -> Tuple[int, ...]:
        """Array shape of a field (reversed axis order, x is the last axis)."""
        return tuple(reversed(self.cells))

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def diameter(self) -> float:
        """Euclidean diagonal of the box."""
        return math.sqrt(sum(L * L for L in self.lengths))

    def array_axis(self, k: int) -> int:
        """Array axis that holds spatial axis ``k``."""
        return self.dimension - 1 - k

    def centers(self) -> Tuple[np.ndarray, ...]:
        """Cell-center coordinates, one array of ``grid.shape`` per spatial axis."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)]
        mesh = np.meshgrid(*reversed(axes), indexing="ij")
        return tuple(reversed(mesh))

    def refined(self, factor: int) -> "GridSpec":
        return GridSpec(self.lengths, tuple(n * factor for n in self.cells))

    def location(self, flat_or_index) -> Tuple[float, ...]:
        """Physical (x[, y]) coordinates of a cell given an array index."""
        if np.isscalar(flat_or_index):
            flat_or_index = np.unravel_index(int(flat_or_index), self.shape)
        idx = tuple(int(i) for i in flat_or_index)
        return tuple(
            (idx[self.array_axis(k)] + 0.5) * self.spacing[k]
            for k in range(self.dimension)
        )


def check_field(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite values")
    return f


def constant_field(grid: GridSpec, value: float) -> np.ndarray:
    return np.full(grid.shape, float(value))


def laplacian_neumann(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    """Five-point (three-point in 1-D) Laplacian with mirrored ghost cells."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    for k, h in enumerate(grid.spacing):
        a = grid.array_axis(k)
        # the mirror ghost equals the boundary cell, so the boundary face flux is 0
        d = np.diff(f, axis=a)
        flux = np.zeros(_face_shape(f.shape, a))
        _interior(flux, a)[...] = d
        out += np.diff(flux, axis=a) / (h * h)
    return out


def face_gradient(grid: GridSpec, f: np.ndarray) -> FaceData:
    """Per-face differences ``(f_R - f_L)/h``; boundary faces carry zero."""
    f = np.asarray(f, dtype=float)
    faces = []
    for k, h in enumerate(grid.spacing):
        a = grid.array_axis(k)
        g = np.zeros(_face_shape(f.shape, a))
        _interior(g, a)[...] = np.diff(f, axis=a) / h
        faces.append(g)
    return tuple(faces)


def divergence(grid: GridSpec, flux: Sequence[np.ndarray]) -> np.ndarray:
    """Net outflux per cell, ``sum_k (F_{k,R} - F_{k,L}) / h_k``."""
    out = np.zeros(grid.shape)
    for k, h in enumerate(grid.spacing):
        out += np.diff(flux[k], axis=grid.array_axis(k)) / h
    return out


def integrate(grid: GridSpec, f: np.ndarray) -> float:
    """Midpoint quadrature ``sum_i f_i h^d``."""
    return float(np.sum(f) * grid.cell_volume)


def grad_log_sq(grid: GridSpec, v: np.ndarray, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Cell-centered ``|grad log v|^2``.

    Each axis contributes the mean of the squared gradients on its two faces.
    Raises :class:`FloorViolation` if ``min v <= floor``.
    """
    v = np.asarray(v, dtype=float)
    require_above_floor(v, floor)
    logv = np.log(v)
    out = np.zeros(grid.shape)
    for k, g in enumerate(face_gradient(grid, logv)):
        a = grid.array_axis(k)
        g2 = g * g
        out += 0.5 * (_lower(g2, a) + _upper(g2, a))
    return out


def require_above_floor(v: np.ndarray, floor: float) -> None:
    i = int(np.argmin(v))
    vmin = float(v.flat[i])
    if not vmin > floor:
        raise FloorViolation(vmin, floor, np.unravel_index(i, v.shape))


def _face_shape(shape, axis):
    s = list(shape)
    s[axis] += 1
    return tuple(s)


def _interior(faces, axis):
    sl = [slice(None)] * faces.ndim
    sl[axis] = slice(1, -1)
    return faces[tuple(sl)]


def _lower(faces, axis):
    sl = [slice(None)] * faces.ndim
    sl[axis] = slice(0, -1)
    return faces[tuple(sl)]


def _upper(faces, axis):
    sl = [slice(None)] * faces.ndim
    sl[axis] = slice(1, None)
    return faces[tuple(sl)]
