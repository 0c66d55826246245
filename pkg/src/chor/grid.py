"""Axis-aligned voxel grids shared by the weight and occupancy fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Cubic region sampled on a regular lattice.

    resolution: cells per axis (nx, ny, nz)
    center:     region center, meters
    half_extent: half the region side length, meters (same for all axes)
    """

    resolution: tuple[int, int, int] = (48, 48, 48)
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_extent: float = 1.5

    def __post_init__(self):
        res = self.resolution
        if isinstance(res, int):
            res = (res, res, res)
        res = tuple(int(r) for r in res)
        if any(r < 2 for r in res):
            raise ValueError(f"grid resolution must be >= 2 per axis, got {res}")
        if not self.half_extent > 0:
            raise ValueError(f"half_extent must be positive, got {self.half_extent}")
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_extent", float(self.half_extent))

    @property
    def cell_size(self) -> np.ndarray:
        """Edge length of one cell per axis."""
        res = np.array(self.resolution, dtype=np.float64)
        return 2.0 * self.half_extent / res

    @property
    def origin(self) -> np.ndarray:
        """Center of cell (0, 0, 0)."""
        c = np.array(self.center, dtype=np.float64)
        return c - self.half_extent + 0.5 * self.cell_size

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.resolution
        return nx * ny * nz

    def axis_coords(self, axis: int) -> np.ndarray:
        n = self.resolution[axis]
        return self.origin[axis] + np.arange(n, dtype=np.float64) * self.cell_size[axis]

    def voxel_centers(self) -> np.ndarray:
        """All cell centers, shape (n_cells, 3), x varying fastest."""
        xs = self.axis_coords(0)
        ys = self.axis_coords(1)
        zs = self.axis_coords(2)
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        # Fortran ravel of an (nx, ny, nz) array enumerates x fastest.
        return np.stack(
            [gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")], axis=1
        )

    def flatten(self, volume: np.ndarray) -> np.ndarray:
        """(nx, ny, nz, ...) -> (n_cells, ...) with x fastest."""
        nx, ny, nz = self.resolution
        if volume.shape[:3] != (nx, ny, nz):
            raise ValueError(f"volume shape {volume.shape} does not match grid {self.resolution}")
        tail = volume.shape[3:]
        moved = np.moveaxis(volume, (0, 1, 2), (2, 1, 0))  # (nz, ny, nx, ...)
        return np.ascontiguousarray(moved).reshape((nx * ny * nz,) + tail)

    def unflatten(self, flat: np.ndarray) -> np.ndarray:
        """(n_cells, ...) with x fastest -> (nx, ny, nz, ...)."""
        nx, ny, nz = self.resolution
        if flat.shape[0] != nx * ny * nz:
            raise ValueError(f"flat length {flat.shape[0]} does not match grid {self.resolution}")
        tail = flat.shape[1:]
        vol = flat.reshape((nz, ny, nx) + tail)
        return np.ascontiguousarray(np.moveaxis(vol, (0, 1, 2), (2, 1, 0)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean per point: inside the sampled region (between outermost cell centers)."""
        pts = np.asarray(points, dtype=np.float64)
        lo = self.origin
        hi = self.origin + (np.array(self.resolution) - 1) * self.cell_size
        return np.all((pts >= lo) & (pts <= hi), axis=-1)
