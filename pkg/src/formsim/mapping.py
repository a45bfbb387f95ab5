"""Occupancy grid world model: rasterized obstacles, rays, inflation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass
class Box:
    """Axis-aligned obstacle in world coordinates."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.hi < self.lo):
            raise ValueError("box hi must dominate lo")


@dataclass
class Cylinder:
    """Vertical cylinder obstacle (axis along z)."""

    center: np.ndarray
    radius: float
    z_min: float
    z_max: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)[:2]
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.z_max < self.z_min:
            raise ValueError("z_max must be >= z_min")


@lru_cache(maxsize=16)
def _ball_offsets(radius_cells: int) -> np.ndarray:
    """Integer offsets of all cells whose center lies within radius_cells."""
    r = radius_cells
    ax = np.arange(-r, r + 1)
    dx, dy, dz = np.meshgrid(ax, ax, ax, indexing="ij")
    mask = dx * dx + dy * dy + dz * dz <= r * r
    return np.stack([dx[mask], dy[mask], dz[mask]], axis=1)


@dataclass
class OccupancyGrid:
    """Boolean 3D occupancy over a box-shaped volume of uniform cells."""

    origin: np.ndarray
    cell: float
    occ: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        if self.cell <= 0:
            raise ValueError("cell size must be positive")
        self.occ = np.asarray(self.occ, dtype=bool)
        if self.occ.ndim != 3:
            raise ValueError("occupancy must be a 3D array")

    @classmethod
    def empty(cls, origin, size, cell: float) -> "OccupancyGrid":
        origin = np.asarray(origin, dtype=float)
        size = np.asarray(size, dtype=float)
        shape = tuple(int(math.ceil(s / cell)) for s in size)
        return cls(origin, cell, np.zeros(shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.occ.shape

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.origin.copy(), self.cell, self.occ.copy())

    def index_of(self, p) -> tuple[int, int, int] | None:
        """Cell index containing a world point, or None outside the volume."""
        rel = (np.asarray(p, dtype=float) - self.origin) / self.cell
        idx = np.floor(rel).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.occ.shape):
            return None
        return tuple(int(i) for i in idx)

    def center_of(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.cell

    def is_free(self, idx) -> bool:
        return not self.occ[idx]

    def occupied_centers(self) -> np.ndarray:
        """World centers of all occupied cells, shape (n, 3)."""
        idx = np.argwhere(self.occ)
        if len(idx) == 0:
            return np.zeros((0, 3))
        return self.origin + (idx + 0.5) * self.cell

    # --- rasterization -------------------------------------------------

    def _slab(self, lo: np.ndarray, hi: np.ndarray):
        """Index ranges of cells whose centers fall inside [lo, hi]."""
        i0 = np.maximum(np.ceil((lo - self.origin) / self.cell - 0.5).astype(int), 0)
        i1 = np.minimum(
            np.floor((hi - self.origin) / self.cell - 0.5).astype(int),
            np.array(self.occ.shape) - 1,
        )
        return i0, i1

    def add_box(self, box: Box) -> None:
        i0, i1 = self._slab(box.lo, box.hi)
        if np.any(i1 < i0):
            return
        self.occ[i0[0]:i1[0] + 1, i0[1]:i1[1] + 1, i0[2]:i1[2] + 1] = True

    def add_cylinder(self, cyl: Cylinder) -> None:
        lo = np.array([cyl.center[0] - cyl.radius, cyl.center[1] - cyl.radius, cyl.z_min])
        hi = np.array([cyl.center[0] + cyl.radius, cyl.center[1] + cyl.radius, cyl.z_max])
        i0, i1 = self._slab(lo, hi)
        if np.any(i1 < i0):
            return
        xs = self.origin[0] + (np.arange(i0[0], i1[0] + 1) + 0.5) * self.cell
        ys = self.origin[1] + (np.arange(i0[1], i1[1] + 1) + 0.5) * self.cell
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        inside = (gx - cyl.center[0]) ** 2 + (gy - cyl.center[1]) ** 2 <= cyl.radius**2
        sub = self.occ[i0[0]:i1[0] + 1, i0[1]:i1[1] + 1, i0[2]:i1[2] + 1]
        sub |= inside[:, :, None]

    def mark_floor(self, height: float) -> None:
        """Occupy every cell whose center lies below `height` (keeps paths off the ground)."""
        n = int(math.floor((height - self.origin[2]) / self.cell - 0.5)) + 1
        if n > 0:
            self.occ[:, :, : min(n, self.occ.shape[2])] = True

    def mark_sphere(self, center, radius: float) -> None:
        """Occupy all cells whose center is within radius of a world point."""
        rel = (np.asarray(center, dtype=float) - self.origin) / self.cell - 0.5
        base = np.round(rel).astype(int)
        r_cells = int(math.ceil(radius / self.cell)) + 1
        pts = base + _ball_offsets(r_cells)
        ok = np.all(pts >= 0, axis=1) & np.all(pts < np.array(self.occ.shape), axis=1)
        pts = pts[ok]
        if len(pts) == 0:
            return
        centers = self.origin + (pts + 0.5) * self.cell
        d2 = np.sum((centers - np.asarray(center, dtype=float)) ** 2, axis=1)
        pts = pts[d2 <= radius * radius]
        if len(pts) == 0:
            return
        self.occ[pts[:, 0], pts[:, 1], pts[:, 2]] = True

    # --- queries --------------------------------------------------------

    def segment_free(self, p0, p1) -> bool:
        """True when the straight segment crosses no occupied cell.

        The segment is split at every cell-boundary crossing and each piece
        is tested at its midpoint, which visits exactly the traversed cells.
        Portions outside the grid volume count as free.
        """
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        d = p1 - p0
        if not np.any(d):
            idx = self.index_of(p0)
            return idx is None or self.is_free(idx)
        ts = [np.array([0.0, 1.0])]
        for a in range(3):
            if d[a] == 0.0:
                continue
            lo = (min(p0[a], p1[a]) - self.origin[a]) / self.cell
            hi = (max(p0[a], p1[a]) - self.origin[a]) / self.cell
            ks = np.arange(math.ceil(lo), math.floor(hi) + 1)
            if len(ks):
                ts.append((self.origin[a] + ks * self.cell - p0[a]) / d[a])
        t = np.unique(np.concatenate(ts))
        t = t[(t >= 0.0) & (t <= 1.0)]
        mids = p0 + np.outer(0.5 * (t[:-1] + t[1:]), d)
        idx = np.floor((mids - self.origin) / self.cell).astype(int)
        inside = np.all(idx >= 0, axis=1) & np.all(idx < np.array(self.occ.shape), axis=1)
        idx = idx[inside]
        if len(idx) == 0:
            return True
        return not bool(self.occ[idx[:, 0], idx[:, 1], idx[:, 2]].any())
