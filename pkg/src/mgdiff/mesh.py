"""Tensor-product Cartesian meshes with slab-based refinement.

A mesh is the tensor product of d strictly increasing coordinate grids
(d = 2 or 3); cells are axis-aligned boxes addressed by a multi-index.
The only refinable unit is a slab: the set of all cells whose extent
along one axis is a fixed interval of that axis.  Bisecting slabs keeps
the mesh a tensor product, so refinement only touches the 1-D grids.

Meshes are immutable; refinement returns a new mesh whose coordinate
lists contain the old ones exactly (no re-rounding).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce
from itertools import product

import numpy as np

from .errors import NonDivisibleExtent


@dataclass(frozen=True, eq=False)
class AxisGrid:
    """Strictly increasing 1-D coordinate grid (cm), at least two entries."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("axis grid needs at least two coordinates")
        if not np.all(np.diff(c) > 0.0):
            raise ValueError("axis coordinates must be strictly increasing")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n_intervals(self) -> int:
        return self.coords.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.coords)


@dataclass(frozen=True, order=True)
class Slab:
    """All cells whose extent along `axis` is interval `interval` of that axis."""

    axis: int
    interval: int


@dataclass(frozen=True, eq=False)
class CartesianMesh:
    """Tensor product of per-axis grids; dim 2 or 3."""

    axes: tuple[AxisGrid, ...]

    def __post_init__(self):
        if len(self.axes) not in (2, 3):
            raise ValueError("mesh dimension must be 2 or 3")
        object.__setattr__(self, "axes", tuple(self.axes))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.n_intervals for ax in self.axes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.shape)
        s[axis] += 1
        return tuple(s)

    @property
    def n_faces(self) -> tuple[int, ...]:
        return tuple(int(np.prod(self.face_shape(ax))) for ax in range(self.dim))

    def widths(self, axis: int) -> np.ndarray:
        return self.axes[axis].widths

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        """Cell volumes as an ndarray of shape `self.shape`."""

        def outer(a, b):
            return np.multiply.outer(a, b)

        return reduce(outer, (ax.widths for ax in self.axes))

    @property
    def domain_volume(self) -> float:
        return float(np.prod([ax.coords[-1] - ax.coords[0] for ax in self.axes]))

    def cell_centers(self, axis: int) -> np.ndarray:
        c = self.axes[axis].coords
        return 0.5 * (c[:-1] + c[1:])

    def cell_diameters(self) -> np.ndarray:
        """Cell diagonal lengths, shape `self.shape`."""
        sq = reduce(np.add.outer, (ax.widths**2 for ax in self.axes))
        return np.sqrt(sq)

    # -- indexing ---------------------------------------------------------

    def cell_index(self, multi: tuple[int, ...]) -> int:
        """Linear cell index (C order over the multi-index)."""
        return int(np.ravel_multi_index(multi, self.shape))

    def cell_multi(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def _check_cell(self, multi):
        if len(multi) != self.dim:
            raise IndexError(f"cell index {multi} has wrong dimension")
        for i, n in zip(multi, self.shape):
            if not 0 <= i < n:
                raise IndexError(f"cell index {multi} out of bounds for {self.shape}")

    def neighbors(self, cell: tuple[int, ...]) -> set[tuple[int, ...]]:
        """`cell` plus all cells sharing a (d-1)-facet with it."""
        self._check_cell(cell)
        out = {tuple(cell)}
        for ax in range(self.dim):
            for step in (-1, 1):
                j = cell[ax] + step
                if 0 <= j < self.shape[ax]:
                    nb = list(cell)
                    nb[ax] = j
                    out.add(tuple(nb))
        return out

    def iter_cells(self):
        return product(*(range(n) for n in self.shape))

    def same_coordinates(self, other: "CartesianMesh") -> bool:
        return self.dim == other.dim and all(
            np.array_equal(a.coords, b.coords) for a, b in zip(self.axes, other.axes)
        )


def build_uniform(domain_box, step_per_axis) -> CartesianMesh:
    """Uniform mesh of an axis-aligned box.

    `domain_box` entries are either extents (floats, box starts at 0) or
    (lo, hi) pairs.  `step_per_axis` is a scalar or one step per axis;
    every extent must be an integer multiple of its step to relative
    tolerance 1e-9, otherwise NonDivisibleExtent is raised.
    """
    bounds = []
    for b in domain_box:
        if np.isscalar(b):
            bounds.append((0.0, float(b)))
        else:
            lo, hi = b
            bounds.append((float(lo), float(hi)))
    d = len(bounds)
    if np.isscalar(step_per_axis):
        steps = [float(step_per_axis)] * d
    else:
        steps = [float(s) for s in step_per_axis]
        if len(steps) != d:
            raise ValueError("one step per axis required")

    axes = []
    for (lo, hi), h in zip(bounds, steps):
        if h <= 0 or hi <= lo:
            raise ValueError("box extents and steps must be positive")
        ratio = (hi - lo) / h
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
            raise NonDivisibleExtent(
                f"extent {hi - lo} is not an integer multiple of step {h}"
            )
        axes.append(AxisGrid(np.linspace(lo, hi, n + 1)))
    return CartesianMesh(tuple(axes))


def refine_slabs(mesh: CartesianMesh, slabs) -> CartesianMesh:
    """Bisect every selected interval at its exact midpoint.

    All untouched coordinates are preserved bit-for-bit, so any previous
    mesh nests inside the result.  An empty slab set returns an
    identical mesh.
    """
    by_axis: list[set[int]] = [set() for _ in range(mesh.dim)]
    for s in slabs:
        if not 0 <= s.axis < mesh.dim:
            raise IndexError(f"slab axis {s.axis} out of range")
        if not 0 <= s.interval < mesh.shape[s.axis]:
            raise IndexError(f"slab interval {s.interval} out of range on axis {s.axis}")
        by_axis[s.axis].add(s.interval)

    new_axes = []
    for ax, marked in enumerate(by_axis):
        c = mesh.axes[ax].coords
        if not marked:
            new_axes.append(AxisGrid(c))
            continue
        idx = np.array(sorted(marked), dtype=int)
        mids = 0.5 * (c[idx] + c[idx + 1])
        new_axes.append(AxisGrid(np.insert(c, idx + 1, mids)))
    return CartesianMesh(tuple(new_axes))


def interval_parents(old: AxisGrid, new: AxisGrid) -> np.ndarray:
    """For each new interval, the index of the old interval containing it.

    Requires nesting (old coordinates are a subset of the new ones).
    """
    centers = 0.5 * (new.coords[:-1] + new.coords[1:])
    parents = np.searchsorted(old.coords, centers, side="right") - 1
    return np.clip(parents, 0, old.n_intervals - 1)
