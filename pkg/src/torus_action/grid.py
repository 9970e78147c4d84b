"""Uniform periodic grids on a p-dimensional period box, and fields sampled on them.

The computational domain is the box [0, T^1) x ... x [0, T^p) with opposite
faces identified, so every node has a full set of periodic neighbours and the
face t^a = T^a is never stored: it is the same set of nodes as t^a = 0.
"""

from __future__ import annotations

import math

import numpy as np

MAX_DIMENSIONS = 4
MIN_RESOLUTION = 4


class TorusGrid:
    """Uniform node lattice on a period box with periodic identification.

    Nodes sit at t_k = (k_1 h_1, ..., k_p h_p) with k_a in {0, ..., N_a - 1}
    and spacing h_a = T^a / N_a.  Quadrature against this lattice is the
    periodic trapezoid rule, which here collapses to a single uniform weight
    per node (the cell volume).  Instances are immutable after construction.

    Parameters
    ----------
    periods : sequence of float
        Box edge lengths (T^1, ..., T^p), all positive and finite.
    resolutions : sequence of int
        Nodes per axis (N_1, ..., N_p), all even and at least 4.
    """

    def __init__(self, periods, resolutions):
        periods = tuple(float(T) for T in periods)
        resolutions = tuple(int(N) for N in resolutions)
        p = len(periods)
        if p == 0:
            raise ValueError("grid needs at least one time axis, got p=0")
        if p > MAX_DIMENSIONS:
            raise ValueError(
                f"grid supports at most {MAX_DIMENSIONS} time axes, got p={p}"
            )
        if len(resolutions) != p:
            raise ValueError(
                f"got {len(resolutions)} resolutions for {p} periods"
            )
        for a, T in enumerate(periods):
            if not math.isfinite(T) or T <= 0.0:
                raise ValueError(f"period T^{a + 1} must be positive and finite, got {T}")
        for a, N in enumerate(resolutions):
            if N < MIN_RESOLUTION:
                raise ValueError(
                    f"resolution N_{a + 1}={N} is too small, need at least {MIN_RESOLUTION}"
                )
            if N % 2 != 0:
                raise ValueError(
                    f"resolution N_{a + 1}={N} is odd; even counts are required "
                    "so frequency tables pair up"
                )
        self.p = p
        self.periods = periods
        self.resolutions = resolutions
        self.shape = resolutions
        self.spacings = tuple(T / N for T, N in zip(periods, resolutions))
        self.node_count = int(np.prod(resolutions))
        self.cell_weight = float(np.prod(self.spacings))
        self._coords = None

    @property
    def volume(self) -> float:
        """Box volume, identically node_count * cell_weight."""
        return float(np.prod(self.periods))

    def coords(self) -> np.ndarray:
        """Node coordinates as an array of shape ``shape + (p,)`` (cached)."""
        if self._coords is None:
            axes = [self.spacings[a] * np.arange(self.resolutions[a]) for a in range(self.p)]
            mesh = np.meshgrid(*axes, indexing="ij")
            self._coords = np.stack(mesh, axis=-1)
            self._coords.setflags(write=False)
        return self._coords

    def axis_coords(self, axis: int) -> np.ndarray:
        """Node positions along one axis."""
        return self.spacings[axis] * np.arange(self.resolutions[axis])

    def flat_index(self, idx) -> int:
        """Flat node index of a multi-index (first axis varies slowest)."""
        idx = tuple(int(k) for k in idx)
        self._check_multi_index(idx)
        return int(np.ravel_multi_index(idx, self.shape))

    def multi_index(self, flat: int) -> tuple:
        """Inverse of flat_index."""
        flat = int(flat)
        if not 0 <= flat < self.node_count:
            raise ValueError(
                f"flat index {flat} out of range for {self.node_count} nodes"
            )
        return tuple(int(k) for k in np.unravel_index(flat, self.shape))

    def _check_multi_index(self, idx) -> None:
        if len(idx) != self.p:
            raise ValueError(f"multi-index {idx} has wrong length for p={self.p}")
        for a, k in enumerate(idx):
            if not 0 <= k < self.resolutions[a]:
                raise ValueError(
                    f"index {k} out of range [0, {self.resolutions[a]}) on axis {a + 1}"
                )

    def __eq__(self, other):
        return (
            isinstance(other, TorusGrid)
            and self.periods == other.periods
            and self.resolutions == other.resolutions
        )

    def __hash__(self):
        return hash((self.periods, self.resolutions))

    def __repr__(self):
        return f"TorusGrid(periods={self.periods}, resolutions={self.resolutions})"


def build_grid(p: int, periods, resolutions) -> TorusGrid:
    """Validate and construct a TorusGrid with an explicit dimension count."""
    if int(p) != len(tuple(periods)):
        raise ValueError(f"p={p} does not match {len(tuple(periods))} periods")
    return TorusGrid(periods, resolutions)


def node_coords(grid: TorusGrid, idx) -> np.ndarray:
    """Coordinates t_k = (k_1 h_1, ..., k_p h_p) of one node."""
    idx = tuple(int(k) for k in idx)
    grid._check_multi_index(idx)
    return np.array([k * h for k, h in zip(idx, grid.spacings)])


def integrate(grid: TorusGrid, node_values) -> float:
    """Periodic trapezoid quadrature of scalar node samples.

    With uniform spacing and periodic identification the trapezoid rule has a
    single weight, so this is cell_weight * sum(values).  Exact for
    trigonometric polynomials resolved below the per-axis Nyquist frequency.
    """
    values = np.asarray(node_values, dtype=float)
    if values.size != grid.node_count:
        raise ValueError(
            f"expected {grid.node_count} node values, got {values.size}"
        )
    return grid.cell_weight * float(values.sum())


class Field:
    """Samples of a map from the period box into R^n.

    Values are stored with shape ``grid.shape + (n,)``; the flattened view is
    node-major with the component index fastest, matching the on-disk dump
    layout.

    Parameters
    ----------
    grid : TorusGrid
    values : array_like
        Shape ``grid.shape + (n,)`` or flat of length ``node_count * n``
        (n inferred only when passed explicitly).
    n : int, optional
        Component count; required for flat input, checked otherwise.
    """

    __slots__ = ("grid", "n", "values")

    def __init__(self, grid: TorusGrid, values, n: int | None = None, _check: bool = True):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            if n is None:
                raise ValueError("component count n is required for flat values")
            if values.size != grid.node_count * n:
                raise ValueError(
                    f"flat values have length {values.size}, "
                    f"expected {grid.node_count * n}"
                )
            values = values.reshape(grid.shape + (int(n),))
        else:
            if values.shape[:-1] != grid.shape:
                raise ValueError(
                    f"values shape {values.shape} does not match grid shape {grid.shape}"
                )
            if n is not None and values.shape[-1] != int(n):
                raise ValueError(
                    f"values carry {values.shape[-1]} components, expected {n}"
                )
        if _check and not np.isfinite(values).all():
            raise ValueError("field values must be finite")
        self.grid = grid
        self.n = int(values.shape[-1])
        self.values = values

    @classmethod
    def zeros(cls, grid: TorusGrid, n: int) -> "Field":
        return cls(grid, np.zeros(grid.shape + (int(n),)), _check=False)

    @classmethod
    def constant(cls, grid: TorusGrid, vec) -> "Field":
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        values = np.broadcast_to(vec, grid.shape + vec.shape).copy()
        return cls(grid, values)

    @classmethod
    def from_function(cls, grid: TorusGrid, n: int, fn) -> "Field":
        """Sample fn(t) -> R^n at the grid nodes; fn must broadcast over t."""
        values = np.asarray(fn(grid.coords()), dtype=float)
        if values.shape != grid.shape + (int(n),):
            raise ValueError(
                f"sampled values have shape {values.shape}, "
                f"expected {grid.shape + (int(n),)}"
            )
        return cls(grid, values)

    @property
    def flat(self) -> np.ndarray:
        """Node-major, component-fastest flat copy of the values."""
        return self.values.reshape(-1)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), _check=False)

    def _like(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, _check=False)

    def _check_compatible(self, other: "Field") -> None:
        if self.grid != other.grid or self.n != other.n:
            raise ValueError("fields live on different grids or component counts")

    def __add__(self, other: "Field") -> "Field":
        self._check_compatible(other)
        return self._like(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check_compatible(other)
        return self._like(self.values - other.values)

    def __mul__(self, scalar) -> "Field":
        return self._like(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self._like(-self.values)

    def __repr__(self):
        return f"Field(n={self.n}, grid={self.grid!r})"
