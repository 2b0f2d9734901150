"""Overlapping 3D block extraction, raster grouping, and overlap accounting.

Blocks of size (nx_b, ny_b, b) slide over the cube on a configurable stride
grid and are vectorized column-wise with x fastest, then y, then t, matching
the cube's own linear order. Enumeration is raster order: x-major within y
within t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datacube import Datacube


@dataclass(frozen=True)
class BlockGeometry:
    """Block dims, strides, and the induced enumeration over a fixed cube size."""

    nx_b: int
    ny_b: int
    b: int
    cube_dims: tuple[int, int, int]  # (nx, ny, nb)
    stride_x: int = 1
    stride_y: int = 1
    stride_t: int = 1

    def __post_init__(self):
        nx, ny, nb = self.cube_dims
        if not (1 <= self.nx_b <= nx and 1 <= self.ny_b <= ny and 1 <= self.b <= nb):
            raise ValueError(
                f"block {self.nx_b}x{self.ny_b}x{self.b} does not fit cube {self.cube_dims}"
            )
        if min(self.stride_x, self.stride_y, self.stride_t) < 1:
            raise ValueError("strides must be positive")

    @property
    def r(self) -> int:
        """Block vector length."""
        return self.nx_b * self.ny_b * self.b

    @property
    def positions(self) -> tuple[int, int, int]:
        """Number of block origins along (x, y, t)."""
        nx, ny, nb = self.cube_dims
        return (
            (nx - self.nx_b) // self.stride_x + 1,
            (ny - self.ny_b) // self.stride_y + 1,
            (nb - self.b) // self.stride_t + 1,
        )

    @property
    def n_blocks(self) -> int:
        px, py, pt = self.positions
        return px * py * pt

    @property
    def block_shape(self) -> tuple[int, int, int]:
        """(b, ny_b, nx_b), the array shape of one block."""
        return (self.b, self.ny_b, self.nx_b)

    def matches(self, x: Datacube) -> bool:
        return self.cube_dims == x.dims


@dataclass(frozen=True)
class SubsetGrouping:
    """Contiguous raster-order ranges of block indices, ceil(N/l) of them.

    Ranges are half-open ``[start, stop)``; the last one may be ragged.
    """

    n_blocks: int
    l: int

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ValueError("need at least one block")
        if self.l < 1:
            raise ValueError("subset width l must be >= 1")

    @property
    def n_subsets(self) -> int:
        return -(-self.n_blocks // self.l)

    @property
    def boundaries(self) -> list[tuple[int, int]]:
        return [
            (a, min(a + self.l, self.n_blocks))
            for a in range(0, self.n_blocks, self.l)
        ]


def group(n_blocks: int, l: int) -> SubsetGrouping:
    """Partition block indices 0..N-1 into ceil(N/l) contiguous subsets of width l."""
    return SubsetGrouping(n_blocks, l)


def enumerate_blocks(geometry: BlockGeometry) -> np.ndarray:
    """Block origins as an (N, 3) int array of (x, y, t), raster order."""
    px, py, pt = geometry.positions
    ox = np.arange(px) * geometry.stride_x
    oy = np.arange(py) * geometry.stride_y
    ot = np.arange(pt) * geometry.stride_t
    tt, yy, xx = np.meshgrid(ot, oy, ox, indexing="ij")
    return np.stack([xx.reshape(-1), yy.reshape(-1), tt.reshape(-1)], axis=1)


def _window_view(data: np.ndarray, geometry: BlockGeometry) -> np.ndarray:
    """Strided (pt, py, px, b, ny_b, nx_b) view of all blocks, no copy."""
    view = np.lib.stride_tricks.sliding_window_view(data, geometry.block_shape)
    return view[:: geometry.stride_t, :: geometry.stride_y, :: geometry.stride_x]


def extract(x: Datacube, geometry: BlockGeometry) -> np.ndarray:
    """All blocks as columns of an (r, N) matrix.

    Materializes r*N doubles; prefer :func:`extract_columns` for a subset of
    a large enumeration.
    """
    if not geometry.matches(x):
        raise ValueError(f"geometry for cube {geometry.cube_dims} applied to {x.dims}")
    view = _window_view(x.data, geometry)
    return view.reshape(geometry.n_blocks, geometry.r).T


def extract_columns(
    data: np.ndarray, geometry: BlockGeometry, indices: np.ndarray
) -> np.ndarray:
    """Columns for the given raster block indices, shape (r, len(indices))."""
    px, py, pt = geometry.positions
    it, iy, ix = np.unravel_index(np.asarray(indices), (pt, py, px))
    sel = _window_view(data, geometry)[it, iy, ix]
    return sel.reshape(len(sel), geometry.r).T


def iter_subset_columns(data: np.ndarray, geometry: BlockGeometry, grouping: SubsetGrouping):
    """Yield (subset_index, (r, l_j) column matrix) in raster subset order."""
    view = _window_view(data, geometry)
    px, py, pt = geometry.positions
    for j, (start, stop) in enumerate(grouping.boundaries):
        it, iy, ix = np.unravel_index(np.arange(start, stop), (pt, py, px))
        cols = view[it, iy, ix].reshape(stop - start, geometry.r).T
        yield j, cols


def block_means(columns: np.ndarray) -> np.ndarray:
    """Arithmetic mean of each column of an (r, N) block matrix."""
    return np.asarray(columns).mean(axis=0)


def _moving_sums(a: np.ndarray, width: int, stride: int, axis: int) -> np.ndarray:
    """Sliding-window sums of the given width along one axis, then strided."""
    a = np.moveaxis(a, axis, -1)
    cs = np.concatenate(
        [np.zeros(a.shape[:-1] + (1,), dtype=a.dtype), np.cumsum(a, axis=-1)], axis=-1
    )
    out = cs[..., width:] - cs[..., :-width]
    return np.moveaxis(out[..., ::stride], -1, axis)


def block_means_cube(x: Datacube, geometry: BlockGeometry) -> np.ndarray:
    """Means of every enumerated block without materializing columns.

    Returns the raster-ordered flat vector of length N.
    """
    if not geometry.matches(x):
        raise ValueError(f"geometry for cube {geometry.cube_dims} applied to {x.dims}")
    s = _moving_sums(x.data, geometry.b, geometry.stride_t, axis=0)
    s = _moving_sums(s, geometry.ny_b, geometry.stride_y, axis=1)
    s = _moving_sums(s, geometry.nx_b, geometry.stride_x, axis=2)
    return (s / geometry.r).reshape(-1)


def coverage_counts(geometry: BlockGeometry) -> np.ndarray:
    """Per-voxel count of enumerated blocks containing the voxel.

    Shape (nb, ny, nx), int64. This is the diagonal of the stacked
    extract-transpose-extract operator.
    """
    nx, ny, nb = geometry.cube_dims

    def axis_cover(n, width, stride):
        c = np.zeros(n, dtype=np.int64)
        for p in range(0, n - width + 1, stride):
            c[p : p + width] += 1
        return c

    ct = axis_cover(nb, geometry.b, geometry.stride_t)
    cy = axis_cover(ny, geometry.ny_b, geometry.stride_y)
    cx = axis_cover(nx, geometry.nx_b, geometry.stride_x)
    return ct[:, None, None] * cy[None, :, None] * cx[None, None, :]


def _overlap_add_extended(columns: np.ndarray, geometry: BlockGeometry) -> np.ndarray:
    # Accumulate in 80-bit extended precision: partial sums of up to 2^11
    # float64 terms stay exact, which keeps unmodified extract/average round
    # trips bit-exact.
    nx, ny, nb = geometry.cube_dims
    px, py, pt = geometry.positions
    columns = np.asarray(columns)
    if columns.shape != (geometry.r, geometry.n_blocks):
        raise ValueError(
            f"expected columns of shape {(geometry.r, geometry.n_blocks)}, got {columns.shape}"
        )
    vals = columns.reshape(geometry.b, geometry.ny_b, geometry.nx_b, pt, py, px)
    acc = np.zeros((nb, ny, nx), dtype=np.longdouble)
    st, sy, sx = geometry.stride_t, geometry.stride_y, geometry.stride_x
    for dt in range(geometry.b):
        tsl = slice(dt, dt + (pt - 1) * st + 1, st)
        for dy in range(geometry.ny_b):
            ysl = slice(dy, dy + (py - 1) * sy + 1, sy)
            for dx in range(geometry.nx_b):
                xsl = slice(dx, dx + (px - 1) * sx + 1, sx)
                acc[tsl, ysl, xsl] += vals[dt, dy, dx]
    return acc


def overlap_add(columns: np.ndarray, geometry: BlockGeometry) -> np.ndarray:
    """Scatter block columns back into the cube, summing where blocks overlap."""
    return _overlap_add_extended(columns, geometry).astype(np.float64)


def overlap_average(columns: np.ndarray, geometry: BlockGeometry) -> Datacube:
    """Reassemble a cube by averaging every voxel over the blocks that cover it.

    Every voxel must be covered by at least one enumerated block. With
    unmodified extracted columns this reproduces the source cube exactly.
    """
    counts = coverage_counts(geometry)
    if (counts == 0).any():
        raise ValueError("geometry leaves voxels uncovered; cannot average")
    acc = _overlap_add_extended(columns, geometry)
    return Datacube((acc / counts).astype(np.float64))
