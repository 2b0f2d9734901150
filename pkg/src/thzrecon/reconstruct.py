"""Closed-form fusion of the interpolated cube with its sparse block model.

The recovered cube minimizes a convex quadratic: a weighted data-fidelity
term against the input estimate, the stacked block coding errors, and a
block-mean smoothness term. Because the normal-equation matrix is diagonal,
the minimizer is computed voxel-wise:

    x[v] = (lam * y[v] + sum_i approx_i[v] + beta * sum_i m_i)
           / (lam + (1 + beta) * c[v])

where the sums run over the blocks containing voxel v, ``approx_i`` is the
coded approximation of block i placed at its origin, ``m_i`` its mean, and
``c[v]`` the coverage count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockGeometry, SubsetGrouping, coverage_counts, enumerate_blocks, extract_columns
from .datacube import Datacube
from .dictionary import Dictionary
from .sparse_mmv import JointCode


@dataclass(frozen=True)
class ReconParams:
    """Data-fidelity weight ``lam`` and smoothness weight ``beta``."""

    lam: float = 0.5
    beta: float = 0.1

    def __post_init__(self):
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lam and beta must be non-negative")


def _subset_ranges(grouping: SubsetGrouping, codes) -> list[tuple[int, int]]:
    bounds = grouping.boundaries
    if len(codes) != len(bounds):
        raise ValueError(f"expected {len(bounds)} codes, got {len(codes)}")
    return bounds


def fuse(
    y: Datacube,
    dictionary: Dictionary,
    codes: list[JointCode],
    means: np.ndarray,
    geometry: BlockGeometry,
    grouping: SubsetGrouping,
    params: ReconParams = ReconParams(),
) -> Datacube:
    """Voxel-wise closed-form solve; codes must cover the full enumeration."""
    if not geometry.matches(y):
        raise ValueError(f"geometry for cube {geometry.cube_dims} applied to {y.dims}")
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (geometry.n_blocks,):
        raise ValueError(f"means must have length {geometry.n_blocks}")
    bounds = _subset_ranges(grouping, codes)
    counts = coverage_counts(geometry)
    if params.lam == 0.0 and (counts == 0).any():
        raise ValueError("lam = 0 with uncovered voxels gives a zero denominator")

    A = dictionary.atoms
    origins = enumerate_blocks(geometry)
    bshape = geometry.block_shape
    num = params.lam * y.data
    beta = params.beta
    for code, (start, stop) in zip(codes, bounds):
        if code.n_atoms:
            approx = A[:, code.support] @ code.coeffs
        else:
            approx = np.zeros((geometry.r, stop - start))
        for c in range(stop - start):
            ox, oy, ot = origins[start + c]
            num[
                ot : ot + geometry.b, oy : oy + geometry.ny_b, ox : ox + geometry.nx_b
            ] += approx[:, c].reshape(bshape) + beta * means[start + c]
    denom = params.lam + (1.0 + beta) * counts
    return Datacube(num / denom)


def objective(
    x: Datacube,
    y: Datacube,
    dictionary: Dictionary,
    codes: list[JointCode],
    means: np.ndarray,
    geometry: BlockGeometry,
    grouping: SubsetGrouping,
    params: ReconParams = ReconParams(),
) -> float:
    """Value of the fusion cost at x; fuse() is its unique minimizer."""
    if x.dims != y.dims:
        raise ValueError("x and y dimensions differ")
    means = np.asarray(means, dtype=np.float64)
    bounds = _subset_ranges(grouping, codes)
    diff = x.data - y.data
    total = params.lam * float((diff * diff).sum())
    A = dictionary.atoms
    for code, (start, stop) in zip(codes, bounds):
        cols = extract_columns(x.data, geometry, np.arange(start, stop))
        if code.n_atoms:
            err = cols - A[:, code.support] @ code.coeffs
        else:
            err = cols
        total += float((err * err).sum())
        smooth = cols - means[start:stop][None, :]
        total += params.beta * float((smooth * smooth).sum())
    return total
