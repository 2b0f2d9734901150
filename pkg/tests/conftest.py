import numpy as np
import pytest

from thzrecon import BlockGeometry, Datacube


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cube(rng, dims=None, max_dim=6):
    if dims is None:
        dims = tuple(int(rng.integers(2, max_dim + 1)) for _ in range(3))
    nx, ny, nb = dims
    return Datacube(rng.standard_normal((nb, ny, nx)))


def random_geometry(rng, cube, stride1=False):
    nx, ny, nb = cube.dims
    g = dict(
        nx_b=int(rng.integers(1, nx + 1)),
        ny_b=int(rng.integers(1, ny + 1)),
        b=int(rng.integers(1, nb + 1)),
    )
    if stride1:
        strides = dict(stride_x=1, stride_y=1, stride_t=1)
    else:
        strides = dict(
            stride_x=int(rng.integers(1, 3)),
            stride_y=int(rng.integers(1, 3)),
            stride_t=int(rng.integers(1, 3)),
        )
    return BlockGeometry(cube_dims=cube.dims, **g, **strides)


def block_voxel_ids(geometry, origin):
    """Linear voxel ids of one block, vectorization order (x fastest, y, t).

    Deliberately written with plain loops, independent of the library's
    strided implementations.
    """
    ox, oy, ot = origin
    nx, ny, _ = geometry.cube_dims
    ids = []
    for t in range(ot, ot + geometry.b):
        for y in range(oy, oy + geometry.ny_b):
            for x in range(ox, ox + geometry.nx_b):
                ids.append((t * ny + y) * nx + x)
    return np.array(ids)
