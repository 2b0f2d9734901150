import numpy as np
import pytest

from conftest import block_voxel_ids, random_cube, random_geometry
from thzrecon import (
    BlockGeometry,
    Datacube,
    Dictionary,
    JointCode,
    ReconParams,
    block_means,
    coverage_counts,
    enumerate_blocks,
    extract,
    fuse,
    group,
    objective,
)


def random_codes(rng, geometry, grouping, k):
    codes = []
    for start, stop in grouping.boundaries:
        n_sel = int(rng.integers(1, min(4, k) + 1))
        sup = rng.choice(k, size=n_sel, replace=False)
        codes.append(JointCode(np.sort(sup), rng.standard_normal((n_sel, stop - start))))
    return codes


def unit_dictionary(rng, r, k):
    atoms = rng.standard_normal((r, k))
    return Dictionary(atoms / np.linalg.norm(atoms, axis=0))


def assembled_solution(y, dictionary, codes, means, geometry, grouping, params):
    """Direct normal-equation solve with explicitly scattered blocks."""
    p = y.size
    diag = np.full(p, params.lam, dtype=float)
    rhs = params.lam * y.values.copy()
    origins = enumerate_blocks(geometry)
    A = dictionary.atoms
    for code, (start, stop) in zip(codes, grouping.boundaries):
        approx = A[:, code.support] @ code.coeffs if code.n_atoms else np.zeros(
            (geometry.r, stop - start)
        )
        for c in range(stop - start):
            ids = block_voxel_ids(geometry, origins[start + c])
            diag[ids] += 1.0 + params.beta
            rhs[ids] += approx[:, c] + params.beta * means[start + c]
    return rhs / diag


class TestParams:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ReconParams(lam=-1.0)
        with pytest.raises(ValueError):
            ReconParams(beta=-0.5)


class TestFuse:
    def test_hand_value_single_block(self):
        # one block covering the whole cube; y=2, block approx=1, mean=1
        cube = Datacube(np.full((2, 2, 2), 2.0))
        g = BlockGeometry(2, 2, 2, cube.dims)
        grouping = group(1, 1)
        atom = np.full(8, 1.0 / np.sqrt(8.0))
        dic = Dictionary(atom[:, None])
        codes = [JointCode(np.array([0]), np.array([[np.sqrt(8.0)]]))]
        out = fuse(cube, dic, codes, np.array([1.0]), g, grouping,
                   ReconParams(lam=0.5, beta=0.1))
        assert np.allclose(out.data, 2.1 / 1.6, atol=1e-12)

    def test_fixed_point(self, rng):
        c = 3.7
        cube = Datacube(np.full((3, 4, 4), c))
        g = BlockGeometry(2, 2, 2, cube.dims)
        grouping = group(g.n_blocks, 5)
        atom = np.full(g.r, 1.0 / np.sqrt(g.r))
        dic = Dictionary(atom[:, None])
        codes = [
            JointCode(np.array([0]), np.full((1, stop - start), c * np.sqrt(g.r)))
            for start, stop in grouping.boundaries
        ]
        means = np.full(g.n_blocks, c)
        out = fuse(cube, dic, codes, means, g, grouping, ReconParams(lam=0.7, beta=0.3))
        assert np.allclose(out.data, c, atol=1e-12)

    def test_pure_tiling_reassembles_approximations(self, rng):
        cube = random_cube(rng, dims=(4, 4, 4))
        g = BlockGeometry(2, 2, 2, cube.dims, stride_x=2, stride_y=2, stride_t=2)
        grouping = group(g.n_blocks, 3)
        dic = unit_dictionary(rng, g.r, 6)
        codes = random_codes(rng, g, grouping, 6)
        means = block_means(extract(cube, g))
        out = fuse(cube, dic, codes, means, g, grouping, ReconParams(lam=0.0, beta=0.0))
        expected = np.zeros(cube.size)
        origins = enumerate_blocks(g)
        for code, (start, stop) in zip(codes, grouping.boundaries):
            approx = dic.atoms[:, code.support] @ code.coeffs
            for c in range(stop - start):
                expected[block_voxel_ids(g, origins[start + c])] = approx[:, c]
        assert np.allclose(out.values, expected, atol=1e-12)

    def test_matches_assembled_normal_equations(self, rng):
        for _ in range(5):
            cube = random_cube(rng, max_dim=6)
            g = random_geometry(rng, cube, stride1=True)
            grouping = group(g.n_blocks, int(rng.integers(1, 6)))
            dic = unit_dictionary(rng, g.r, 7)
            codes = random_codes(rng, g, grouping, 7)
            means = block_means(extract(cube, g))
            params = ReconParams(lam=0.5, beta=0.1)
            out = fuse(cube, dic, codes, means, g, grouping, params)
            direct = assembled_solution(cube, dic, codes, means, g, grouping, params)
            rel = np.abs(out.values - direct) / np.maximum(np.abs(direct), 1e-30)
            assert rel.max() < 1e-10

    def test_large_lambda_returns_input(self, rng):
        cube = random_cube(rng, dims=(4, 4, 4))
        g = BlockGeometry(2, 2, 2, cube.dims)
        grouping = group(g.n_blocks, 4)
        dic = unit_dictionary(rng, g.r, 5)
        codes = random_codes(rng, g, grouping, 5)
        means = block_means(extract(cube, g))
        out = fuse(cube, dic, codes, means, g, grouping, ReconParams(lam=1e6, beta=0.1))
        assert np.abs(out.data - cube.data).max() < 1e-3 * np.abs(cube.data).max()

    def test_zero_denominator_rejected(self, rng):
        cube = random_cube(rng, dims=(5, 4, 4))
        # stride-2 tiling leaves the last x column uncovered
        g = BlockGeometry(2, 2, 2, cube.dims, stride_x=2, stride_y=2, stride_t=2)
        grouping = group(g.n_blocks, 2)
        dic = unit_dictionary(rng, g.r, 4)
        codes = random_codes(rng, g, grouping, 4)
        means = np.zeros(g.n_blocks)
        with pytest.raises(ValueError, match="zero denominator"):
            fuse(cube, dic, codes, means, g, grouping, ReconParams(lam=0.0, beta=0.1))

    def test_means_length_validated(self, rng):
        cube = random_cube(rng, dims=(4, 4, 4))
        g = BlockGeometry(2, 2, 2, cube.dims)
        grouping = group(g.n_blocks, 4)
        dic = unit_dictionary(rng, g.r, 5)
        codes = random_codes(rng, g, grouping, 5)
        with pytest.raises(ValueError, match="means"):
            fuse(cube, dic, codes, np.zeros(3), g, grouping)


class TestObjective:
    def setup_case(self, rng, dims=(4, 4, 4)):
        cube = random_cube(rng, dims=dims)
        g = BlockGeometry(2, 2, 2, cube.dims)
        grouping = group(g.n_blocks, 4)
        dic = unit_dictionary(rng, g.r, 6)
        codes = random_codes(rng, g, grouping, 6)
        means = block_means(extract(cube, g))
        return cube, g, grouping, dic, codes, means

    def test_self_coding_leaves_only_smoothness(self, rng):
        cube = random_cube(rng, dims=(4, 4, 4))
        g = BlockGeometry(2, 2, 2, cube.dims)
        grouping = group(g.n_blocks, 4)
        cols = extract(cube, g)
        means = block_means(cols)
        # perfect per-block codes: LS coefficients on a spanning basis
        basis = np.linalg.qr(np.random.default_rng(0).standard_normal((g.r, g.r)))[0]
        dic = Dictionary(basis)
        codes = [
            JointCode(np.arange(g.r), basis.T @ cols[:, start:stop])
            for start, stop in grouping.boundaries
        ]
        params = ReconParams(lam=0.4, beta=0.2)
        got = objective(cube, cube, dic, codes, means, g, grouping, params)
        smooth = 0.0
        for i in range(g.n_blocks):
            block = cols[:, i]
            smooth += params.beta * float(((block - means[i]) ** 2).sum())
        assert got == pytest.approx(smooth, rel=1e-10)

    def test_fuse_is_local_minimum(self, rng):
        cube, g, grouping, dic, codes, means = self.setup_case(rng)
        params = ReconParams(lam=0.5, beta=0.1)
        best = fuse(cube, dic, codes, means, g, grouping, params)
        f0 = objective(best, cube, dic, codes, means, g, grouping, params)
        for _ in range(100):
            delta = 1e-3 * rng.standard_normal(best.data.shape)
            perturbed = Datacube(best.data + delta)
            assert objective(perturbed, cube, dic, codes, means, g, grouping, params) >= f0

    def test_gradient_vanishes_at_fuse(self, rng):
        cube, g, grouping, dic, codes, means = self.setup_case(rng)
        params = ReconParams(lam=0.5, beta=0.1)
        best = fuse(cube, dic, codes, means, g, grouping, params)
        h = 1e-4
        grad = np.zeros(best.size)
        flat = best.data.reshape(-1)
        for v in range(best.size):
            plus = flat.copy()
            minus = flat.copy()
            plus[v] += h
            minus[v] -= h
            fp = objective(Datacube(plus.reshape(best.data.shape)), cube, dic, codes,
                           means, g, grouping, params)
            fm = objective(Datacube(minus.reshape(best.data.shape)), cube, dic, codes,
                           means, g, grouping, params)
            grad[v] = (fp - fm) / (2 * h)
        assert np.linalg.norm(grad) < 1e-8

    def test_hessian_diagonal_matches_coverage(self, rng):
        cube, g, grouping, dic, codes, means = self.setup_case(rng)
        params = ReconParams(lam=0.5, beta=0.1)
        counts = coverage_counts(g)
        x = fuse(cube, dic, codes, means, g, grouping, params)
        h = 1e-3
        flat = x.data.reshape(-1)
        f0 = objective(x, cube, dic, codes, means, g, grouping, params)
        for v in [0, 7, x.size // 2, x.size - 1]:
            plus = flat.copy()
            minus = flat.copy()
            plus[v] += h
            minus[v] -= h
            fp = objective(Datacube(plus.reshape(x.data.shape)), cube, dic, codes,
                           means, g, grouping, params)
            fm = objective(Datacube(minus.reshape(x.data.shape)), cube, dic, codes,
                           means, g, grouping, params)
            second = (fp - 2 * f0 + fm) / h**2
            expected = 2.0 * (params.lam + (1 + params.beta) * counts.reshape(-1)[v])
            assert second == pytest.approx(expected, rel=1e-6)
