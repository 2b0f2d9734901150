import numpy as np
import pytest

from thzrecon import (
    BlockGeometry,
    Datacube,
    Dictionary,
    SompConfig,
    TrainConfig,
    dct_init,
    ksvd_update,
    read_dictionary,
    somp,
    train,
    write_dictionary,
)
from thzrecon.datacube import FormatError
from thzrecon.dictionary import coding_error, train_columns


def unit_dictionary(rng, r, k):
    atoms = rng.standard_normal((r, k))
    return Dictionary(atoms / np.linalg.norm(atoms, axis=0))


class TestDictionaryType:
    def test_rejects_non_unit_columns(self):
        with pytest.raises(ValueError, match="unit norm"):
            Dictionary(np.eye(3) * 2.0)

    def test_rejects_nan(self):
        a = np.eye(3)
        a[0, 0] = np.nan
        with pytest.raises(ValueError):
            Dictionary(a)

    def test_shape_properties(self, rng):
        d = unit_dictionary(rng, 6, 9)
        assert d.r == 6 and d.k == 9


class TestDctInit:
    def test_trivial(self):
        g = BlockGeometry(1, 1, 1, (2, 2, 2))
        assert np.array_equal(dct_init(1, 1, g).atoms, [[1.0]])

    def test_orthonormal_when_square(self):
        g = BlockGeometry(4, 1, 1, (4, 1, 1))
        D = dct_init(4, 4, g)
        assert np.abs(D.atoms.T @ D.atoms - np.eye(4)).max() < 1e-12

    def test_paper_regime_shapes(self):
        dims = (64, 64, 128)
        assert dct_init(64, 256, BlockGeometry(8, 8, 1, dims)).atoms.shape == (64, 256)
        D = dct_init(256, 256, BlockGeometry(8, 8, 4, dims))
        assert D.atoms.shape == (256, 256)
        assert np.abs(D.atoms.T @ D.atoms - np.eye(256)).max() < 1e-12

    def test_dc_atom_first(self):
        g = BlockGeometry(8, 8, 4, (16, 16, 8))
        D = dct_init(256, 256, g)
        assert np.allclose(D.atoms[:, 0], 1.0 / 16.0, atol=1e-12)

    def test_undercomplete_warns(self, caplog):
        g = BlockGeometry(2, 2, 8, (4, 4, 16))
        with caplog.at_level("WARNING"):
            dct_init(32, 8, g)
        assert "undercomplete" in caplog.text

    def test_impossible_factorization(self):
        g = BlockGeometry(1, 1, 1, (2, 2, 2))
        with pytest.raises(ValueError, match="factor"):
            dct_init(1, 4, g)

    def test_r_must_match_geometry(self):
        g = BlockGeometry(2, 2, 2, (4, 4, 4))
        with pytest.raises(ValueError, match="does not match"):
            dct_init(9, 16, g)


class TestDictionaryFile:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        d = unit_dictionary(rng, 12, 20)
        path = tmp_path / "d.thzd"
        write_dictionary(d, path)
        assert np.array_equal(read_dictionary(path).atoms, d.atoms)

    def test_column_major_layout(self, tmp_path, rng):
        d = unit_dictionary(rng, 3, 2)
        path = tmp_path / "d.thzd"
        write_dictionary(d, path)
        payload = np.frombuffer(path.read_bytes()[16:], dtype="<f8")
        assert np.array_equal(payload[:3], d.atoms[:, 0])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.thzd"
        path.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(FormatError, match="magic"):
            read_dictionary(path)

    def test_truncated(self, tmp_path, rng):
        d = unit_dictionary(rng, 4, 4)
        path = tmp_path / "d.thzd"
        write_dictionary(d, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError, match="truncated"):
            read_dictionary(path)


class TestKsvdUpdate:
    def test_rank_one_data(self, rng):
        u = rng.standard_normal(8)
        u[0] = abs(u[0]) + 0.1
        u /= np.linalg.norm(u)
        v = rng.standard_normal(5)
        X = np.outer(u, v)
        start = unit_dictionary(rng, 8, 1)
        code = somp(X, start, SompConfig(max_atoms=1, residual_tol=0.0))
        D = ksvd_update(start, [X], [code])
        sign = np.sign(np.dot(D.atoms[:, 0], u))
        assert np.allclose(D.atoms[:, 0], sign * u, atol=1e-10)
        assert np.allclose(code.coeffs[0], sign * v, atol=1e-10)

    def test_zero_residual_keeps_atoms(self, rng):
        D0 = unit_dictionary(rng, 10, 6)
        C = rng.standard_normal((2, 4))
        X = D0.atoms[:, [1, 4]] @ C
        code = somp(X, D0, SompConfig(max_atoms=2, residual_tol=0.0))
        D1 = ksvd_update(D0, [X], [code], replace_unused=False)
        for a in code.support:
            cos = abs(np.dot(D0.atoms[:, a], D1.atoms[:, a]))
            assert cos > 1 - 1e-10

    def test_never_increases_error(self, rng):
        D0 = unit_dictionary(rng, 12, 20)
        subsets = [rng.standard_normal((12, 5)) for _ in range(6)]
        codes = [somp(S, D0, SompConfig(max_atoms=3, residual_tol=0.0)) for S in subsets]
        before = coding_error(subsets, D0, codes)
        D1 = ksvd_update(D0, subsets, codes)
        after = coding_error(subsets, D1, codes)
        assert after <= before * (1 + 1e-12)

    def test_unused_atoms_replaced_by_worst_column(self, rng):
        D0 = unit_dictionary(rng, 8, 4)
        atoms = np.array(D0.atoms)
        X = np.outer(atoms[:, 0], [3.0, 2.0]) + 0.01 * rng.standard_normal((8, 2))
        hard = rng.standard_normal(8) * 10.0
        X = np.concatenate([X, hard[:, None]], axis=1)
        code = somp(X, D0, SompConfig(max_atoms=1, residual_tol=0.0))
        D1 = ksvd_update(D0, [X], [code], replace_unused=True)
        used = code.support[0]
        unused = [a for a in range(4) if a != used]
        resid = X - D0.atoms[:, code.support] @ code.coeffs
        worst = X[:, np.argmax((resid**2).sum(axis=0))]
        worst = worst / np.linalg.norm(worst)
        match = np.abs(D1.atoms[:, unused].T @ worst).max()
        assert match > 1 - 1e-10

    def test_replace_unused_off_keeps_atoms(self, rng):
        D0 = unit_dictionary(rng, 8, 4)
        X = np.outer(D0.atoms[:, 2], [1.0, -2.0])
        code = somp(X, D0, SompConfig(max_atoms=1, residual_tol=0.0))
        D1 = ksvd_update(D0, [X], [code], replace_unused=False)
        for a in range(4):
            if a != code.support[0]:
                assert np.array_equal(D1.atoms[:, a], D0.atoms[:, a])

    def test_unit_norm_after_update(self, rng):
        D0 = unit_dictionary(rng, 10, 15)
        subsets = [rng.standard_normal((10, 4)) for _ in range(5)]
        codes = [somp(S, D0, SompConfig(max_atoms=3)) for S in subsets]
        D1 = ksvd_update(D0, subsets, codes)
        assert np.abs(np.linalg.norm(D1.atoms, axis=0) - 1.0).max() < 1e-12

    def test_sign_convention(self, rng):
        D0 = unit_dictionary(rng, 10, 15)
        subsets = [rng.standard_normal((10, 4)) for _ in range(5)]
        codes = [somp(S, D0, SompConfig(max_atoms=3)) for S in subsets]
        D1 = ksvd_update(D0, subsets, codes)
        for a in range(D1.k):
            col = D1.atoms[:, a]
            first = col[np.abs(col) > 1e-12][0]
            assert first > 0


class TestTrain:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(iterations=0)
        with pytest.raises(ValueError):
            TrainConfig(l=0)
        with pytest.raises(ValueError):
            TrainConfig(k=0)

    def test_single_iteration_runs_one_alternation(self, rng):
        cols = rng.standard_normal((8, 40))
        init = unit_dictionary(rng, 8, 12)
        cfg = TrainConfig(k=12, iterations=1, l=5, somp=SompConfig(max_atoms=2))
        _, _, errors = train_columns(cols, cfg, init)
        assert len(errors) == 1

    def test_deterministic_given_seed(self, rng):
        cube = Datacube(np.random.default_rng(4).standard_normal((8, 10, 10)))
        g = BlockGeometry(3, 3, 2, cube.dims)
        cfg = TrainConfig(k=24, iterations=2, l=6, somp=SompConfig(max_atoms=3),
                          max_train_blocks=150, seed=7)
        d1, c1 = train(cube, g, cfg)
        d2, c2 = train(cube, g, cfg)
        assert np.array_equal(d1.atoms, d2.atoms)
        assert all(
            np.array_equal(a.support, b.support) and np.array_equal(a.coeffs, b.coeffs)
            for a, b in zip(c1, c2)
        )

    def test_codes_cover_full_enumeration(self, rng):
        cube = Datacube(np.random.default_rng(4).standard_normal((6, 8, 8)))
        g = BlockGeometry(2, 2, 2, cube.dims)
        cfg = TrainConfig(k=16, iterations=1, l=4, somp=SompConfig(max_atoms=2),
                          max_train_blocks=50, seed=0)
        _, codes = train(cube, g, cfg)
        from thzrecon import group

        assert len(codes) == group(g.n_blocks, 4).n_subsets

    def test_unit_norm_invariant(self, rng):
        cube = Datacube(np.random.default_rng(9).standard_normal((6, 8, 8)))
        g = BlockGeometry(2, 2, 2, cube.dims)
        cfg = TrainConfig(k=16, iterations=3, l=4, somp=SompConfig(max_atoms=2),
                          max_train_blocks=400, seed=1)
        d, _ = train(cube, g, cfg)
        assert np.abs(np.linalg.norm(d.atoms, axis=0) - 1.0).max() < 1e-12

    def test_plateau_stops_early(self, rng):
        # exactly representable data plateaus after the first alternations
        init = unit_dictionary(rng, 6, 8)
        C = rng.standard_normal((1, 30))
        cols = np.outer(init.atoms[:, 0], C)
        cfg = TrainConfig(k=8, iterations=50, l=5, somp=SompConfig(max_atoms=1),
                          plateau_tol=1e-4)
        _, _, errors = train_columns(cols, cfg, init)
        assert len(errors) < 50
