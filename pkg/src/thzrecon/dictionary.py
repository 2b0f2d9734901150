"""Dictionary container, separable DCT initialization, K-SVD updates, training.

Training alternates a joint sparse-coding pass over all subsets with a
column-by-column singular-value dictionary update until the representation
error plateaus or the iteration budget runs out. A final coding pass covers
every enumerated block so the result can drive reconstruction directly.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .blocks import BlockGeometry, SubsetGrouping, extract_columns, group, iter_subset_columns
from .datacube import FORMAT_VERSION, Datacube, FormatError
from .sparse_mmv import JointCode, SompConfig, somp

log = logging.getLogger(__name__)

DICT_MAGIC = b"THZD"
UNIT_NORM_TOL = 1e-12

# relative drop of the total squared coding error below which training stops
PLATEAU_TOL_DEFAULT = 1e-4


@dataclass(frozen=True)
class Dictionary:
    """r x k atom matrix with unit-norm columns."""

    atoms: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.atoms, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError(f"atoms must be a 2-D matrix, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("dictionary contains NaN or Inf")
        norms = np.linalg.norm(a, axis=0)
        if np.abs(norms - 1.0).max() > UNIT_NORM_TOL:
            raise ValueError("dictionary columns must have unit norm")
        if a.flags.writeable:
            a.flags.writeable = False
        object.__setattr__(self, "atoms", a)

    @property
    def r(self) -> int:
        return self.atoms.shape[0]

    @property
    def k(self) -> int:
        return self.atoms.shape[1]


_DICT_HEADER = struct.Struct("<4sIII")


def write_dictionary(d: Dictionary, path) -> None:
    """Magic "THZD", u32 version, u32 r, u32 k, then r*k float64 column-major."""
    with open(path, "wb") as fh:
        fh.write(_DICT_HEADER.pack(DICT_MAGIC, FORMAT_VERSION, d.r, d.k))
        fh.write(d.atoms.ravel(order="F").astype("<f8", copy=False).tobytes())


def read_dictionary(path) -> Dictionary:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _DICT_HEADER.size:
        raise FormatError(f"{path}: file too short for header")
    magic, version, r, k = _DICT_HEADER.unpack_from(raw)
    if magic != DICT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {DICT_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if r < 1 or k < 1 or r * k > (1 << 28):
        raise FormatError(f"{path}: bad dictionary shape {r}x{k}")
    payload = np.frombuffer(raw, dtype="<f8", offset=_DICT_HEADER.size)
    if payload.size != r * k:
        raise FormatError(f"{path}: truncated payload, expected {r * k} values")
    try:
        return Dictionary(payload.reshape(k, r).T)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _axis_counts(dims: tuple[int, int, int], k: int) -> tuple[int, int, int]:
    """Per-axis atom counts proportional to the block aspect, product >= k.

    Axes of length 1 contribute a single (constant) factor; a frequency
    index above 0 on such an axis would die under mean removal.
    """
    free = [i for i, n in enumerate(dims) if n > 1]
    counts = [1, 1, 1]
    if not free:
        if k > 1:
            raise ValueError(f"cannot factor {k} atoms over a single-voxel block")
        return tuple(counts)
    prod_free = 1
    for i in free:
        prod_free *= dims[i]
    scale = (k / prod_free) ** (1.0 / len(free))
    for i in free:
        counts[i] = max(1, int(np.ceil(dims[i] * scale)))
    total = counts[0] * counts[1] * counts[2]
    if total < k:
        raise ValueError(f"per-axis allocation {tuple(counts)} cannot reach k = {k}")
    return tuple(counts)


def _axis_bank(n: int, k_ax: int) -> np.ndarray:
    """1D cosine bank: entry (i, j) = cos(pi * (i + 0.5) * j / k_ax).

    Columns j > 0 are mean-removed then normalized; with k_ax = n this is
    the orthonormal DCT-II basis.
    """
    i = np.arange(n, dtype=float)[:, None]
    j = np.arange(k_ax, dtype=float)[None, :]
    bank = np.cos(np.pi * (i + 0.5) * j / k_ax)
    if k_ax > 1:
        bank[:, 1:] -= bank[:, 1:].mean(axis=0, keepdims=True)
    return bank / np.linalg.norm(bank, axis=0, keepdims=True)


def dct_init(r: int, k: int, geometry: BlockGeometry) -> Dictionary:
    """Separable overcomplete cosine dictionary for the geometry's block shape.

    3D atoms are Kronecker products of per-axis banks, enumerated with the
    x frequency fastest (then y, then t) and truncated to k columns. The
    first atom is always the constant 1/sqrt(r) column.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if r != geometry.r:
        raise ValueError(f"r = {r} does not match geometry block volume {geometry.r}")
    if k < r:
        log.warning("undercomplete dictionary requested: k = %d < r = %d", k, r)
    dims = (geometry.nx_b, geometry.ny_b, geometry.b)
    kx, ky, kt = _axis_counts(dims, k)
    bank_x = _axis_bank(geometry.nx_b, kx)
    bank_y = _axis_bank(geometry.ny_b, ky)
    bank_t = _axis_bank(geometry.b, kt)
    atoms = np.empty((r, k))
    col = 0
    for ft in range(kt):
        for fy in range(ky):
            base = np.kron(bank_t[:, ft], bank_y[:, fy])
            for fx in range(kx):
                if col == k:
                    break
                atoms[:, col] = np.kron(base, bank_x[:, fx])
                col += 1
            if col == k:
                break
        if col == k:
            break
    atoms /= np.linalg.norm(atoms, axis=0, keepdims=True)
    return Dictionary(atoms)


@dataclass(frozen=True)
class TrainConfig:
    """Alternation budget and coding parameters for dictionary training."""

    k: int = 256
    iterations: int = 15
    l: int = 10
    somp: SompConfig = field(default_factory=SompConfig)
    replace_unused: bool = True
    seed: int = 0
    max_train_blocks: int = 40000
    plateau_tol: float = PLATEAU_TOL_DEFAULT

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.l < 1:
            raise ValueError("l must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_train_blocks < 1:
            raise ValueError("max_train_blocks must be >= 1")
        if self.plateau_tol < 0:
            raise ValueError("plateau_tol must be >= 0")


def _first_sign_fix(u: np.ndarray) -> float:
    """Sign that makes the first non-negligible entry of u non-negative."""
    nz = np.flatnonzero(np.abs(u) > 1e-12)
    if len(nz) and u[nz[0]] < 0:
        return -1.0
    return 1.0


def _principal_pair(E: np.ndarray):
    """Leading singular triple (u, sigma, v_row) of E, or None if E is zero."""
    r, m = E.shape
    if m <= r:
        U, sv, Vt = np.linalg.svd(E, full_matrices=False)
        if sv[0] <= 0:
            return None
        return U[:, 0], float(sv[0]), Vt[0]
    G = E @ E.T
    w, vecs = scipy.linalg.eigh(G, subset_by_index=(r - 1, r - 1))
    sigma = float(np.sqrt(max(w[0], 0.0)))
    if sigma <= 0:
        return None
    u = vecs[:, 0]
    return u, sigma, (u @ E) / sigma


def ksvd_update(
    dictionary: Dictionary,
    subsets: list[np.ndarray],
    codes: list[JointCode],
    replace_unused: bool = True,
) -> Dictionary:
    """One column-by-column singular-value update of every atom.

    For each atom in index order, the restricted representation error over
    the columns that use it is formed and its leading singular pair becomes
    the new atom and (in place) the new coefficient row. Later atoms see
    earlier updates. Atoms used by no column are optionally replaced by the
    worst-represented block column, normalized.
    """
    if len(subsets) != len(codes):
        raise ValueError("subsets and codes must align")
    A = np.array(dictionary.atoms)
    r, k = A.shape

    users: list[list[tuple[int, int]]] = [[] for _ in range(k)]
    for j, code in enumerate(codes):
        for row, atom in enumerate(code.support):
            users[int(atom)].append((j, row))

    resid = []
    for X, code in zip(subsets, codes):
        if code.n_atoms:
            resid.append(X - A[:, code.support] @ code.coeffs)
        else:
            resid.append(np.array(X, dtype=np.float64))

    unused: list[int] = []
    for atom in range(k):
        use = users[atom]
        if not use:
            unused.append(atom)
            continue
        widths = [codes[j].coeffs.shape[1] for j, _ in use]
        E = np.empty((r, sum(widths)))
        off = 0
        for (j, row), w in zip(use, widths):
            E[:, off : off + w] = resid[j] + np.outer(A[:, atom], codes[j].coeffs[row])
            off += w
        pair = _principal_pair(E)
        if pair is None:
            unused.append(atom)
            continue
        u, sigma, vrow = pair
        flip = _first_sign_fix(u)
        u = flip * u
        new_rows = (flip * sigma) * vrow
        A[:, atom] = u
        off = 0
        for (j, row), w in zip(use, widths):
            codes[j].coeffs[row] = new_rows[off : off + w]
            resid[j] = E[:, off : off + w] - np.outer(u, new_rows[off : off + w])
            off += w

    if replace_unused and unused:
        res_norms = np.concatenate([(R * R).sum(axis=0) for R in resid])
        sig_cols = np.concatenate([np.asarray(X) for X in subsets], axis=1)
        order = np.argsort(-res_norms)
        pos = 0
        for atom in unused:
            while pos < len(order):
                col = sig_cols[:, order[pos]]
                pos += 1
                nrm = np.linalg.norm(col)
                if nrm > 0:
                    A[:, atom] = _first_sign_fix(col) * col / nrm
                    break

    return Dictionary(A)


def coding_error(subsets: list[np.ndarray], dictionary: Dictionary, codes: list[JointCode]) -> float:
    """Total squared representation error over all subsets."""
    A = dictionary.atoms
    total = 0.0
    for X, code in zip(subsets, codes):
        if code.n_atoms:
            diff = X - A[:, code.support] @ code.coeffs
        else:
            diff = X
        total += float((diff * diff).sum())
    return total


def train_columns(
    columns: np.ndarray,
    cfg: TrainConfig,
    init: Dictionary,
) -> tuple[Dictionary, list[JointCode], list[float]]:
    """Alternating training on an explicit (r, M) column matrix.

    Returns the trained dictionary, the codes from the last coding pass, and
    the total squared error recorded after each alternation.
    """
    M = columns.shape[1]
    grouping = group(M, cfg.l)
    subsets = [columns[:, a:b] for a, b in grouping.boundaries]
    D = init
    codes: list[JointCode] = []
    errors: list[float] = []
    for it in range(cfg.iterations):
        codes = [somp(S, D, cfg.somp) for S in subsets]
        D = ksvd_update(D, subsets, codes, replace_unused=cfg.replace_unused)
        err = coding_error(subsets, D, codes)
        errors.append(err)
        log.info("alternation %d/%d: squared error %.6g", it + 1, cfg.iterations, err)
        if len(errors) > 1:
            prev = errors[-2]
            if prev > 0 and (prev - err) < cfg.plateau_tol * prev:
                break
    return D, codes, errors


def code_blocks(
    y: Datacube,
    dictionary: Dictionary,
    geometry: BlockGeometry,
    grouping: SubsetGrouping,
    cfg: SompConfig = SompConfig(),
) -> list[JointCode]:
    """Joint-code every enumerated block, subset by subset, in raster order."""
    return [
        somp(cols, dictionary, cfg)
        for _, cols in iter_subset_columns(y.data, geometry, grouping)
    ]


def train(
    y: Datacube,
    geometry: BlockGeometry,
    cfg: TrainConfig,
    grouping: SubsetGrouping | None = None,
    init: Dictionary | None = None,
) -> tuple[Dictionary, list[JointCode]]:
    """Learn a dictionary from the cube and code every block with it.

    Training uses at most ``cfg.max_train_blocks`` blocks (a seeded uniform
    subsample of the enumeration, order preserved); the final coding pass
    still covers the full enumeration defined by ``grouping``.
    """
    if not geometry.matches(y):
        raise ValueError(f"geometry for cube {geometry.cube_dims} applied to {y.dims}")
    n = geometry.n_blocks
    if grouping is None:
        grouping = group(n, cfg.l)
    if grouping.n_blocks != n:
        raise ValueError("grouping does not cover the block enumeration")
    rng = np.random.default_rng(cfg.seed)
    if n > cfg.max_train_blocks:
        sel = np.sort(rng.choice(n, size=cfg.max_train_blocks, replace=False))
    else:
        sel = np.arange(n)
    cols = extract_columns(y.data, geometry, sel)
    D = init if init is not None else dct_init(geometry.r, cfg.k, geometry)
    D, _, _ = train_columns(cols, cfg, D)
    return D, code_blocks(y, D, geometry, grouping, cfg.somp)
