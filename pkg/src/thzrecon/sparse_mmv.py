"""Joint sparse coding of block subsets against a fixed dictionary.

Solves the multiple-measurement-vector problem: all columns of one subset
are approximated over a single shared support, grown greedily. At each step
the atom maximizing the summed squared correlation with the current residual
columns is added, then all coefficients are refit by least squares on the
accumulated support, which makes the residual norm strictly decreasing.
The single-vector case is the one-column special case of the same routine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Gram condition number beyond which an added atom is rejected
COND_LIMIT = 1e12


@dataclass(frozen=True)
class SompConfig:
    """Stopping rule: at most ``max_atoms`` atoms, or residual Frobenius norm
    below ``residual_tol`` times the subset norm, whichever first."""

    max_atoms: int = 8
    residual_tol: float = 1e-3

    def __post_init__(self):
        if self.max_atoms < 1:
            raise ValueError("max_atoms must be >= 1")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be >= 0")


@dataclass
class JointCode:
    """Shared support and per-column coefficients for one subset.

    ``coeffs`` has shape (len(support), l). ``ill_conditioned`` flags a
    coding stopped early because the selected atoms became numerically
    dependent.
    """

    support: np.ndarray
    coeffs: np.ndarray
    ill_conditioned: bool = False

    @property
    def n_atoms(self) -> int:
        return len(self.support)


def _atoms_of(dictionary) -> np.ndarray:
    return dictionary.atoms if hasattr(dictionary, "atoms") else np.asarray(dictionary)


def somp(subset: np.ndarray, dictionary, cfg: SompConfig = SompConfig()) -> JointCode:
    """Greedy joint coding of an (r, l) subset over a shared support.

    ``dictionary`` may be a Dictionary object or a raw (r, k) atom matrix
    with unit-norm columns. Ties in atom selection break toward the lowest
    index. The returned coefficients are the least-squares fit of the subset
    onto the selected atoms.
    """
    A = _atoms_of(dictionary)
    Y = np.asarray(subset, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    r, k = A.shape
    if Y.shape[0] != r:
        raise ValueError(f"subset rows {Y.shape[0]} do not match atom length {r}")
    l = Y.shape[1]
    norm0 = float(np.linalg.norm(Y))
    empty = JointCode(np.empty(0, dtype=np.int64), np.zeros((0, l)))
    if norm0 == 0.0:
        return empty

    max_sel = min(cfg.max_atoms, r, k)
    support: list[int] = []
    coeffs = empty.coeffs
    resid = Y
    floor = (1e-12 * norm0) ** 2
    while len(support) < max_sel:
        corr = A.T @ resid
        scores = np.einsum("kl,kl->k", corr, corr)
        if support:
            scores[support] = -1.0
        atom = int(np.argmax(scores))
        if scores[atom] <= floor:
            break
        trial = support + [atom]
        sol, _, rank, sv = np.linalg.lstsq(A[:, trial], Y, rcond=None)
        if rank < len(trial) or sv[-1] <= 0 or sv[0] / sv[-1] > COND_LIMIT:
            return JointCode(np.array(support, dtype=np.int64), coeffs, ill_conditioned=True)
        support = trial
        coeffs = sol
        resid = Y - A[:, support] @ coeffs
        if np.linalg.norm(resid) <= cfg.residual_tol * norm0:
            break
    return JointCode(np.array(support, dtype=np.int64), coeffs)


def omp(vector: np.ndarray, dictionary, cfg: SompConfig = SompConfig()) -> JointCode:
    """Single-vector coding; bit-identical to ``somp`` on the column matrix."""
    v = np.asarray(vector, dtype=np.float64).reshape(-1, 1)
    return somp(v, dictionary, cfg)
