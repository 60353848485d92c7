"""Dense complex tensor kernels: contraction, truncated splits, and a
Krylov solver for the lowest eigenpairs of implicit Hermitian operators.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` in
C (row-major) order over their listed axes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DTYPE = np.complex128

# effective operators up to this size are diagonalized densely
DENSE_LIMIT = 4096


class ContractionShapeError(ValueError):
    pass


class SplitError(ValueError):
    pass


class IterationLimitError(RuntimeError):
    """Raised when the Krylov solver runs out of iterations.

    Attributes
    ----------
    residual : float
        Residual norm of the best Ritz pair found.
    value, vector :
        The best Ritz pair found.
    """

    def __init__(self, residual, value, vector):
        super().__init__(f"eigensolver did not converge, best residual {residual:.3e}")
        self.residual = residual
        self.value = value
        self.vector = vector


def as_tensor(data) -> np.ndarray:
    return np.ascontiguousarray(data, dtype=DTYPE)


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired axes of ``a`` and ``b``.

    The result carries the free axes of ``a`` followed by the free axes of
    ``b``, each group in its original order.
    """
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise ContractionShapeError(
                f"axis {i} of a has extent {a.shape[i]}, axis {j} of b has extent {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


@dataclass
class SplitResult:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    discarded_weight: float


def svd_split(t: np.ndarray, left_indices: Sequence[int], max_rank: int | None = None,
              cutoff: float = 0.0) -> SplitResult:
    """Truncated SVD across a bipartition of the axes of ``t``.

    ``u`` has the left axes followed by the new bond, ``v`` the new bond
    followed by the remaining axes (in their original order).  Singular
    values are dropped from the tail while their summed squares stay below
    ``cutoff * ||t||**2``, the rank is capped at ``max_rank``, and values at
    round-off level relative to the largest are always dropped.
    """
    left = list(left_indices)
    if not left or len(set(left)) >= t.ndim:
        raise SplitError("left_indices must be a nonempty proper subset of the axes")
    right = [i for i in range(t.ndim) if i not in left]
    lshape = [t.shape[i] for i in left]
    rshape = [t.shape[i] for i in right]
    mat = np.transpose(t, left + right).reshape(int(np.prod(lshape)), int(np.prod(rshape)))
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    # numerically zero singular values never count towards the rank
    noise = s[0] * np.finfo(float).eps * max(mat.shape) if len(s) else 0.0
    k = min(truncation_rank(s, max_rank, cutoff), max(int(np.sum(s > noise)), 1))
    discarded = float(np.sum(s[k:] ** 2))
    u = u[:, :k].reshape(lshape + [k])
    vh = vh[:k, :].reshape([k] + rshape)
    return SplitResult(u, s[:k], vh, discarded)


def truncation_rank(s: np.ndarray, max_rank: int | None = None, cutoff: float = 0.0) -> int:
    """Number of singular values to keep (``s`` sorted descending)."""
    k = len(s)
    if max_rank is not None:
        k = min(k, max_rank)
    if cutoff > 0 and k > 1:
        total = float(np.sum(s ** 2))
        # tail[j] = sum of s[j:]**2
        tail = np.cumsum((s ** 2)[::-1])[::-1]
        allowed = cutoff * total
        keep = k
        while keep > 1 and tail[keep - 1] <= allowed:
            keep -= 1
        k = keep
    return max(k, 1)


@dataclass
class LinearMap:
    """An operator given only through its action on vectors."""

    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]
    hermitian: bool = True
    dense: Callable[[], np.ndarray] | None = None

    def __call__(self, x):
        return self.apply(x)

    @classmethod
    def from_matrix(cls, m, hermitian=True):
        m = np.asarray(m)
        return cls(m.shape[0], lambda x: m @ x, hermitian, dense=lambda: m)

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return np.asarray(self.dense())
        eye = np.eye(self.dimension, dtype=DTYPE)
        return np.stack([self.apply(eye[:, i]) for i in range(self.dimension)], axis=1)

    def hermiticity_defect(self, rng=None) -> float:
        """Relative violation of <x, A y> = conj(<y, A x>) on random vectors."""
        rng = np.random.default_rng(0) if rng is None else rng
        n = self.dimension
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ax, ay = self.apply(x), self.apply(y)
        lhs = np.vdot(x, ay)
        rhs = np.conj(np.vdot(y, ax))
        scale = max(np.linalg.norm(ax) * np.linalg.norm(y), np.linalg.norm(ay) * np.linalg.norm(x), 1e-300)
        return float(abs(lhs - rhs) / scale)


def lowest_eigenpairs(op: LinearMap, guess: np.ndarray, k: int = 1, tol: float = 1e-10,
                      max_iter: int = 2000, krylov_dim: int = 40, dense_limit: int = DENSE_LIMIT):
    """The ``k`` algebraically smallest eigenpairs of a Hermitian operator.

    Small operators (dimension ``<= dense_limit``, and whose dense form is
    available or cheap) go through a full ``eigh``.  Otherwise a thick-restart
    Krylov-Ritz iteration is used: the search space grows by the residual of
    the lowest unconverged Ritz pair, and is compressed to its best Ritz
    vectors whenever it reaches ``krylov_dim``.

    Returns ``(values, vectors)`` with vectors as columns of unit norm.
    """
    n = op.dimension
    guess = np.asarray(guess, dtype=DTYPE).reshape(-1)
    if guess.shape[0] != n:
        raise ContractionShapeError(f"guess has length {guess.shape[0]}, operator dimension {n}")
    gnorm = np.linalg.norm(guess)
    if gnorm == 0:
        raise ValueError("initial guess must be nonzero")
    k = min(k, n)
    if n <= dense_limit and (op.dense is not None or n <= 64):
        m = op.to_dense()
        m = 0.5 * (m + m.conj().T)
        w, v = np.linalg.eigh(m)
        return w[:k].copy(), v[:, :k].copy()
    return _krylov_ritz(op, guess / gnorm, k, tol, max_iter, min(krylov_dim, n))


def _krylov_ritz(op, v0, k, tol, max_iter, mdim):
    n = v0.shape[0]
    mdim = max(mdim, k + 2) if n > k + 2 else n
    rng = np.random.default_rng(12345)
    basis = np.zeros((n, mdim), dtype=DTYPE)
    images = np.zeros((n, mdim), dtype=DTYPE)
    proj = np.zeros((mdim, mdim), dtype=DTYPE)
    m = 0
    x = v0
    matvecs = 0
    while True:
        # two rounds of Gram-Schmidt against the current basis
        for _ in range(2):
            if m:
                x = x - basis[:, :m] @ (basis[:, :m].conj().T @ x)
        nrm = np.linalg.norm(x)
        if nrm < 1e-12 and m < n:
            # invariant subspace reached; continue with a random direction
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            for _ in range(2):
                x = x - basis[:, :m] @ (basis[:, :m].conj().T @ x)
            nrm = np.linalg.norm(x)
        if nrm > 1e-12 and m < n:
            basis[:, m] = x / nrm
            images[:, m] = op.apply(basis[:, m])
            matvecs += 1
            col = basis[:, : m + 1].conj().T @ images[:, m]
            proj[: m + 1, m] = col
            proj[m, : m + 1] = col.conj()
            m += 1
        h = proj[:m, :m]
        theta, y = np.linalg.eigh(0.5 * (h + h.conj().T))
        nk = min(k, m)
        ritz = basis[:, :m] @ y[:, :nk]
        resid = images[:, :m] @ y[:, :nk] - ritz * theta[:nk]
        rnorms = np.linalg.norm(resid, axis=0)
        if (nk == k and np.all(rnorms <= tol)) or m >= n:
            return theta[:k].copy(), ritz / np.linalg.norm(ritz, axis=0)
        if matvecs >= max_iter:
            raise IterationLimitError(float(np.max(rnorms)), theta[:nk].copy(), ritz)
        j = int(np.argmax(rnorms > tol))
        x = resid[:, j]
        if m >= mdim:
            keep = min(max(k + 2, mdim // 3), m - 1)
            q, r = np.linalg.qr(basis[:, :m] @ y[:, :keep])
            basis[:, :keep] = q
            images[:, :keep] = np.linalg.solve(r.T, (images[:, :m] @ y[:, :keep]).T).T
            proj[:keep, :keep] = q.conj().T @ images[:, :keep]
            m = keep


def smallest_eigenpair(op: LinearMap, guess, tol: float = 1e-10, max_iter: int = 2000,
                       dense_limit: int = DENSE_LIMIT):
    """Lowest eigenvalue and unit eigenvector of a Hermitian ``LinearMap``."""
    w, v = lowest_eigenpairs(op, guess, 1, tol, max_iter, dense_limit=dense_limit)
    return float(w[0]), v[:, 0]
