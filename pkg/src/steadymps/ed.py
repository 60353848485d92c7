"""Dense exact-diagonalization reference for short chains.

The superoperator is assembled directly from Kronecker products of the
full-chain operators, in the ordering vec(rho)[s, r] = rho[s, r] where
``s`` and ``r`` run over the whole chain, and then permuted into the
site-interleaved basis used by the MPS code (site ``i`` carries the pair
index ``s_i * d + r_i``).  Nothing here goes through the MPO term compiler.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .superop import ModelSpec

MAX_SITES_LINDBLADIAN = 8
MAX_SITES_SPECTRUM = 6


class SizeCapError(ValueError):
    pass


def _embed(op, first_site, n, d):
    k = int(round(np.log(op.shape[0]) / np.log(d)))
    left = sps.identity(d ** first_site, dtype=complex, format="csr")
    right = sps.identity(d ** (n - first_site - k), dtype=complex, format="csr")
    return sps.kron(sps.kron(left, sps.csr_matrix(op)), right, format="csr")


def full_operator(terms, n, d=2):
    """Sparse full-chain operator of a sum of ``LocalTerm`` objects."""
    out = sps.csr_matrix((d ** n, d ** n), dtype=complex)
    for t in terms:
        out = out + _embed(t.coefficient * t.operator, t.sites[0], n, d)
    return out


def interleave_permutation(n, d=2):
    """perm[j] = block-ordered index of the j-th interleaved basis vector."""
    idx = np.arange(d ** (2 * n)).reshape((d,) * (2 * n))
    order = [x for i in range(n) for x in (i, n + i)]
    return idx.transpose(order).reshape(-1)


def rho_to_vec(rho, n, d=2):
    """Interleaved vectorization of a full-chain operator."""
    t = np.asarray(rho).reshape((d,) * (2 * n))
    order = [x for i in range(n) for x in (i, n + i)]
    return t.transpose(order).reshape(-1)


def vec_to_rho(vec, n, d=2):
    t = np.asarray(vec).reshape((d,) * (2 * n))
    inv = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return t.transpose(inv).reshape(d ** n, d ** n)


def dense_lindbladian(model: ModelSpec, interleaved: bool = True) -> np.ndarray:
    return sparse_lindbladian(model, interleaved).toarray()


def sparse_lindbladian(model: ModelSpec, interleaved: bool = True) -> sps.csr_matrix:
    n, d = model.n_sites, model.phys_dim
    if n > MAX_SITES_LINDBLADIAN:
        raise SizeCapError(f"exact Lindbladian limited to {MAX_SITES_LINDBLADIAN} sites, got {n}")
    dim = d ** n
    eye = sps.identity(dim, dtype=complex, format="csr")
    h = full_operator(model.hamiltonian_terms, n, d)
    sup = -1j * (sps.kron(h, eye) - sps.kron(eye, h.T))
    for jump in model.lindblad_ops:
        lop = full_operator(jump, n, d)
        ldl = lop.conj().T @ lop
        sup = sup + sps.kron(lop, lop.conj()) - 0.5 * sps.kron(ldl, eye) - 0.5 * sps.kron(eye, ldl.T)
    sup = sup.tocsr()
    if interleaved:
        perm = interleave_permutation(n, d)
        sup = sup[perm][:, perm]
    return sup.tocsr()


@dataclass
class DenseSteadyState:
    rho: np.ndarray | None
    degeneracy: int
    null_basis: list
    min_eigenvalue: float | None = None

    @property
    def degenerate(self) -> bool:
        return self.degeneracy > 1


def steady_state_dense(model: ModelSpec, threshold: float = 1e-9) -> DenseSteadyState:
    """Null space of the dense Lindbladian.

    For a one-dimensional null space the state is returned trace-normalized
    and hermitized; otherwise ``rho`` is None and the null basis (as
    matrices) is returned.
    """
    n, d = model.n_sites, model.phys_dim
    if n > MAX_SITES_SPECTRUM:
        raise SizeCapError(f"dense steady state limited to {MAX_SITES_SPECTRUM} sites, got {n}")
    lmat = dense_lindbladian(model)
    _, s, vh = np.linalg.svd(lmat)
    null = vh[s <= threshold].conj()
    basis = [vec_to_rho(v, n, d) for v in null]
    if len(basis) != 1:
        return DenseSteadyState(None, len(basis), basis)
    m = basis[0]
    m = m / np.trace(m)
    rho = 0.5 * (m + m.conj().T)
    wmin = float(np.linalg.eigvalsh(rho)[0])
    if wmin < -1e-9:
        raise ArithmeticError(f"steady state is not positive (min eigenvalue {wmin:.3e})")
    return DenseSteadyState(rho, 1, basis, wmin)


def steady_state_sparse(model: ModelSpec, residual_tol: float = 1e-9) -> np.ndarray:
    """Unique steady state by a sparse LU solve.

    One row of L is replaced by the trace functional, which fixes tr rho = 1.
    Does not detect degeneracy: if the null space is not one-dimensional the
    bordered system is singular and an ``ArithmeticError`` is raised.
    """
    n, d = model.n_sites, model.phys_dim
    full = sparse_lindbladian(model)
    tr = rho_to_vec(np.eye(d ** n), n, d)
    # the trace row is a left null vector of L, so any single row may be dropped
    lmat = sps.vstack([sps.csr_matrix(tr.reshape(1, -1)), full[1:]], format="csc")
    rhs = np.zeros(lmat.shape[0], dtype=complex)
    rhs[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            vec = spla.spsolve(lmat, rhs, permc_spec="MMD_AT_PLUS_A")  # far less fill-in than COLAMD here
        except spla.MatrixRankWarning:
            raise ArithmeticError("bordered Lindbladian is singular (degenerate steady state)") from None
    if not np.all(np.isfinite(vec)):
        raise ArithmeticError("bordered Lindbladian is singular")
    res = np.linalg.norm(full @ vec) / np.linalg.norm(vec)
    if res > residual_tol:
        raise ArithmeticError(f"steady-state residual {res:.2e} exceeds {residual_tol:.0e}")
    m = vec_to_rho(vec, n, d)
    return 0.5 * (m + m.conj().T)


def singular_values(model: ModelSpec) -> np.ndarray:
    """Singular values of the dense Lindbladian, ascending."""
    if model.n_sites > MAX_SITES_SPECTRUM:
        raise SizeCapError(f"dense spectrum limited to {MAX_SITES_SPECTRUM} sites")
    return np.sort(np.linalg.svd(dense_lindbladian(model), compute_uv=False))


def ldagl_spectrum(model: ModelSpec) -> np.ndarray:
    """Eigenvalues of the dense L^+ L, ascending."""
    if model.n_sites > MAX_SITES_SPECTRUM:
        raise SizeCapError(f"dense spectrum limited to {MAX_SITES_SPECTRUM} sites")
    lmat = dense_lindbladian(model)
    return np.linalg.eigvalsh(lmat.conj().T @ lmat)


def gap_ldagl(model: ModelSpec, threshold: float = 1e-9):
    """(smallest eigenvalue of L^+ L above the null cluster, null dimension)."""
    w = ldagl_spectrum(model)
    null_dim = int(np.sum(w <= threshold))
    gap = float(w[null_dim]) if null_dim < len(w) else float("nan")
    return gap, null_dim


def expect_dense(rho, ops: dict, n, d=2) -> complex:
    """tr(rho * prod_i ops[i]) for single-site operators keyed by site."""
    full = np.array([[1.0]], dtype=complex)
    for i in range(n):
        full = np.kron(full, ops.get(i, np.eye(d)))
    return complex(np.trace(rho @ full))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 of two density matrices."""
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    m = sq @ (0.5 * (sigma + sigma.conj().T)) @ sq
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)
