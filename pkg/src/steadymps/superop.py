"""Compile Lindblad models into superoperator MPOs.

With the local ordering ``|s><r| -> s*d + r`` the map ``rho -> A rho B``
becomes ``A (x) B^T`` on each site, and every block of the vectorized
Lindbladian

    L = -i (H (x) 1 - 1 (x) H^T)
        + sum_a [ L_a (x) conj(L_a) - 1/2 L_a^+ L_a (x) 1 - 1/2 1 (x) (L_a^+ L_a)^T ]

is produced from that one rule by :func:`sandwich_superop`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mps import SuperMpo
from .tensor import DTYPE

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=DTYPE)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=DTYPE)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=DTYPE)
# basis (|up>, |down>); sigma^+ = |up><down|
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=DTYPE)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=DTYPE)
IDENTITY = np.eye(2, dtype=DTYPE)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


class UnsupportedTermError(ValueError):
    pass


@dataclass(frozen=True)
class LocalTerm:
    """``coefficient * operator`` acting on one site or two adjacent sites.

    Two-site operators are ``(d*d, d*d)`` matrices with the left site as
    the more significant index.
    """

    sites: tuple
    operator: np.ndarray
    coefficient: complex = 1.0

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if len(sites) not in (1, 2):
            raise UnsupportedTermError(f"terms act on one or two sites, got {sites}")
        if len(sites) == 2 and sites[1] != sites[0] + 1:
            raise UnsupportedTermError(f"two-site term on non-adjacent sites {sites}")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "operator", np.asarray(self.operator, dtype=DTYPE))

    @property
    def matrix(self) -> np.ndarray:
        return self.coefficient * self.operator

    @classmethod
    def product(cls, site, ops, coefficient=1.0):
        """Term ``coefficient * ops[0] (x) ops[1] ...`` starting at ``site``."""
        op = ops[0]
        for o in ops[1:]:
            op = np.kron(op, o)
        return cls(tuple(range(site, site + len(ops))), op, coefficient)


@dataclass
class ModelSpec:
    """Hamiltonian and jump operators given as sums of local terms.

    Each entry of ``lindblad_ops`` is one jump operator, written as the sum
    of its local pieces.
    """

    n_sites: int
    hamiltonian_terms: list
    lindblad_ops: list
    phys_dim: int = 2
    params: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.params.get("model", "custom")


def support_matrix(terms: Sequence[LocalTerm], d: int):
    """Sum a list of terms into one dense operator on their joint support."""
    sites = sorted({s for t in terms for s in t.sites})
    if not sites:
        raise UnsupportedTermError("empty operator")
    if sites[-1] - sites[0] >= 2:
        raise UnsupportedTermError(f"operator spans sites {sites}, at most two adjacent allowed")
    if len(sites) == 2 and sites[1] != sites[0] + 1:
        raise UnsupportedTermError(f"operator spans non-adjacent sites {sites}")
    out = np.zeros((d ** len(sites),) * 2, dtype=DTYPE)
    for t in terms:
        m = t.matrix
        if len(sites) == 2 and len(t.sites) == 1:
            m = np.kron(m, np.eye(d)) if t.sites[0] == sites[0] else np.kron(np.eye(d), m)
        out += m
    return tuple(sites), out


def sandwich_superop(a: np.ndarray, b: np.ndarray, nsites: int, d: int) -> np.ndarray:
    """Superoperator of ``rho -> a rho b`` on ``nsites`` sites, local index ``s*d + r``."""
    k = nsites
    a4 = a.reshape((d,) * (2 * k))  # (s_1..s_k, s'_1..s'_k)
    bt = b.T.reshape((d,) * (2 * k))  # (r_1..r_k, r'_1..r'_k)
    full = np.multiply.outer(a4, bt)  # (s, s', r, r')
    # order -> (s_1 r_1 ... s_k r_k, s'_1 r'_1 ... )
    out_axes = [x for j in range(k) for x in (j, 2 * k + j)]
    in_axes = [x for j in range(k) for x in (k + j, 3 * k + j)]
    full = full.transpose(out_axes + in_axes)
    return full.reshape(d ** (2 * k), d ** (2 * k))


def lindbladian_terms(model: ModelSpec) -> list[LocalTerm]:
    """Local superoperator terms (local dimension d**2) of the vectorized Lindbladian."""
    d = model.phys_dim
    out = []
    for t in model.hamiltonian_terms:
        k = len(t.sites)
        eye = np.eye(d ** k, dtype=DTYPE)
        h = t.matrix
        out.append(LocalTerm(t.sites, sandwich_superop(h, eye, k, d), -1j))
        out.append(LocalTerm(t.sites, sandwich_superop(eye, h, k, d), 1j))
    for jump in model.lindblad_ops:
        sites, lop = support_matrix(jump, d)
        k = len(sites)
        eye = np.eye(d ** k, dtype=DTYPE)
        ldl = lop.conj().T @ lop
        out.append(LocalTerm(sites, sandwich_superop(lop, lop.conj().T, k, d), 1.0))
        out.append(LocalTerm(sites, sandwich_superop(ldl, eye, k, d), -0.5))
        out.append(LocalTerm(sites, sandwich_superop(eye, ldl, k, d), -0.5))
    return out


def terms_to_mpo(terms: Sequence[LocalTerm], n: int, local_dim: int, tol: float = 1e-14) -> SuperMpo:
    """Finite-automaton MPO of a sum of one- and two-site terms.

    Automaton states per bond: 0 = nothing placed yet, 1 = term completed,
    2.. = a two-site term has placed its left factor.  The pending channels
    on each bond come from an operator-Schmidt decomposition of the summed
    two-site terms there, so the bond is ``2 + rank``.
    """
    p = local_dim
    onsite = [np.zeros((p, p), dtype=DTYPE) for _ in range(n)]
    pair = [np.zeros((p * p, p * p), dtype=DTYPE) for _ in range(max(n - 1, 0))]
    for t in terms:
        if any(s < 0 or s >= n for s in t.sites):
            raise UnsupportedTermError(f"term on sites {t.sites} outside chain of {n}")
        if len(t.sites) == 1:
            onsite[t.sites[0]] += t.matrix
        else:
            pair[t.sites[0]] += t.matrix
    # channels[i] = (left factors, right factors) for bond (i, i+1)
    channels = []
    for m in pair:
        x = m.reshape(p, p, p, p).transpose(0, 2, 1, 3).reshape(p * p, p * p)
        u, s, vh = np.linalg.svd(x)
        smax = s[0] if len(s) else 0.0
        r = int(np.sum(s > tol * max(smax, 1.0))) if smax > 0 else 0
        left = [(u[:, j] * s[j]).reshape(p, p) for j in range(r)]
        right = [vh[j].reshape(p, p) for j in range(r)]
        channels.append((left, right))
    if n == 1:
        return SuperMpo([onsite[0].reshape(1, p, p, 1)])
    eye = np.eye(p, dtype=DTYPE)
    tensors = []
    for i in range(n):
        rl = len(channels[i - 1][1]) if i > 0 else 0
        rr = len(channels[i][0]) if i < n - 1 else 0
        w = np.zeros((2 + rl, p, p, 2 + rr), dtype=DTYPE)
        w[0, :, :, 0] = eye
        w[1, :, :, 1] = eye
        w[0, :, :, 1] = onsite[i]
        for j in range(rr):
            w[0, :, :, 2 + j] = channels[i][0][j]
        for j in range(rl):
            w[2 + j, :, :, 1] = channels[i - 1][1][j]
        if i == 0:
            w = w[:1]
        if i == n - 1:
            w = w[..., 1:2]
        tensors.append(w)
    return SuperMpo(tensors)


def build_lindbladian(model: ModelSpec) -> SuperMpo:
    return terms_to_mpo(lindbladian_terms(model), model.n_sites, model.phys_dim ** 2)


def mpo_product(a: SuperMpo, b: SuperMpo) -> SuperMpo:
    """MPO of the composition ``a . b`` (b acts first)."""
    if a.n_sites != b.n_sites or a.local_dim != b.local_dim:
        raise ValueError("MPOs differ in length or local dimension")
    ts = []
    for x, y in zip(a.tensors, b.tensors):
        t = np.tensordot(x, y, axes=(2, 1))  # (al, o, ar, bl, i, br)
        al, o, ar, bl, i, br = t.shape
        ts.append(t.transpose(0, 3, 1, 4, 2, 5).reshape(al * bl, o, i, ar * br))
    return SuperMpo(ts)


def adjoint(a: SuperMpo) -> SuperMpo:
    return SuperMpo([t.transpose(0, 2, 1, 3).conj() for t in a.tensors])


def compress_mpo(a: SuperMpo, tol: float = 1e-13) -> SuperMpo:
    """Remove redundant bond directions, dropping singular values below
    ``tol`` relative to the largest one on each bond."""
    n = a.n_sites
    ts = [t.copy() for t in a.tensors]
    for i in range(n - 1):
        wl, o, ii, wr = ts[i].shape
        q, r = np.linalg.qr(ts[i].reshape(wl * o * ii, wr))
        ts[i] = q.reshape(wl, o, ii, q.shape[1])
        ts[i + 1] = np.tensordot(r, ts[i + 1], axes=(1, 0))
    for i in range(n - 1, 0, -1):
        wl, o, ii, wr = ts[i].shape
        u, s, vh = np.linalg.svd(ts[i].reshape(wl, o * ii * wr), full_matrices=False)
        k = max(1, int(np.sum(s > tol * s[0]))) if s[0] > 0 else 1
        ts[i] = vh[:k].reshape(k, o, ii, wr)
        ts[i - 1] = np.tensordot(ts[i - 1], u[:, :k] * s[:k], axes=(3, 0))
    return SuperMpo(ts)


def build_ldagl(model: ModelSpec, compress: bool = True) -> SuperMpo:
    """MPO of the Hermitian product L^+ L for ``model``."""
    lmpo = build_lindbladian(model)
    out = mpo_product(adjoint(lmpo), lmpo)
    return compress_mpo(out) if compress else out


def local_operator_mpo(n: int, ops: dict, d: int = 2) -> SuperMpo:
    """Bond-1 superoperator MPO of ``rho -> (prod_i ops[i]) rho``."""
    eye = np.eye(d, dtype=DTYPE)
    locs = [sandwich_superop(ops.get(i, eye), eye, 1, d) for i in range(n)]
    return SuperMpo.product(locs)
