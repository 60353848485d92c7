"""Expectation values on vectorized density operators.

All functions take the MPS of a trace-normalized, Hermitian state (the
output of ``solver.normalize_and_hermitize``).  Expectation values are
traces ``tr(rho X_i Y_j ...)`` evaluated with per-site transfer matrices
``sum_{s,s'} X[s, s'] A[:, s' d + s, :]``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .mps import VectorizedMps, overlap
from .superop import PAULI


@dataclass
class ObservableRecord:
    name: str
    value: float
    n_sites: int
    bond_dim: int
    sites: tuple = ()
    normalization: str = ""
    params: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return asdict(self)


def _transfer(t: np.ndarray, op: np.ndarray | None, d: int) -> np.ndarray:
    a4 = t.reshape(t.shape[0], d, d, t.shape[2])
    if op is None:
        return np.einsum("ljjr->lr", a4)
    return np.einsum("ij,ljir->lr", op, a4)


class _TraceChain:
    """Cached left/right products of the identity transfer matrices."""

    def __init__(self, rho: VectorizedMps):
        self.rho = rho
        self.n = rho.n_sites
        self.d = rho.phys_dim
        self.eye = [_transfer(t, None, self.d) for t in rho.tensors]
        left = [np.ones((1,), dtype=complex)]
        for m in self.eye:
            left.append(left[-1] @ m)
        right = [np.ones((1,), dtype=complex)]
        for m in reversed(self.eye):
            right.append(m @ right[-1])
        self.left = left
        self.right = right[::-1]

    def trace(self) -> complex:
        return complex(self.left[-1][0])

    def site_op(self, i, op):
        return _transfer(self.rho.tensors[i], op, self.d)

    def one_point(self, i, op) -> complex:
        return complex(self.left[i] @ self.site_op(i, op) @ self.right[i + 1])

    def two_point_row(self, i, op_i, op_j) -> np.ndarray:
        """<op_i op_j> for all j > i in one left-to-right pass."""
        out = np.zeros(self.n, dtype=complex)
        env = self.left[i] @ self.site_op(i, op_i)
        for j in range(i + 1, self.n):
            out[j] = env @ self.site_op(j, op_j) @ self.right[j + 1]
            env = env @ self.eye[j]
        return out


def _check_site(rho, site):
    if not 0 <= site < rho.n_sites:
        raise IndexError(f"site {site} outside chain of {rho.n_sites}")


def local_pauli(rho: VectorizedMps, site: int, axis: str) -> float:
    _check_site(rho, site)
    return float(_TraceChain(rho).one_point(site, PAULI[axis]).real)


def polarizations(rho: VectorizedMps) -> np.ndarray:
    """Array of shape (3, N): rows are <sigma^x_n>, <sigma^y_n>, <sigma^z_n>."""
    ch = _TraceChain(rho)
    return np.array([[ch.one_point(i, PAULI[a]).real for i in range(ch.n)] for a in "xyz"])


def correlation_table(rho: VectorizedMps, axis: str) -> np.ndarray:
    """Symmetric table C[i, j] = <sigma^a_i sigma^a_j>, with C[i, i] = tr(rho)."""
    ch = _TraceChain(rho)
    op = PAULI[axis]
    c = np.zeros((ch.n, ch.n))
    for i in range(ch.n):
        row = ch.two_point_row(i, op, op).real
        c[i, i + 1:] = row[i + 1:]
    c = c + c.T
    np.fill_diagonal(c, ch.trace().real)
    return c


def staggered_mz_sq(rho: VectorizedMps) -> float:
    """<M_z^2> with M_z = sum_i (-1)^i sigma^z_i / N."""
    n = rho.n_sites
    c = correlation_table(rho, "z")
    sign = (-1.0) ** np.arange(n)
    return float(sign @ c @ sign) / n ** 2


def collective_spin_sq(rho: VectorizedMps, axis: str, normalization: str = "per-site") -> float:
    """<(sum_i sigma^a_i)^2>, divided by N^2 for ``normalization='per-site'``."""
    total = float(np.sum(correlation_table(rho, axis)))
    if normalization == "per-site":
        return total / rho.n_sites ** 2
    if normalization == "total":
        return total
    raise ValueError(f"normalization must be 'per-site' or 'total', got {normalization!r}")


def connected_zz(rho: VectorizedMps, ref_site: int, distance: int) -> float:
    j = ref_site + distance
    _check_site(rho, ref_site)
    _check_site(rho, j)
    ch = _TraceChain(rho)
    z = PAULI["z"]
    zi = ch.one_point(ref_site, z).real
    zj = ch.one_point(j, z).real
    if distance == 0:
        zz = ch.trace().real
    else:
        lo, hi = sorted((ref_site, j))
        zz = ch.two_point_row(lo, z, z)[hi].real
    return float(zz - zi * zj)


def purity(rho: VectorizedMps) -> float:
    """tr(rho^2) as the squared Euclidean norm of the vectorization."""
    return float(overlap(rho, rho).real)


# scalar observables whose convergence in D is tracked, per model
TRACKED = {
    "ising-local": {"mz2_staggered": staggered_mz_sq},
    "dicke": {"sy2_per_site": lambda r: collective_spin_sq(r, "y", "per-site")},
    "ising-coherent": {"sz2_per_site": lambda r: collective_spin_sq(r, "z", "per-site")},
}


def model_observables(rho: VectorizedMps, model_name: str) -> dict:
    out = {"purity": purity(rho)}
    for name, fn in TRACKED.get(model_name, {}).items():
        out[name] = fn(rho)
    return out


def summary(rho: VectorizedMps, params: dict | None = None) -> list[ObservableRecord]:
    """Standard set of records for CSV output."""
    n, dmax = rho.n_sites, rho.max_bond
    p = dict(params or {})
    recs = [
        ObservableRecord("purity", purity(rho), n, dmax, params=p),
        ObservableRecord("mz2_staggered", staggered_mz_sq(rho), n, dmax, params=p),
    ]
    for a in "xyz":
        recs.append(ObservableRecord(f"s{a}2", collective_spin_sq(rho, a, "per-site"), n, dmax,
                                     normalization="per-site", params=p))
        recs.append(ObservableRecord(f"s{a}2_total", collective_spin_sq(rho, a, "total"), n, dmax,
                                     normalization="total", params=p))
    pol = polarizations(rho)
    for k, a in enumerate("xyz"):
        recs.append(ObservableRecord(f"mean_s{a}", float(np.mean(pol[k])), n, dmax, params=p))
    return recs
