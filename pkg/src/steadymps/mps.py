"""Matrix product states over the doubled (vectorized-operator) local space,
and matrix product operators acting on them.

A density operator on a chain of ``n`` spins of dimension ``d`` is stored as
an MPS with local dimension ``d**2``.  The local index of the ket/bra pair
``|s><r|`` is ``s * d + r``.  Site tensors have axes ``(left, phys, right)``;
MPO tensors ``(left, out, in, right)``.  Boundary bonds have extent 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import DTYPE, ContractionShapeError, as_tensor, svd_split

FORMAT_VERSION = 1


def _check_chain(tensors, nlegs):
    if not tensors:
        raise ValueError("a chain needs at least one site")
    for t in tensors:
        if t.ndim != nlegs:
            raise ValueError(f"site tensor has {t.ndim} axes, expected {nlegs}")
    if tensors[0].shape[0] != 1 or tensors[-1].shape[-1] != 1:
        raise ValueError("boundary bonds must have extent 1")
    for a, b in zip(tensors[:-1], tensors[1:]):
        if a.shape[-1] != b.shape[0]:
            raise ValueError(f"bond mismatch {a.shape[-1]} != {b.shape[0]}")


@dataclass(frozen=True)
class VectorizedMps:
    tensors: tuple
    gauge_center: int | None = None

    def __post_init__(self):
        ts = tuple(as_tensor(t) for t in self.tensors)
        _check_chain(ts, 3)
        object.__setattr__(self, "tensors", ts)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dim(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def phys_dim(self) -> int:
        return int(round(np.sqrt(self.local_dim)))

    @property
    def bonds(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bonds, default=1)

    def __mul__(self, c):
        ts = list(self.tensors)
        i = self.gauge_center if self.gauge_center is not None else 0
        ts[i] = ts[i] * c
        return VectorizedMps(ts, self.gauge_center)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def to_dense(self) -> np.ndarray:
        """Full vector of length ``local_dim ** n_sites`` (site 0 most significant)."""
        out = self.tensors[0][0]
        for t in self.tensors[1:]:
            out = np.tensordot(out, t, axes=(-1, 0))
            out = out.reshape(-1, t.shape[2])
        return out[:, 0]

    def norm(self) -> float:
        # QR sweep to site 0: orthogonal steps keep small norms accurate
        return float(np.linalg.norm(canonicalize(self, 0).tensors[0]))

    @classmethod
    def product(cls, local_vectors):
        return cls([np.asarray(v, dtype=DTYPE).reshape(1, -1, 1) for v in local_vectors])

    @classmethod
    def from_dense(cls, vec, n_sites, local_dim, max_bond=None, cutoff=0.0):
        """Exact (or truncated) MPS of a dense vector by sequential SVDs."""
        rest = np.asarray(vec, dtype=DTYPE).reshape(1, -1)
        tensors = []
        for _ in range(n_sites - 1):
            dl = rest.shape[0]
            rest = rest.reshape(dl, local_dim, -1)
            sp = svd_split(rest, [0, 1], max_bond, cutoff)
            tensors.append(sp.u)
            rest = sp.s[:, None] * sp.v
        tensors.append(rest.reshape(rest.shape[0], local_dim, 1))
        return cls(tensors, gauge_center=n_sites - 1)

    @classmethod
    def random(cls, n_sites, local_dim, bond, rng):
        dims = _capped_bonds(n_sites, local_dim, bond)
        ts = []
        for i in range(n_sites):
            shape = (dims[i], local_dim, dims[i + 1])
            ts.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        return cls(ts)


def exact_bonds(n_sites, local_dim) -> list[int]:
    """Largest bond extents any state on the chain can need."""
    return [min(local_dim ** i, local_dim ** (n_sites - i)) for i in range(1, n_sites)]


def _capped_bonds(n_sites, local_dim, bond):
    """Bond extents (including both boundaries) capped by the exact maximum."""
    dims = [1]
    for i in range(1, n_sites):
        cap = min(local_dim ** i, local_dim ** (n_sites - i))
        dims.append(int(min(bond, cap)))
    dims.append(1)
    return dims


@dataclass(frozen=True)
class SuperMpo:
    tensors: tuple

    def __post_init__(self):
        ts = tuple(as_tensor(t) for t in self.tensors)
        _check_chain(ts, 4)
        object.__setattr__(self, "tensors", ts)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dim(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def bonds(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bonds, default=1)

    def to_dense(self) -> np.ndarray:
        """Dense matrix in the same basis as ``VectorizedMps.to_dense``."""
        out = self.tensors[0][0]  # (out, in, right)
        for t in self.tensors[1:]:
            x = np.tensordot(out, t, axes=(-1, 0))  # (O, I, o, i, r)
            no, ni, o, i, r = x.shape
            out = x.transpose(0, 2, 1, 3, 4).reshape(no * o, ni * i, r)
        return out[:, :, 0]

    @classmethod
    def identity(cls, n_sites, local_dim):
        eye = np.eye(local_dim, dtype=DTYPE).reshape(1, local_dim, local_dim, 1)
        return cls([eye] * n_sites)

    @classmethod
    def product(cls, local_ops):
        return cls([np.asarray(o, dtype=DTYPE).reshape(1, *np.shape(o), 1) for o in local_ops])


def _check_pair(a, b):
    if a.n_sites != b.n_sites or a.local_dim != b.local_dim:
        raise ContractionShapeError(
            f"chains differ: {a.n_sites} sites / dim {a.local_dim} vs {b.n_sites} / {b.local_dim}"
        )


def _left_orth(t):
    dl, p, dr = t.shape
    q, r = np.linalg.qr(t.reshape(dl * p, dr))
    return q.reshape(dl, p, q.shape[1]), r


def _right_orth(t):
    dl, p, dr = t.shape
    q, r = np.linalg.qr(t.reshape(dl, p * dr).T)
    return q.T.reshape(q.shape[1], p, dr), r.T


def canonicalize(psi: VectorizedMps, center: int) -> VectorizedMps:
    """Mixed-canonical form with the orthogonality center at ``center``."""
    n = psi.n_sites
    if not 0 <= center < n:
        raise IndexError(f"center {center} outside chain of {n} sites")
    ts = list(psi.tensors)
    for i in range(center):
        q, r = _left_orth(ts[i])
        ts[i] = q
        ts[i + 1] = np.tensordot(r, ts[i + 1], axes=(1, 0))
    for i in range(n - 1, center, -1):
        q, r = _right_orth(ts[i])
        ts[i] = q
        ts[i - 1] = np.tensordot(ts[i - 1], r, axes=(2, 0))
    return VectorizedMps(ts, center)


def normalized(psi: VectorizedMps) -> VectorizedMps:
    """Unit Euclidean norm, canonical at the existing center (or 0)."""
    c = psi.gauge_center if psi.gauge_center is not None else 0
    psi = canonicalize(psi, c)
    ts = list(psi.tensors)
    ts[c] = ts[c] / np.linalg.norm(ts[c])
    return VectorizedMps(ts, c)


def is_canonical(psi: VectorizedMps, atol=1e-12) -> bool:
    c = psi.gauge_center
    if c is None:
        return False
    for i, t in enumerate(psi.tensors):
        if i < c:
            g = np.tensordot(t.conj(), t, axes=([0, 1], [0, 1]))
        elif i > c:
            g = np.tensordot(t.conj(), t, axes=([1, 2], [1, 2]))
        else:
            continue
        if not np.allclose(g, np.eye(g.shape[0]), atol=atol):
            return False
    return True


def overlap(a: VectorizedMps, b: VectorizedMps) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _check_pair(a, b)
    env = np.ones((1, 1), dtype=DTYPE)
    for x, y in zip(a.tensors, b.tensors):
        env = np.tensordot(env, x.conj(), axes=(0, 0))  # (b, p, a')
        env = np.tensordot(env, y, axes=([0, 1], [0, 1]))  # (a', b')
    return complex(env[0, 0])


def apply_mpo(o: SuperMpo, psi: VectorizedMps) -> VectorizedMps:
    _check_pair(o, psi)
    ts = []
    for w, a in zip(o.tensors, psi.tensors):
        t = np.tensordot(w, a, axes=(2, 1))  # (wl, out, wr, al, ar)
        wl, p, wr, al, ar = t.shape
        ts.append(t.transpose(0, 3, 1, 2, 4).reshape(wl * al, p, wr * ar))
    return VectorizedMps(ts)


def expectation(psi: VectorizedMps, o: SuperMpo) -> complex:
    """<psi|O|psi> by a single left-to-right transfer pass."""
    return sandwich(psi, o, psi)


def sandwich(bra: VectorizedMps, o: SuperMpo, ket: VectorizedMps) -> complex:
    _check_pair(bra, o)
    _check_pair(o, ket)
    env = np.ones((1, 1, 1), dtype=DTYPE)
    for x, w, y in zip(bra.tensors, o.tensors, ket.tensors):
        env = left_env_step(env, x, w, y)
    return complex(env[0, 0, 0])


def left_env_step(env, bra_t, w, ket_t):
    """Extend a left environment (bra, mpo, ket) by one site."""
    t = np.tensordot(env, ket_t, axes=(2, 0))  # (b, w, p, k)
    t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # (b, k, out, w')
    t = np.tensordot(bra_t.conj(), t, axes=([0, 1], [0, 2]))  # (b', k, w')
    return t.transpose(0, 2, 1)


def right_env_step(env, bra_t, w, ket_t):
    """Extend a right environment (bra, mpo, ket) by one site."""
    t = np.tensordot(ket_t, env, axes=(2, 2))  # (k, p, b, w)
    t = np.tensordot(w, t, axes=([2, 3], [1, 3]))  # (w', out, k, b)
    t = np.tensordot(bra_t.conj(), t, axes=([1, 2], [1, 3]))  # (b', w', k)
    return t


def compress(psi: VectorizedMps, max_bond: int, cutoff: float = 0.0):
    """Truncate all bonds to ``max_bond``.

    The state is left-canonicalized, then truncated in a right-to-left SVD
    sweep.  Returns ``(state, discarded_weight)`` with the discarded weight
    accumulated relative to the state's squared norm.
    """
    n = psi.n_sites
    psi = canonicalize(psi, n - 1)
    norm2 = np.linalg.norm(psi.tensors[-1]) ** 2
    ts = list(psi.tensors)
    discarded = 0.0
    for i in range(n - 1, 0, -1):
        sp = svd_split(ts[i], [0], max_bond, cutoff)
        discarded += sp.discarded_weight
        ts[i] = sp.v
        ts[i - 1] = np.tensordot(ts[i - 1], sp.u * sp.s, axes=(2, 0))
    rel = discarded / norm2 if norm2 > 0 else 0.0
    return VectorizedMps(ts, 0), float(rel)


def add(a: VectorizedMps, b: VectorizedMps, ca=1.0, cb=1.0) -> VectorizedMps:
    """ca*a + cb*b with block-diagonal bond structure."""
    _check_pair(a, b)
    n = a.n_sites
    if n == 1:
        return VectorizedMps([ca * a.tensors[0] + cb * b.tensors[0]])
    ts = []
    for i, (x, y) in enumerate(zip(a.tensors, b.tensors)):
        if i == 0:
            t = np.concatenate([ca * x, cb * y], axis=2)
        elif i == n - 1:
            t = np.concatenate([x, y], axis=0)
        else:
            t = np.zeros((x.shape[0] + y.shape[0], x.shape[1], x.shape[2] + y.shape[2]), dtype=DTYPE)
            t[: x.shape[0], :, : x.shape[2]] = x
            t[x.shape[0]:, :, x.shape[2]:] = y
        ts.append(t)
    return VectorizedMps(ts)


def operator_adjoint(psi: VectorizedMps) -> VectorizedMps:
    """The vectorization of rho^dagger given that of rho."""
    d = psi.phys_dim
    ts = []
    for t in psi.tensors:
        dl, p, dr = t.shape
        ts.append(t.reshape(dl, d, d, dr).transpose(0, 2, 1, 3).reshape(dl, p, dr).conj())
    return VectorizedMps(ts, psi.gauge_center)


def trace_vector(n: int, d: int = 2) -> VectorizedMps:
    """|Phi(1)> = sum_s |s...s>|s...s>, a bond-1 MPS."""
    if n < 1:
        raise ValueError("need at least one site")
    site = np.eye(d, dtype=DTYPE).reshape(1, d * d, 1)
    return VectorizedMps([site] * n)


def vectorize_product(local_ops) -> VectorizedMps:
    """Bond-1 MPS of the operator tensor product of ``local_ops``."""
    return VectorizedMps.product([np.asarray(o, dtype=DTYPE).reshape(-1) for o in local_ops])


def pad_bonds(psi: VectorizedMps, bond: int, rng, noise=1e-8) -> VectorizedMps:
    """Enlarge every bond to ``bond`` (capped by the exact maximum).

    New entries are filled with random noise of relative magnitude ``noise``
    with respect to the largest entry of each tensor.
    """
    n = psi.n_sites
    dims = _capped_bonds(n, psi.local_dim, bond)
    ts = []
    for i, t in enumerate(psi.tensors):
        dl, p, dr = t.shape
        nl, nr = max(dims[i], dl), max(dims[i + 1], dr)
        if (nl, nr) == (dl, dr):
            ts.append(t)
            continue
        scale = noise * max(np.max(np.abs(t)), 1e-300)
        new = scale * (rng.standard_normal((nl, p, nr)) + 1j * rng.standard_normal((nl, p, nr)))
        new[:dl, :, :dr] = t
        ts.append(new)
    return VectorizedMps(ts)


def save_mps(path, psi: VectorizedMps):
    _save_chain(path, "VectorizedMps", psi.tensors, {"gauge_center": psi.gauge_center})


def load_mps(path) -> VectorizedMps:
    kind, tensors, meta = _load_chain(path)
    if kind != "VectorizedMps":
        raise ValueError(f"{path} holds a {kind}, not a VectorizedMps")
    return VectorizedMps(tensors, meta.get("gauge_center"))


def save_mpo(path, o: SuperMpo):
    _save_chain(path, "SuperMpo", o.tensors, {})


def load_mpo(path) -> SuperMpo:
    kind, tensors, _ = _load_chain(path)
    if kind != "SuperMpo":
        raise ValueError(f"{path} holds a {kind}, not a SuperMpo")
    return SuperMpo(tensors)


def _save_chain(path, kind, tensors, meta):
    header = {
        "format": "steadymps-chain",
        "version": FORMAT_VERSION,
        "kind": kind,
        "n_sites": len(tensors),
        "dims": [list(t.shape) for t in tensors],
        "dtype": "complex128",
        "layout": "row-major",
        **meta,
    }
    arrays = {f"site_{i:04d}": np.ascontiguousarray(t) for i, t in enumerate(tensors)}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
                 **arrays)


def _load_chain(path):
    with np.load(Path(path)) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format") != "steadymps-chain":
            raise ValueError(f"{path} is not a steadymps chain file")
        if header["version"] > FORMAT_VERSION:
            raise ValueError(f"unsupported format version {header['version']}")
        tensors = [data[f"site_{i:04d}"] for i in range(header["n_sites"])]
    for t, dims in zip(tensors, header["dims"]):
        if list(t.shape) != dims:
            raise ValueError("stored tensor dims disagree with header")
    return header["kind"], tensors, header
