import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steadymps.ed import dense_lindbladian, rho_to_vec, vec_to_rho
from steadymps.models import IsingLocalParams, ising_local
from steadymps.mps import (
    SuperMpo,
    VectorizedMps,
    add,
    apply_mpo,
    canonicalize,
    compress,
    expectation,
    is_canonical,
    load_mpo,
    load_mps,
    normalized,
    operator_adjoint,
    overlap,
    pad_bonds,
    save_mpo,
    save_mps,
    trace_vector,
    vectorize_product,
)
from steadymps.superop import (
    IDENTITY,
    SIGMA_PLUS,
    SIGMA_Z,
    adjoint,
    build_lindbladian,
    build_ldagl,
    local_operator_mpo,
    mpo_product,
)

from conftest import dense_rho

UP = np.array([[1, 0], [0, 0]], dtype=complex)
DOWN = np.array([[0, 0], [0, 1]], dtype=complex)


def test_chain_shapes(rng):
    psi = VectorizedMps.random(6, 4, 4, rng)
    assert psi.bonds == [4, 4, 4, 4, 4]
    assert psi.tensors[0].shape[0] == 1 and psi.tensors[-1].shape[2] == 1
    # bonds are capped by the exact dimension near the edges
    assert VectorizedMps.random(4, 4, 64, rng).bonds == [4, 16, 4]
    with pytest.raises(ValueError):
        VectorizedMps([np.zeros((1, 4, 2)), np.zeros((3, 4, 1))])


def test_canonicalize_product_state_is_phase_only(rng):
    psi = vectorize_product([UP, DOWN, IDENTITY / 2])
    for c in range(3):
        out = canonicalize(psi, c)
        for a, b in zip(psi.tensors, out.tensors):
            na, nb = a.reshape(-1), b.reshape(-1)
            assert abs(abs(np.vdot(na, nb)) - np.linalg.norm(na) * np.linalg.norm(nb)) < 1e-12


def test_canonicalize_preserves_vector(rng):
    psi = VectorizedMps.random(6, 4, 4, rng)
    c = canonicalize(psi, 3)
    assert c.gauge_center == 3 and is_canonical(c)
    n2 = overlap(psi, psi).real
    assert abs(overlap(psi, c) - n2) <= 1e-10 * n2
    assert np.allclose(c.to_dense(), psi.to_dense())
    twice = canonicalize(c, 3)
    for a, b in zip(c.tensors, twice.tensors):
        assert np.allclose(np.abs(a), np.abs(b), atol=1e-12)


def test_overlap_basics(rng):
    psi = normalized(VectorizedMps.random(5, 4, 3, rng))
    assert overlap(psi, psi) == pytest.approx(1.0)
    assert overlap(vectorize_product([UP] * 3), vectorize_product([DOWN] + [UP] * 2)) == 0
    a, b = VectorizedMps.random(5, 4, 3, rng), VectorizedMps.random(5, 4, 2, rng)
    assert abs(overlap(a, b) - np.vdot(a.to_dense(), b.to_dense())) < 1e-12 * a.norm() * b.norm()


def test_norm_matches_dense(rng):
    a = VectorizedMps.random(4, 4, 5, rng) * 1e-9
    assert a.norm() == pytest.approx(np.linalg.norm(a.to_dense()), rel=1e-12)


def test_apply_identity_and_diagonal(rng):
    psi = VectorizedMps.random(4, 4, 3, rng)
    out = apply_mpo(SuperMpo.identity(4, 4), psi)
    assert abs(overlap(out, psi)) == pytest.approx(psi.norm() ** 2)
    basis = vectorize_product([UP, DOWN, UP])
    zl = local_operator_mpo(3, {1: SIGMA_Z})  # rho -> Z_1 rho
    assert np.allclose(apply_mpo(zl, basis).to_dense(), -basis.to_dense())


def test_apply_bond_is_product(rng):
    psi = VectorizedMps.random(5, 4, 3, rng)
    l = build_lindbladian(ising_local(IsingLocalParams(5, 0.0)))
    out = apply_mpo(l, psi)
    assert out.bonds == [a * b for a, b in zip(l.bonds, psi.bonds)]


def test_apply_lindbladian_matches_dense(rng):
    m = ising_local(IsingLocalParams(4, 0.7))
    psi = VectorizedMps.random(4, 4, 4, rng)
    got = apply_mpo(build_lindbladian(m), psi).to_dense()
    assert np.allclose(got, dense_lindbladian(m) @ psi.to_dense(), atol=1e-10)


def test_expectation_cases(rng):
    psi = normalized(VectorizedMps.random(4, 4, 3, rng))
    assert expectation(psi, SuperMpo.identity(4, 4)) == pytest.approx(1.0)
    m = ising_local(IsingLocalParams(4, 0.0))
    ld = dense_lindbladian(m)
    ref = np.vdot(psi.to_dense(), ld.conj().T @ ld @ psi.to_dense())
    assert abs(expectation(psi, build_ldagl(m)) - ref) < 1e-9 * abs(ref)


def test_compress_to_current_bond_is_lossless(rng):
    psi = VectorizedMps.random(5, 4, 3, rng)
    out, w = compress(psi, 3)
    assert w == pytest.approx(0.0, abs=1e-26)
    assert np.allclose(out.to_dense(), psi.to_dense())


def test_compress_to_product(rng):
    psi = normalized(VectorizedMps.random(5, 4, 4, rng))
    out, w = compress(psi, 1)
    assert out.max_bond == 1
    assert abs(overlap(psi, normalized(out))) <= 1 + 1e-12
    assert 0 < w < 1


def _dense_truncation_sweep(vec, n, d, bond):
    """Right-to-left truncated SVD sweep on the dense vector."""
    rest = vec.reshape(-1, 1)
    right = np.ones((1, 1), dtype=complex)
    tail = 1
    for i in range(n - 1, 0, -1):
        m = rest.reshape(-1, d * tail)
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        k = min(bond, len(s))
        rest = u[:, :k] * s[:k]
        right = (vh[:k] @ np.kron(np.eye(d), right) if i < n - 1 else vh[:k])
        tail = k
    return (rest @ right).reshape(-1)


def test_compress_matches_dense_oracle(rng):
    psi = normalized(VectorizedMps.random(6, 4, 8, rng))
    out, _ = compress(psi, 4)
    assert out.max_bond <= 4
    ref = _dense_truncation_sweep(psi.to_dense(), 6, 4, 4)
    f_mps = abs(overlap(psi, out)) ** 2 / out.norm() ** 2
    f_ref = abs(np.vdot(psi.to_dense(), ref)) ** 2 / np.vdot(ref, ref).real
    assert f_mps == pytest.approx(f_ref, abs=1e-8)


def test_trace_vector(rng):
    n = 4
    tv = trace_vector(n)
    assert overlap(tv, vectorize_product([IDENTITY / 2] * n)) == pytest.approx(1.0)
    assert overlap(tv, vectorize_product([UP] * n)) == pytest.approx(1.0)
    assert tv.norm() ** 2 == pytest.approx(2 ** n)
    r = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    psi = VectorizedMps.from_dense(rho_to_vec(r, 3), 3, 4)
    assert abs(overlap(trace_vector(3), psi) - np.trace(r)) < 1e-13 * np.linalg.norm(r)


def test_interleaved_vectorization_layout():
    # site i carries the pair index s_i * d + r_i, site 0 most significant
    rho = np.kron(SIGMA_PLUS, UP)
    psi = vectorize_product([SIGMA_PLUS, UP])
    assert np.allclose(psi.to_dense(), rho_to_vec(rho, 2))
    assert np.allclose(vec_to_rho(psi.to_dense(), 2), rho)


def test_operator_adjoint_and_add(rng):
    psi = VectorizedMps.random(3, 4, 3, rng)
    r = dense_rho(psi)
    assert np.allclose(dense_rho(operator_adjoint(psi)), r.conj().T)
    h = add(psi, operator_adjoint(psi), 0.5, 0.5)
    assert h.max_bond == 2 * psi.max_bond
    assert np.allclose(dense_rho(h), (r + r.conj().T) / 2)


def test_pad_bonds_keeps_state(rng):
    psi = VectorizedMps.random(6, 4, 2, rng)
    big = pad_bonds(psi, 5, rng, noise=0.0)
    assert big.bonds == [4, 5, 5, 5, 4]
    assert np.allclose(big.to_dense(), psi.to_dense())
    noisy = pad_bonds(psi, 5, rng, noise=1e-8)
    assert np.linalg.norm(noisy.to_dense() - psi.to_dense()) < 1e-6 * psi.norm()


def test_mpo_adjoint_product_norm_identity(rng):
    m = ising_local(IsingLocalParams(4, 1.0))
    l = build_lindbladian(m)
    psi = VectorizedMps.random(4, 4, 3, rng)
    lhs = apply_mpo(l, psi).norm() ** 2
    rhs = expectation(psi, mpo_product(adjoint(l), l)).real
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_gauge_invariance(rng):
    psi = VectorizedMps.random(5, 4, 3, rng)
    o = build_ldagl(ising_local(IsingLocalParams(5, 0.0)))
    ref = expectation(psi, o)
    for c in range(5):
        assert abs(expectation(canonicalize(psi, c), o) - ref) <= 1e-10 * abs(ref)


def test_serialization_roundtrip(tmp_path, rng):
    psi = canonicalize(VectorizedMps.random(4, 4, 3, rng), 2)
    save_mps(tmp_path / "s.npz", psi)
    back = load_mps(tmp_path / "s.npz")
    assert back.gauge_center == 2
    assert all(np.array_equal(a, b) for a, b in zip(psi.tensors, back.tensors))
    o = build_lindbladian(ising_local(IsingLocalParams(3, 0.0)))
    save_mpo(tmp_path / "o.npz", o)
    assert all(np.array_equal(a, b) for a, b in zip(o.tensors, load_mpo(tmp_path / "o.npz").tensors))
    with pytest.raises(ValueError):
        load_mpo(tmp_path / "s.npz")


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_canonical_form_is_exact_gauge(n, bond, seed):
    rng = np.random.default_rng(seed)
    psi = VectorizedMps.random(n, 4, bond, rng)
    c = int(rng.integers(n))
    out = canonicalize(psi, c)
    assert is_canonical(out)
    assert np.allclose(out.to_dense(), psi.to_dense(), atol=1e-12 * psi.norm())
