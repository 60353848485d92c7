import numpy as np
import pytest

from steadymps.ed import expect_dense, rho_to_vec, steady_state_dense, steady_state_sparse
from steadymps.models import DickeParams, IsingLocalParams, dicke_low_dim, ising_local
from steadymps.mps import VectorizedMps, canonicalize, vectorize_product
from steadymps.observables import (
    collective_spin_sq,
    connected_zz,
    correlation_table,
    local_pauli,
    model_observables,
    polarizations,
    purity,
    staggered_mz_sq,
    summary,
)
from steadymps.solver import SolverConfig, solve
from steadymps.superop import IDENTITY, PAULI

from conftest import dense_rho, random_density_mps

UP = np.array([[1, 0], [0, 0]], dtype=complex)
DOWN = np.array([[0, 0], [0, 1]], dtype=complex)


def mixed(n):
    return vectorize_product([IDENTITY / 2] * n)


def as_mps(rho, n):
    return VectorizedMps.from_dense(rho_to_vec(rho, n), n, 4)


@pytest.fixture(scope="module")
def ising4():
    m = ising_local(IsingLocalParams(4, 0.0))
    rep = solve(m, SolverConfig(bond_schedule=(1, 2, 4, 8, 16), probe_degeneracy=False))
    return rep, steady_state_dense(m).rho


def test_local_pauli_trivial_states():
    up = vectorize_product([UP] * 3)
    assert [local_pauli(up, i, "z") for i in range(3)] == pytest.approx([1, 1, 1])
    for a in "xyz":
        assert local_pauli(mixed(3), 1, a) == pytest.approx(0.0)
    with pytest.raises(IndexError):
        local_pauli(up, 3, "z")


def test_local_pauli_matches_ed(ising4):
    rep, rho = ising4
    for i in range(4):
        assert local_pauli(rep.state, i, "z") == pytest.approx(
            expect_dense(rho, {i: PAULI["z"]}, 4).real, abs=1e-8)


def test_polarizations_shape_and_values(rng):
    psi = random_density_mps(4, 3, rng)
    pol = polarizations(psi)
    r = dense_rho(psi)
    assert pol.shape == (3, 4)
    for k, a in enumerate("xyz"):
        for i in range(4):
            assert pol[k, i] == pytest.approx(expect_dense(r, {i: PAULI[a]}, 4).real, abs=1e-12)


def test_staggered_trivial_states():
    neel = vectorize_product([UP, DOWN, UP, DOWN])
    assert staggered_mz_sq(neel) == pytest.approx(1.0)
    assert staggered_mz_sq(mixed(5)) == pytest.approx(1 / 5)


def test_staggered_matches_ed(ising4):
    rep, rho = ising4
    n = 4
    mz = sum((-1) ** i * _embed(PAULI["z"], i, n) for i in range(n)) / n
    assert staggered_mz_sq(rep.state) == pytest.approx(np.trace(rho @ mz @ mz).real, abs=1e-8)


def _embed(op, i, n):
    out = np.array([[1.0]])
    for j in range(n):
        out = np.kron(out, op if j == i else np.eye(2))
    return out


def test_collective_trivial_states():
    up = vectorize_product([UP] * 4)
    assert collective_spin_sq(up, "z", "total") == pytest.approx(16.0)
    assert collective_spin_sq(mixed(4), "y", "per-site") == pytest.approx(0.25)
    with pytest.raises(ValueError):
        collective_spin_sq(up, "z", "per-bond")


def test_collective_equals_pair_double_sum(rng):
    psi = random_density_mps(5, 3, rng)
    r = dense_rho(psi)
    for a in "xyz":
        # sigma^2 = 1 on the diagonal
        total = sum(expect_dense(r, {i: PAULI[a] @ PAULI[a]} if i == j else {i: PAULI[a], j: PAULI[a]},
                                 5).real for i in range(5) for j in range(5))
        assert collective_spin_sq(psi, a, "total") == pytest.approx(total, abs=1e-10)


def test_dicke_collective_against_ed():
    m = dicke_low_dim(DickeParams(5, 1.0))
    rep = solve(m, SolverConfig(bond_schedule=(1, 2, 4, 8, 12, 16, 20), probe_degeneracy=False))
    rho = steady_state_dense(m).rho
    sy = sum(_embed(PAULI["y"], i, 5) for i in range(5))
    ref = np.trace(rho @ sy @ sy).real / 25
    assert collective_spin_sq(rep.state, "y", "per-site") == pytest.approx(ref, abs=1e-8)


def test_dicke_n10_table_consistency():
    m = dicke_low_dim(DickeParams(10, 1.0))
    rep = solve(m, SolverConfig(bond_schedule=(1, 2, 4), probe_degeneracy=False))
    table = correlation_table(rep.state, "y")
    assert collective_spin_sq(rep.state, "y", "total") == pytest.approx(table.sum(), abs=1e-10)
    pol = polarizations(rep.state)
    assert np.allclose(np.diag(table), 1.0)
    assert np.allclose(table, table.T)
    assert pol.shape == (3, 10)


def test_connected_trivial_states(rng):
    prod = vectorize_product([IDENTITY / 2 + 0.3 * PAULI["z"] / 2, UP, IDENTITY / 2, DOWN])
    neel = vectorize_product([UP, DOWN, UP, DOWN])
    for d in range(4):
        assert connected_zz(prod, 0, d) == pytest.approx(0.0 if d else 1 - 0.3 ** 2, abs=1e-12)
    for d in range(1, 4):
        assert connected_zz(neel, 0, d) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(IndexError):
        connected_zz(neel, 2, 2)


def test_connected_envelope_decays_ed_n6():
    rho = steady_state_sparse(ising_local(IsingLocalParams(6, 0.0)))
    psi = as_mps(rho, 6)
    mags = [abs(connected_zz(psi, 1, d)) for d in range(1, 5)]
    assert all(a > b for a, b in zip(mags, mags[1:])), mags


def test_purity_trivial_states():
    assert purity(vectorize_product([UP, DOWN, UP])) == pytest.approx(1.0)
    assert purity(mixed(5)) == pytest.approx(2 ** -5)


def test_observables_gauge_invariant(rng):
    psi = random_density_mps(5, 3, rng)
    for c in (0, 2, 4):
        g = canonicalize(psi, c)
        assert staggered_mz_sq(g) == pytest.approx(staggered_mz_sq(psi), rel=1e-10)
        assert purity(g) == pytest.approx(purity(psi), rel=1e-10)
        assert np.allclose(polarizations(g), polarizations(psi), atol=1e-10)


def test_model_observables_and_summary(ising4):
    rep, _ = ising4
    obs = model_observables(rep.state, "ising-local")
    assert set(obs) == {"purity", "mz2_staggered"}
    names = [r.name for r in summary(rep.state, {"Delta": 0.0})]
    assert "purity" in names and "sy2_total" in names
    rec = summary(rep.state)[0].as_row()
    assert rec["n_sites"] == 4
