import numpy as np
import pytest

from steadymps.ed import expect_dense, full_operator, steady_state_dense
from steadymps.models import (
    MODELS,
    DickeParams,
    IsingCoherentParams,
    IsingLocalParams,
    dicke_low_dim,
    ising_coherent,
    ising_local,
    make_model,
    model_from_dict,
    model_to_dict,
)
from steadymps.mps import vectorize_product
from steadymps.superop import SIGMA_Z, build_lindbladian
from steadymps.mps import apply_mpo

UP = np.array([[1, 0], [0, 0]], dtype=complex)


@pytest.mark.parametrize("ctor,params", [
    (dicke_low_dim, DickeParams(1, 1.0)),
    (ising_local, IsingLocalParams(1, 0.0)),
    (ising_coherent, IsingCoherentParams(1, 1.0, 0.5, 0.3)),
])
def test_single_site_rejected(ctor, params):
    with pytest.raises(ValueError):
        ctor(params)


def test_negative_gamma_rejected():
    with pytest.raises(ValueError):
        DickeParams(3, 1.0, gamma=-1)
    with pytest.raises(ValueError):
        IsingLocalParams(3, 0.0, gamma=-0.1)
    with pytest.raises(ValueError):
        IsingCoherentParams(3, np.nan, 0.5, 0.5)


def test_term_counts():
    d = dicke_low_dim(DickeParams(5, 0.3))
    assert len(d.lindblad_ops) == 4 and len(d.hamiltonian_terms) == 5
    c = ising_coherent(IsingCoherentParams(5, 1.0, 0.5, 0.3))
    assert len(c.lindblad_ops) == 5 and len(c.lindblad_ops[-1]) == 1
    assert len(ising_local(IsingLocalParams(5, 0.0)).lindblad_ops) == 5


@pytest.mark.parametrize("name", sorted(MODELS))
def test_hamiltonian_hermitian(name):
    defaults = {"dicke": {"g": 0.8}, "ising-local": {"Delta": 1.3},
                "ising-coherent": {"g": 1.0, "mu": 0.5, "nu": 0.3}, "dephasing": {}}
    m = make_model(name, n_sites=4, **defaults[name])
    h = full_operator(m.hamiltonian_terms, 4).toarray()
    assert np.array_equal(h, h.conj().T)


def test_ising_boundary_field():
    n, v, delta = 4, 5.0, 1.0
    m = ising_local(IsingLocalParams(n, delta, V=v))
    h = full_operator(m.hamiltonian_terms, n).toarray()
    # |up...up> energy: ZZ bonds + bulk z field + boundary correction
    e = (n - 1) * v / 4 - n * (v - delta) / 2 + 2 * v / 4
    assert h[0, 0] == pytest.approx(e)


def test_dicke_n2_g0_fourfold():
    assert steady_state_dense(dicke_low_dim(DickeParams(2, 0.0))).degeneracy == 4


@pytest.mark.parametrize("n", [2, 3, 5])
def test_dicke_g0_dark_state(n):
    down = np.array([[0, 0], [0, 1]], dtype=complex)
    out = apply_mpo(build_lindbladian(dicke_low_dim(DickeParams(n, 0.0))), vectorize_product([down] * n))
    assert out.norm() < 1e-14


def test_dicke_n3_unique_physical_state():
    ss = steady_state_dense(dicke_low_dim(DickeParams(3, 1.0)))
    assert ss.degeneracy == 1
    assert np.trace(ss.rho) == pytest.approx(1.0)
    assert np.linalg.eigvalsh(ss.rho)[0] >= -1e-12


def test_ising_omega0_pure_dark_state():
    ss = steady_state_dense(ising_local(IsingLocalParams(4, 2.0, Omega=0.0)))
    target = np.zeros((16, 16))
    target[0, 0] = 1
    assert np.allclose(ss.rho, target, atol=1e-10)
    assert np.trace(ss.rho @ ss.rho).real == pytest.approx(1.0)


def test_ising_n4_antiferromagnetic_correlations():
    # mirror symmetry makes the even-N profile symmetric, so the order shows in
    # the alternating sign of the connected z correlations
    ss = steady_state_dense(ising_local(IsingLocalParams(4, 0.0)))
    z = [expect_dense(ss.rho, {i: SIGMA_Z}, 4).real for i in range(4)]
    conn = [expect_dense(ss.rho, {0: SIGMA_Z, r: SIGMA_Z}, 4).real - z[0] * z[r] for r in (1, 2, 3)]
    assert conn[0] < 0 < conn[1] and conn[2] < 0


def test_ising_n5_staggered_z():
    ss = steady_state_dense(ising_local(IsingLocalParams(5, 0.0)))
    z = np.array([expect_dense(ss.rho, {i: SIGMA_Z}, 5).real for i in range(5)])
    steps = np.diff(z)
    assert np.all(steps[:-1] * steps[1:] < 0), z


def _zterm(i):
    from steadymps.superop import LocalTerm
    return LocalTerm((i,), SIGMA_Z)


def test_coherent_symmetric_point_smaller_sz2():
    def sz2(nu):
        ss = steady_state_dense(ising_coherent(IsingCoherentParams(4, 1.0, 0.5, nu)))
        total = full_operator([_zterm(i) for i in range(4)], 4).toarray()
        return np.trace(ss.rho @ total @ total).real / 16
    assert sz2(0.5) < sz2(0.1)


def test_coherent_nu0_up_state_is_dark_but_not_stationary():
    # every jump annihilates |up...up>, but sum X_i X_{i+1} does not leave it
    # invariant, so the unique steady state is mixed
    m = ising_coherent(IsingCoherentParams(3, 0.0, 0.5, 0.0))
    up = np.zeros(8)
    up[0] = 1
    for jump in m.lindblad_ops:
        assert np.allclose(full_operator(jump, 3) @ up, 0)
    ss = steady_state_dense(m)
    assert ss.degeneracy == 1
    assert np.trace(ss.rho @ ss.rho).real < 0.5


def test_coherent_n3_unique():
    assert steady_state_dense(ising_coherent(IsingCoherentParams(3, 1.0, 0.5, 0.2))).degeneracy == 1


@pytest.mark.parametrize("name,kw", [("dicke", {"g": 0.35, "gamma": 2.0}),
                                     ("ising-local", {"Delta": -3.0, "V": 4.0}),
                                     ("ising-coherent", {"g": 1.0, "mu": 0.5, "nu": 0.2}),
                                     ("dephasing", {"J": 0.5, "h": 0.1})])
def test_serialization_roundtrip(name, kw):
    m = make_model(name, n_sites=4, **kw)
    d = model_to_dict(m)
    back = model_from_dict(d)
    assert back.params == m.params
    assert np.array_equal(build_lindbladian(back).to_dense(), build_lindbladian(m).to_dense())


def test_unknown_model():
    with pytest.raises(ValueError):
        make_model("xxz", n_sites=4)
