import numpy as np
import pytest

from steadymps.ed import vec_to_rho
from steadymps.mps import VectorizedMps, add, operator_adjoint, trace_vector, overlap


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def dense_rho(psi: VectorizedMps) -> np.ndarray:
    return vec_to_rho(psi.to_dense(), psi.n_sites, psi.phys_dim)


def random_density_mps(n, bond, rng, d=2) -> VectorizedMps:
    """Hermitian, unit-trace MPS (not necessarily positive)."""
    a = VectorizedMps.random(n, d * d, bond, rng)
    h = add(a, operator_adjoint(a), 0.5, 0.5)
    tr = overlap(trace_vector(n, d), h)
    return h / tr.real if abs(tr) > 1e-8 else random_density_mps(n, bond, rng, d)


def random_positive_rho(n, rng, d=2, rank=None):
    dim = d ** n
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    r = g @ g.conj().T
    return r / np.trace(r)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
