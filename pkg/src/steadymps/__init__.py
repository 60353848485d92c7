"""Steady states of dissipative spin chains by variational minimization of
L^+L over vectorized matrix product states."""

__version__ = "0.1.0"

from .models import (  # noqa: E402
    DephasingParams,
    DickeParams,
    IsingCoherentParams,
    IsingLocalParams,
    dephasing_chain,
    dicke_low_dim,
    ising_coherent,
    ising_local,
    make_model,
)
from .solver import SolverConfig, SteadyStateReport, solve  # noqa: E402

__all__ = [
    "DephasingParams", "DickeParams", "IsingCoherentParams", "IsingLocalParams",
    "SolverConfig", "SteadyStateReport", "dephasing_chain", "dicke_low_dim",
    "ising_coherent", "ising_local", "make_model", "solve",
]
