"""Benchmark dissipative spin chains.

Sites are numbered from 0.  Spin basis is (|up>, |down>) with
sigma^z |up> = +|up> and sigma^+ = |up><down|.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .superop import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    LocalTerm,
    ModelSpec,
)


def _check_n(n):
    if n < 2:
        raise ValueError(f"chain needs at least 2 sites, got {n}")


@dataclass(frozen=True)
class DickeParams:
    n_sites: int
    g: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass(frozen=True)
class IsingLocalParams:
    n_sites: int
    Delta: float
    V: float = 5.0
    Omega: float = 1.5
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass(frozen=True)
class IsingCoherentParams:
    n_sites: int
    g: float
    mu: float
    nu: float

    def __post_init__(self):
        if not all(np.isfinite([self.g, self.mu, self.nu])):
            raise ValueError("parameters must be finite")


@dataclass(frozen=True)
class DephasingParams:
    n_sites: int
    J: float = 1.0
    h: float = 0.0
    kappa: float = 1.0


def dicke_low_dim(p: DickeParams) -> ModelSpec:
    """H = sum_i g X_i, jumps L_i = gamma (s^-_i + s^-_{i+1}) for i < N-1.

    ``gamma`` enters the jumps linearly (the dissipator is quadratic in it).
    """
    _check_n(p.n_sites)
    n = p.n_sites
    ham = [LocalTerm((i,), SIGMA_X, p.g) for i in range(n)]
    jumps = [
        [LocalTerm((i,), SIGMA_MINUS, p.gamma), LocalTerm((i + 1,), SIGMA_MINUS, p.gamma)]
        for i in range(n - 1)
    ]
    return ModelSpec(n, ham, jumps, params={"model": "dicke", **asdict(p)})


def ising_local(p: IsingLocalParams) -> ModelSpec:
    """Rydberg-type Ising chain with local pumping L_i = sqrt(gamma) s^+_i.

    H = V/4 sum Z_i Z_{i+1} + sum (Omega/2 X_i - (V - Delta)/2 Z_i) + V/4 (Z_1 + Z_N).
    """
    _check_n(p.n_sites)
    n = p.n_sites
    ham = [LocalTerm.product(i, [SIGMA_Z, SIGMA_Z], p.V / 4) for i in range(n - 1)]
    for i in range(n):
        ham.append(LocalTerm((i,), SIGMA_X, p.Omega / 2))
        hz = -(p.V - p.Delta) / 2
        if i in (0, n - 1):
            hz += p.V / 4
        ham.append(LocalTerm((i,), SIGMA_Z, hz))
    jumps = [[LocalTerm((i,), SIGMA_PLUS, np.sqrt(p.gamma))] for i in range(n)]
    return ModelSpec(n, ham, jumps, params={"model": "ising-local", **asdict(p)})


def ising_coherent(p: IsingCoherentParams) -> ModelSpec:
    """H = sum X_i X_{i+1} + g sum Z_i with L_i = mu s^+_i + nu s^-_{i+1}, L_N = mu s^+_N."""
    _check_n(p.n_sites)
    n = p.n_sites
    ham = [LocalTerm.product(i, [SIGMA_X, SIGMA_X]) for i in range(n - 1)]
    ham += [LocalTerm((i,), SIGMA_Z, p.g) for i in range(n)]
    jumps = [
        [LocalTerm((i,), SIGMA_PLUS, p.mu), LocalTerm((i + 1,), SIGMA_MINUS, p.nu)]
        for i in range(n - 1)
    ]
    jumps.append([LocalTerm((n - 1,), SIGMA_PLUS, p.mu)])
    return ModelSpec(n, ham, jumps, params={"model": "ising-coherent", **asdict(p)})


def dephasing_chain(p: DephasingParams) -> ModelSpec:
    """Hermitian jumps sqrt(kappa) Z_i with H = J sum X_i X_{i+1} + h sum X_i.

    The normalized identity is an exact steady state of bond dimension 1.
    """
    _check_n(p.n_sites)
    n = p.n_sites
    ham = [LocalTerm.product(i, [SIGMA_X, SIGMA_X], p.J) for i in range(n - 1)]
    if p.h:
        ham += [LocalTerm((i,), SIGMA_X, p.h) for i in range(n)]
    jumps = [[LocalTerm((i,), SIGMA_Z, np.sqrt(p.kappa))] for i in range(n)]
    return ModelSpec(n, ham, jumps, params={"model": "dephasing", **asdict(p)})


MODELS = {
    "dicke": (DickeParams, dicke_low_dim),
    "ising-local": (IsingLocalParams, ising_local),
    "ising-coherent": (IsingCoherentParams, ising_coherent),
    "dephasing": (DephasingParams, dephasing_chain),
}


def make_model(name: str, **params) -> ModelSpec:
    try:
        cls, ctor = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return ctor(cls(**params))


def model_to_dict(model: ModelSpec) -> dict:
    if model.name not in MODELS:
        raise ValueError("only named models can be serialized")
    return dict(model.params)


def model_from_dict(d: dict) -> ModelSpec:
    d = dict(d)
    name = d.pop("model")
    return make_model(name, **d)
