"""Variational steady-state search: minimize <Phi| L^+ L |Phi> over MPS.

Pipeline: a D=1 warm-up with symmetric (outside-in / inside-out) sweeps and
physicality screening with restarts, followed by single-site alternating
least-squares stages at growing bond dimension, each seeded by the previous
result.  Convergence in D is decided on the eigenvalue, the local
polarization vectors and a few scalar observables.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import observables as obs
from .mps import (
    SuperMpo,
    VectorizedMps,
    add,
    apply_mpo,
    canonicalize,
    compress,
    exact_bonds,
    expectation,
    left_env_step,
    normalized,
    operator_adjoint,
    overlap,
    pad_bonds,
    right_env_step,
    trace_vector,
)
from .superop import ModelSpec, adjoint, build_lindbladian, compress_mpo, mpo_product
from .tensor import DTYPE, LinearMap, lowest_eigenpairs

log = logging.getLogger(__name__)

# eigenvalues below this are treated as exact zeros when judging sweep progress
EIGEN_FLOOR = 1e-14


class SolverError(RuntimeError):
    pass


class WarmupError(SolverError):
    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = candidates


class NonNormalizableError(SolverError):
    pass


class HermiticityError(SolverError):
    pass


class PhysicalityAssertionError(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SolverConfig:
    bond_schedule: tuple = (1, 2, 4, 6, 8, 12, 16, 20, 24, 30)
    eigen_tol: float = 1e-10
    sweep_tol: float = 1e-4
    max_sweeps: int = 30
    eigenvalue_accept: float = 1e-5
    polarization_tol: float = 1e-4
    purity_tol: float = 1e-2
    # fraction of the dominant polarization norm below which a component counts as zero
    polarization_floor: float = 1e-2
    max_restarts: int = 10
    rng_seed: int = 0
    physicality_tol_small: float = 0.05
    physicality_tol: float = 0.005
    small_bond: int = 2
    warmup_tol: float = 1e-12
    warmup_max_sweeps: int = 500
    exact_tol: float = 1e-12
    noise: float = 1e-8
    dense_limit: int = 512
    probe_degeneracy: bool = True
    probe_bond: int = 4
    degeneracy_tol: float = 1e-8

    def __post_init__(self):
        sched = tuple(int(x) for x in self.bond_schedule)
        if not sched or any(b <= a for a, b in zip(sched, sched[1:])) or sched[0] < 1:
            raise ValueError(f"bond_schedule must be strictly increasing positive, got {sched}")
        self.bond_schedule = sched
        for name in ("eigen_tol", "sweep_tol", "eigenvalue_accept", "polarization_tol",
                     "purity_tol", "physicality_tol", "physicality_tol_small", "warmup_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_restarts < 1:
            raise ValueError("max_restarts must be at least 1")

    def physicality_tolerance(self, bond: int) -> float:
        return self.physicality_tol_small if bond <= self.small_bond else self.physicality_tol


@dataclass
class PhysicalityResult:
    passed: bool
    violations: list
    trace: complex
    polarizations: np.ndarray | None = None

    def __bool__(self):
        return self.passed


@dataclass
class StageRecord:
    bond_dim: int
    eigenvalue: float
    sweeps: int
    polarizations: np.ndarray
    scalars: dict
    physical: bool
    non_hermitian: float = 0.0
    start_eigenvalue: float = float("nan")
    eigenvalue_trace: list = field(default_factory=list)


@dataclass
class SteadyStateReport:
    state: VectorizedMps
    raw_state: VectorizedMps
    final_eigenvalue: float
    d_history: list
    restarts_used: int
    physicality_flags: list
    converged: bool
    reason: str
    degenerate: bool = False
    probe_eigenvalue: float | None = None

    @property
    def bond_dim(self) -> int:
        return self.d_history[-1].bond_dim if self.d_history else 1


# ---------------------------------------------------------------------------
# hermitization and physicality


def trace_of(psi: VectorizedMps) -> complex:
    return overlap(trace_vector(psi.n_sites, psi.phys_dim), psi)


def _trace_is_zero(psi, tr):
    scale = psi.norm() * np.sqrt(float(psi.phys_dim) ** psi.n_sites)
    return abs(tr) <= 1e-12 * scale


def normalize_and_hermitize(psi: VectorizedMps, cutoff: float = 1e-26) -> VectorizedMps:
    """Trace-one vectorization of (rho + rho^+)/2 for rho proportional to ``psi``."""
    tr = trace_of(psi)
    if tr == 0 or _trace_is_zero(psi, tr):
        raise NonNormalizableError("state is orthogonal to the identity")
    m = psi / tr
    h = add(m, operator_adjoint(m), 0.5, 0.5)
    h, _ = compress(h, h.max_bond, cutoff)
    return h / trace_of(h).real


def non_hermitian_residual(psi: VectorizedMps) -> float:
    """||rho - rho^+|| / ||rho|| on vectorizations."""
    diff = add(psi, operator_adjoint(psi), 1.0, -1.0)
    return diff.norm() / psi.norm()


def physicality_check(psi: VectorizedMps, tol: float) -> PhysicalityResult:
    """Every single-site Pauli expectation must lie within [-1 - tol, 1 + tol]."""
    tr = trace_of(psi)
    if tr == 0 or _trace_is_zero(psi, tr):
        return PhysicalityResult(False, [("trace", None, 0.0)], tr)
    rho = normalize_and_hermitize(psi)
    pol = obs.polarizations(rho)
    violations = []
    for k, a in enumerate("xyz"):
        for n in range(psi.n_sites):
            if abs(pol[k, n]) > 1 + tol:
                violations.append((f"sigma_{a}", n, float(pol[k, n])))
    return PhysicalityResult(not violations, violations, tr, pol)


# ---------------------------------------------------------------------------
# effective operators


def _local_map(lenv, w, renv, shape, penalties=(), dense_limit=512):
    """Effective operator on one site tensor of shape ``shape``."""
    dim = int(np.prod(shape))

    def apply(x):
        x = x.reshape(shape)
        t = np.tensordot(lenv, x, axes=(2, 0))  # (b, w, p, k)
        t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # (b, k, out, w')
        t = np.tensordot(t, renv, axes=([1, 3], [2, 1]))  # (b, out, b')
        out = t.reshape(-1)
        for weight, v in penalties:
            out = out + weight * v * np.vdot(v, x.reshape(-1))
        return out

    dense = None
    if dim <= dense_limit:
        def dense():
            m = np.einsum("awb,wstv,cvd->ascbtd", lenv, w, renv, optimize=True).reshape(dim, dim)
            for weight, v in penalties:
                m = m + weight * np.outer(v, v.conj())
            return m

    return LinearMap(dim, apply, hermitian=True, dense=dense)


def _overlap_left_step(env, phi_t, psi_t):
    t = np.tensordot(env, psi_t, axes=(1, 0))  # (f, p, k)
    return np.tensordot(phi_t.conj(), t, axes=([0, 1], [0, 1]))


def _overlap_right_step(env, phi_t, psi_t):
    t = np.tensordot(psi_t, env, axes=(2, 1))  # (k, p, f)
    return np.tensordot(phi_t.conj(), t, axes=([1, 2], [1, 2]))  # (f, k)


def _penalty_vector(pl, phi_t, pr):
    # v[a, p, b] = sum conj(pl[f, a]) phi[f, p, g] conj(pr[g, b])
    t = np.tensordot(pl.conj(), phi_t, axes=(0, 0))  # (a, p, g)
    return np.tensordot(t, pr.conj(), axes=(2, 0)).reshape(-1)


class _Sweeper:
    """Single-site ALS on an MPO with cached environments."""

    def __init__(self, psi, mpo, cfg, penalties=()):
        self.n = psi.n_sites
        self.mpo = mpo
        self.cfg = cfg
        self.psi = list(normalized(canonicalize(psi, 0)).tensors)
        self.pen = [(float(wt), list(phi.tensors)) for wt, phi in penalties]
        one = np.ones((1, 1, 1), dtype=DTYPE)
        self.lenv = [one] + [None] * self.n
        self.renv = [None] * self.n + [one]
        self.plenv = [[np.ones((1, 1), dtype=DTYPE)] + [None] * self.n for _ in self.pen]
        self.prenv = [[None] * self.n + [np.ones((1, 1), dtype=DTYPE)] for _ in self.pen]
        for i in range(self.n - 1, 0, -1):
            self._update_right(i)
        self.energies = []
        self.checked = False

    def _update_left(self, i):
        a = self.psi[i]
        self.lenv[i + 1] = left_env_step(self.lenv[i], a, self.mpo.tensors[i], a)
        for k, (_, phi) in enumerate(self.pen):
            self.plenv[k][i + 1] = _overlap_left_step(self.plenv[k][i], phi[i], a)

    def _update_right(self, i):
        a = self.psi[i]
        self.renv[i] = right_env_step(self.renv[i + 1], a, self.mpo.tensors[i], a)
        for k, (_, phi) in enumerate(self.pen):
            self.prenv[k][i] = _overlap_right_step(self.prenv[k][i + 1], phi[i], a)

    def _solve(self, i):
        a = self.psi[i]
        pens = [(wt, _penalty_vector(self.plenv[k][i], phi[i], self.prenv[k][i + 1]))
                for k, (wt, phi) in enumerate(self.pen)]
        op = _local_map(self.lenv[i], self.mpo.tensors[i], self.renv[i + 1], a.shape, pens,
                        self.cfg.dense_limit)
        if not self.checked:
            defect = op.hermiticity_defect(np.random.default_rng(i))
            if defect > 1e-8:
                raise HermiticityError(f"effective operator at site {i} not Hermitian ({defect:.2e})")
            self.checked = True
        # residual r moves the eigenvalue by ~r**2/gap, so loose solves suffice far from zero
        e_now = self.energies[-1] if self.energies else np.inf
        tol = max(self.cfg.eigen_tol, 1e-3 * np.sqrt(max(e_now, 0.0)))
        w, v = lowest_eigenpairs(op, a.reshape(-1), 1, tol, dense_limit=self.cfg.dense_limit)
        self.psi[i] = v[:, 0].reshape(a.shape)
        self.energies.append(float(w[0]))
        return float(w[0])

    def sweep(self):
        n = self.n
        if n == 1:
            return self._solve(0)
        for i in range(n - 1):
            e = self._solve(i)
            dl, p, dr = self.psi[i].shape
            q, r = np.linalg.qr(self.psi[i].reshape(dl * p, dr))
            self.psi[i] = q.reshape(dl, p, q.shape[1])
            self.psi[i + 1] = np.tensordot(r, self.psi[i + 1], axes=(1, 0))
            self._update_left(i)
        for i in range(n - 1, 0, -1):
            e = self._solve(i)
            dl, p, dr = self.psi[i].shape
            q, r = np.linalg.qr(self.psi[i].reshape(dl, p * dr).T)
            self.psi[i] = q.T.reshape(q.shape[1], p, dr)
            self.psi[i - 1] = np.tensordot(self.psi[i - 1], r.T, axes=(2, 0))
            self._update_right(i)
        return e

    def state(self):
        return VectorizedMps(self.psi, 0)


def _sweep_converged(e_prev, e, cfg):
    if e <= max(cfg.exact_tol, EIGEN_FLOOR):
        return True
    return abs(e_prev - e) <= cfg.sweep_tol * abs(e_prev)


def als_stage(guess: VectorizedMps, ldagl: SuperMpo, bond: int, cfg: SolverConfig, penalties=()):
    """Single-site sweeps at fixed bond dimension.

    Returns ``(state, eigenvalue, sweeps, energies)``; the state is unit
    norm with gauge center at site 0 and ``energies`` lists the eigenvalue
    after every local update.
    """
    if guess.max_bond > bond:
        raise ValueError(f"guess bond {guess.max_bond} exceeds stage bond {bond}")
    sw = _Sweeper(guess, ldagl, cfg, penalties)
    psi0 = sw.state()
    e_prev = float(expectation(psi0, ldagl).real)
    for wt, phi in penalties:
        e_prev += wt * abs(overlap(phi, psi0)) ** 2
    e = e_prev
    sweeps = 0
    t0 = time.perf_counter()
    for sweeps in range(1, cfg.max_sweeps + 1):
        e = sw.sweep()
        log.debug("stage D=%d sweep %d eigenvalue %.6e wall %.3fs", bond, sweeps, e,
                  time.perf_counter() - t0)
        if _sweep_converged(e_prev, e, cfg):
            break
        e_prev = e
    return sw.state(), e, sweeps, sw.energies


# ---------------------------------------------------------------------------
# warm-up at D = 1


def symmetric_order(n: int, outside_in: bool = True) -> list[int]:
    order = []
    lo, hi = 0, n - 1
    while lo <= hi:
        order.append(lo)
        if hi != lo:
            order.append(hi)
        lo, hi = lo + 1, hi - 1
    return order if outside_in else order[::-1]


def random_product_state(n: int, rng, d: int = 2) -> VectorizedMps:
    """Product of random single-spin density matrices (Bloch vectors in the ball)."""
    from .superop import PAULI

    sites = []
    for _ in range(n):
        r = rng.standard_normal(3)
        r *= rng.uniform() ** (1 / 3) / np.linalg.norm(r)
        rho = 0.5 * (np.eye(d) + sum(c * PAULI[a] for c, a in zip(r, "xyz")))
        v = rho.reshape(-1)
        sites.append(v / np.linalg.norm(v))
    return VectorizedMps.product(sites)


def _product_energy(vecs, mpo):
    env = np.ones((1, 1, 1), dtype=DTYPE)
    for v, w in zip(vecs, mpo.tensors):
        env = left_env_step(env, v, w, v)
    return float(env[0, 0, 0].real)


def _warmup_descend(start: VectorizedMps, ldagl: SuperMpo, cfg: SolverConfig):
    """Converge the D=1 problem with alternating outside-in / inside-out sweeps."""
    n = start.n_sites
    vecs = [t / np.linalg.norm(t) for t in start.tensors]
    e_prev = _product_energy(vecs, ldagl)
    e = e_prev
    one = np.ones((1, 1, 1), dtype=DTYPE)
    for sweep in range(cfg.warmup_max_sweeps):
        for i in symmetric_order(n, outside_in=(sweep % 2 == 0)):
            lenv = one
            for j in range(i):
                lenv = left_env_step(lenv, vecs[j], ldagl.tensors[j], vecs[j])
            renv = one
            for j in range(n - 1, i, -1):
                renv = right_env_step(renv, vecs[j], ldagl.tensors[j], vecs[j])
            m = np.einsum("awb,wstv,cvd->ascbtd", lenv, ldagl.tensors[i], renv).reshape(
                vecs[i].size, vecs[i].size)
            w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
            vecs[i] = v[:, 0].reshape(vecs[i].shape)
            e = float(w[0])
        if abs(e_prev - e) <= max(cfg.warmup_tol * abs(e), EIGEN_FLOOR):
            break
        e_prev = e
    return VectorizedMps(vecs), e, sweep + 1


def warmup(model_or_ldagl, cfg: SolverConfig, rng=None, initial: VectorizedMps | None = None):
    """D=1 initial state passing the physicality checks.

    Returns ``(state, eigenvalue, restarts_used, candidates)``.  Raises
    :class:`WarmupError` after ``cfg.max_restarts`` rejected candidates.
    """
    ldagl = ldagl_mpo(model_or_ldagl) if isinstance(model_or_ldagl, ModelSpec) else model_or_ldagl
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    n = ldagl.n_sites
    tol = cfg.physicality_tolerance(1)
    candidates = []
    for attempt in range(cfg.max_restarts):
        if attempt == 0 and initial is not None:
            start = compress(initial, 1)[0]
        else:
            start = random_product_state(n, rng)
        state, e, sweeps = _warmup_descend(start, ldagl, cfg)
        check = physicality_check(state, tol)
        candidates.append({"attempt": attempt, "eigenvalue": e, "sweeps": sweeps,
                           "violations": check.violations, "trace": check.trace})
        log.info("warm-up attempt %d: eigenvalue %.3e, %d sweeps, physical=%s",
                 attempt, e, sweeps, check.passed)
        if check.passed:
            return normalized(state), e, attempt, candidates
    raise WarmupError(f"warm-up failed after {cfg.max_restarts} attempts", candidates)


# ---------------------------------------------------------------------------
# convergence decisions


def relative_change(prev: np.ndarray, cur: np.ndarray, scale_floor: float = 0.0) -> float:
    """||cur - prev|| / ||cur||, with the denominator bounded below by ``scale_floor``."""
    diff = float(np.linalg.norm(cur - prev))
    if diff == 0.0:
        return 0.0
    return diff / max(float(np.linalg.norm(cur)), scale_floor, 1e-300)


def check_convergence(prev: StageRecord, cur: StageRecord, cfg: SolverConfig):
    """Decide convergence in D between two consecutive stage records.

    Returns ``(converged, failures)`` where ``failures`` names each unmet
    criterion.
    """
    failures = []
    if not cur.eigenvalue <= cfg.eigenvalue_accept:
        failures.append(f"eigenvalue {cur.eigenvalue:.3e} > {cfg.eigenvalue_accept:.1e}")
    # a component that vanishes (e.g. by symmetry) is judged on the scale of the dominant one
    dominant = max(float(np.linalg.norm(p)) for p in cur.polarizations)
    for k, a in enumerate("xyz"):
        ch = relative_change(prev.polarizations[k], cur.polarizations[k],
                             cfg.polarization_floor * dominant)
        if not ch < cfg.polarization_tol:
            failures.append(f"sigma_{a} polarization change {ch:.3e}")
    for name, val in cur.scalars.items():
        if name in prev.scalars:
            ch = abs(val - prev.scalars[name])
            if not ch < cfg.purity_tol:
                failures.append(f"{name} change {ch:.3e}")
    return not failures, failures


# ---------------------------------------------------------------------------
# driver


def ldagl_mpo(model_or_lmpo) -> SuperMpo:
    lmpo = build_lindbladian(model_or_lmpo) if isinstance(model_or_lmpo, ModelSpec) else model_or_lmpo
    return compress_mpo(mpo_product(adjoint(lmpo), lmpo))


def residual_eigenvalue(lmpo: SuperMpo, psi: VectorizedMps) -> float:
    """<psi|L^+L|psi> / <psi|psi> evaluated as ||L psi||^2 / ||psi||^2."""
    return (apply_mpo(lmpo, psi).norm() / psi.norm()) ** 2


def _record(raw, bond, e, sweeps, model_name, tol, start_e=float("nan"), trace=()):
    check = physicality_check(raw, tol)
    rho = normalize_and_hermitize(raw)
    return StageRecord(
        bond_dim=bond,
        eigenvalue=e,
        sweeps=sweeps,
        polarizations=obs.polarizations(rho),
        scalars=obs.model_observables(rho, model_name),
        physical=check.passed,
        non_hermitian=non_hermitian_residual(raw / trace_of(raw)),
        start_eigenvalue=start_e,
        eigenvalue_trace=list(trace),
    ), rho, check


def probe_degeneracy(found: VectorizedMps, ldagl: SuperMpo, bond: int, cfg: SolverConfig, rng):
    """Search for a second near-null vector orthogonal to ``found``.

    Minimizes L^+L + |found><found| starting from a generic random D=1 vector
    and doubling the bond up to ``bond``.  Physical product states are avoided
    as seeds: their large identity component draws the sweep back onto
    ``found`` itself.  The result is an upper bound on the
    second-lowest eigenvalue of L^+L.
    """
    found = normalized(found)
    pen = [(1.0, found)]
    state = normalized(VectorizedMps.random(found.n_sites, found.local_dim, 1, rng))
    b = 1
    while True:
        state, e, _, _ = als_stage(state, ldagl, b, cfg, penalties=pen)
        if b >= bond or e <= cfg.degeneracy_tol:
            return e
        b = min(2 * b, bond)
        state = pad_bonds(state, b, rng, cfg.noise)


def _at_exact_bonds(psi: VectorizedMps) -> bool:
    return psi.bonds == exact_bonds(psi.n_sites, psi.local_dim)


def solve(model: ModelSpec, cfg: SolverConfig | None = None, guess: VectorizedMps | None = None,
          ldagl: SuperMpo | None = None, checkpoint_dir=None) -> SteadyStateReport:
    cfg = SolverConfig() if cfg is None else cfg
    rng = np.random.default_rng(cfg.rng_seed)
    lmpo = build_lindbladian(model)
    ldagl = ldagl_mpo(lmpo) if ldagl is None else ldagl
    name = model.name
    t0 = time.perf_counter()

    state, _, restarts, _ = warmup(ldagl, cfg, rng, initial=guess)
    e = residual_eigenvalue(lmpo, state)
    rec, rho, check = _record(state, 1, e, 0, name, cfg.physicality_tolerance(1))
    history = [rec]
    flags = []
    raw = state
    log.info("D=1 eigenvalue %.3e (%.1fs)", e, time.perf_counter() - t0)

    converged, reason = False, "bond schedule exhausted"
    if e <= cfg.exact_tol and e <= cfg.eigenvalue_accept:
        converged, reason = True, "exact at D=1"
    else:
        for bond in cfg.bond_schedule:
            if bond == 1:
                continue
            padded = pad_bonds(raw, bond, rng, cfg.noise)
            if padded.bonds == raw.bonds:
                # exact representation already reached; nothing left to grow
                if e <= cfg.eigenvalue_accept:
                    converged, reason = True, f"maximal bond reached at D={history[-1].bond_dim}"
                else:
                    reason = f"maximal bond reached with eigenvalue {e:.3e}"
                break
            start_e = float(expectation(normalized(padded), ldagl).real)
            raw, _, sweeps, trace = als_stage(padded, ldagl, bond, cfg)
            e = residual_eigenvalue(lmpo, raw)
            rec, rho, check = _record(raw, bond, e, sweeps, name, cfg.physicality_tolerance(bond),
                                      start_e, trace)
            history.append(rec)
            log.info("D=%d eigenvalue %.3e after %d sweeps (%.1fs)", bond, e, sweeps,
                     time.perf_counter() - t0)
            if checkpoint_dir is not None:
                from .mps import save_mps
                save_mps(f"{checkpoint_dir}/state_D{bond}.npz", raw)
            if not check.passed:
                flags.append(f"unphysical at D={bond}: {check.violations}")
                report = SteadyStateReport(rho, raw, e, history, restarts, flags, False,
                                           f"physicality assertion failed at D={bond}")
                raise PhysicalityAssertionError(report.reason, report)
            ok, failures = check_convergence(history[-2], rec, cfg)
            if ok:
                converged, reason = True, f"criteria met at D={bond}"
                break
            reason = "bond schedule exhausted: " + "; ".join(failures)
            if _at_exact_bonds(raw) and e <= cfg.eigenvalue_accept:
                # no larger D exists to compare against
                converged, reason = True, f"maximal bond reached at D={bond}"
                break

    nh = history[-1].non_hermitian
    if nh > 10 * np.sqrt(max(e, 0.0)) and nh > 1e-12:
        flags.append(f"non-Hermitian residual {nh:.2e} exceeds 10*sqrt(eigenvalue)")

    report = SteadyStateReport(rho, raw, e, history, restarts, flags, converged, reason)
    if cfg.probe_degeneracy:
        pbond = max(cfg.probe_bond, history[-1].bond_dim)
        pe = probe_degeneracy(raw, ldagl, pbond, cfg, rng)
        report.probe_eigenvalue = pe
        if pe <= cfg.degeneracy_tol:
            report.degenerate = True
            flags.append(f"degenerate null space: second null vector found (eigenvalue {pe:.2e})")
    log.info("solve finished: converged=%s (%s), %.1fs", converged, reason, time.perf_counter() - t0)
    return report
