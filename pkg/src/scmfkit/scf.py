"""Self-consistent solvers: plain mean field, partitioned-functional mean
field, and their quasiparticle (pairing) counterparts.

All solvers iterate linearly mixed densities to a fixed point, measure
convergence on the density change, and finish with one pure rebuild so the
reported density is an exact projector (or the doubled R an exact vacuum).
Failure to converge is reported, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .edf import KSFunctional, hf_energy_and_field, hfb_energy_and_fields
from .errors import BracketError, DimensionError, SingularU
from .matrixcore import (
    BogoliubovTransform,
    adjacent_pair_partner,
    antisymmetrize,
    as_matrix,
    density_from_orbitals,
    eig_hermitian,
    hermitize,
    idempotency_defect,
)


@dataclass
class SolverConfig:
    """Iteration controls shared by every solver."""

    mixing: float = 0.5
    density_tol: float = 1e-10
    max_iter: int = 500
    mu_tol: float = 1e-8
    mu_bracket_pad: float = 10.0
    initial_guess: str = "core"  # core | random | provided
    seed: int = 42
    initial_density: np.ndarray | None = None
    initial_kappa: np.ndarray | None = None
    kappa_seed: float = 0.1
    degeneracy_tol: float = 1e-9
    divergence_limit: float = 1e3

    def __post_init__(self):
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")
        if self.density_tol <= 0 or self.max_iter < 1 or self.mu_tol <= 0:
            raise ValueError("tolerances and iteration caps must be positive")
        if self.initial_guess not in ("core", "random", "provided"):
            raise ValueError(f"unknown initial guess mode {self.initial_guess!r}")


@dataclass
class SolverReport:
    """Converged state of one solver run plus its diagnostics."""

    task: str
    converged: bool
    energy: float
    iterations: int
    density: np.ndarray
    spectrum: np.ndarray
    orbitals: np.ndarray
    residuals: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    kappa: np.ndarray | None = None
    generalized_density: np.ndarray | None = None
    mu: float | None = None
    full_spectrum: np.ndarray | None = None
    pair_condensate: np.ndarray | None = None
    kappa_is_auxiliary: bool = False
    q_values: dict | None = None
    multipliers: dict | None = None
    energy_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "task": self.task,
            "converged": self.converged,
            "energy": self.energy,
            "iterations": self.iterations,
            "mu": self.mu,
            "kappa_is_auxiliary": self.kappa_is_auxiliary,
            "residuals": dict(self.residuals),
            "warnings": list(self.warnings),
        }
        if self.q_values is not None:
            out["q_values"] = {k: complex(v) for k, v in self.q_values.items()}
        if self.multipliers is not None:
            out["multipliers"] = {k: complex(v) for k, v in self.multipliers.items()}
        return out


def _initial_density(core, n_particles, cfg, dim):
    if cfg.initial_guess == "provided":
        if cfg.initial_density is None:
            raise ValueError("initial_guess='provided' needs cfg.initial_density")
        return as_matrix(cfg.initial_density).copy()
    if cfg.initial_guess == "random":
        rng = np.random.default_rng(cfg.seed)
        raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        _, vecs = eig_hermitian(hermitize(raw))
        return vecs[:, :n_particles] @ vecs[:, :n_particles].conj().T
    _, vecs = eig_hermitian(core)
    return vecs[:, :n_particles] @ vecs[:, :n_particles].conj().T


def _initial_kappa(cfg, dim, pair_partner=None):
    if cfg.initial_kappa is not None:
        return antisymmetrize(as_matrix(cfg.initial_kappa))
    partner = pair_partner or adjacent_pair_partner(dim if dim % 2 == 0 else dim + 1)[:dim]
    kap = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        p = partner[k] if k < len(partner) else None
        if p is not None and p < dim and k < p:
            kap[k, p] = cfg.kappa_seed
    return antisymmetrize(kap)


def _diverged(history, limit):
    if len(history) < 2:
        return False
    window = history[-6:]
    return (max(window) - min(window)) > limit * (1.0 + abs(history[0]))


def _degeneracy_warning(spectrum, n_particles, tol):
    if 0 < n_particles < len(spectrum):
        gap = abs(spectrum[n_particles] - spectrum[n_particles - 1])
        if gap < tol:
            return [
                f"DegenerateFermiLevel: |eps[{n_particles}] - eps[{n_particles - 1}]|"
                f" = {gap:.3e}; occupation resolved by index order"
            ]
    return []


# ---------------------------------------------------------------------------
# number-conserving solvers


def _iterate_density(field_fn, energy_fn, dim, n_particles, cfg, task):
    """Shared fixed-point loop: field -> diagonalize -> refill -> mix."""
    rho = _initial_density(field_fn(np.zeros((dim, dim), dtype=complex)), n_particles, cfg, dim)
    history = []
    converged = False
    residual = np.inf
    iterations = 0
    diverged = False
    for iterations in range(1, cfg.max_iter + 1):
        h = field_fn(rho)
        eps, orbitals = eig_hermitian(h)
        rho_new = density_from_orbitals(orbitals, range(n_particles)).array
        residual = float(np.linalg.norm(rho_new - rho))
        history.append(energy_fn(rho_new))
        if _diverged(history, cfg.divergence_limit):
            diverged = True
            break
        if residual <= cfg.density_tol:
            converged = True
            rho = rho_new
            break
        rho = (1.0 - cfg.mixing) * rho + cfg.mixing * rho_new
    # pure rebuild at the final density so the report is an exact projector
    h = field_fn(rho)
    eps, orbitals = eig_hermitian(h)
    rho_final = density_from_orbitals(orbitals, range(n_particles)).array
    energy = energy_fn(rho_final)
    h_final = field_fn(rho_final)
    warnings = _degeneracy_warning(eps, n_particles, cfg.degeneracy_tol)
    if diverged:
        warnings.append("divergence detector tripped: energy window exceeded the limit")
    residuals = {
        "density_change": float(np.linalg.norm(rho_final - rho)),
        "idempotency": idempotency_defect(rho_final),
        "trace_error": abs(float(rho_final.trace().real) - n_particles),
        "commutator": float(np.linalg.norm(h_final @ rho_final - rho_final @ h_final)),
    }
    return SolverReport(
        task=task,
        converged=converged,
        energy=energy,
        iterations=iterations,
        density=rho_final,
        spectrum=eps,
        orbitals=orbitals,
        residuals=residuals,
        warnings=warnings,
        energy_history=history,
    )


def solve_hf(t, vbar, n_particles, cfg: SolverConfig | None = None) -> SolverReport:
    """Mean-field ground state of a two-body hamiltonian, aufbau occupation."""
    cfg = cfg or SolverConfig()
    t = as_matrix(t)
    dim = t.shape[0]
    if not 0 < n_particles <= dim:
        raise DimensionError(f"particle number {n_particles} outside 1..{dim}")
    vbar = np.zeros((dim,) * 4, dtype=complex) if vbar is None else np.asarray(vbar, dtype=complex)
    field_fn = lambda rho: hf_energy_and_field(t, vbar, rho)[1]
    energy_fn = lambda rho: hf_energy_and_field(t, vbar, rho)[0]
    return _iterate_density(field_fn, energy_fn, dim, n_particles, cfg, "solve-hf")


def solve_ks(functional: KSFunctional, n_particles, cfg: SolverConfig | None = None) -> SolverReport:
    """Same skeleton with the field assembled from a partitioned functional."""
    cfg = cfg or SolverConfig()
    dim = functional._dimension_hint()
    if not 0 < n_particles <= dim:
        raise DimensionError(f"particle number {n_particles} outside 1..{dim}")
    field_fn = lambda rho: functional.ks_fields(rho)[3]
    energy_fn = functional.energy
    report = _iterate_density(field_fn, energy_fn, dim, n_particles, cfg, "solve-ks")
    q, lam, _, _ = functional.ks_fields(report.density)
    report.q_values = dict(zip(functional.active, q))
    report.multipliers = dict(zip(functional.active, lam))
    return report


# ---------------------------------------------------------------------------
# quasiparticle solvers


def _bdg_decompose(h, delta, mu):
    """Positive-branch eigenvectors of the doubled hamiltonian at given mu."""
    m = h.shape[0]
    big = np.block(
        [[h - mu * np.eye(m), delta], [-delta.conj(), -(h.conj()) + mu * np.eye(m)]]
    )
    eps, w = eig_hermitian(big)
    # spectrum is symmetric about zero; the upper half is the positive branch
    u = w[:m, m:]
    v = w[m:, m:]
    return eps, eps[m:], u, v


def _particle_number(v):
    return float(np.sum(np.abs(v) ** 2))


def _solve_mu(h, delta, n_target, cfg):
    """Bisection on mu so the vacuum built at (h, delta, mu) holds N particles."""
    eps_h = np.linalg.eigvalsh(h)
    lo = float(eps_h[0] - cfg.mu_bracket_pad)
    hi = float(eps_h[-1] + cfg.mu_bracket_pad)
    trace = []

    def count(mu):
        _, _, _, v = _bdg_decompose(h, delta, mu)
        n = _particle_number(v)
        trace.append((mu, n))
        return n

    n_lo, n_hi = count(lo), count(hi)
    for _ in range(60):
        if n_lo <= n_target <= n_hi:
            break
        span = hi - lo
        if n_lo > n_target:
            lo -= span
            n_lo = count(lo)
        if n_hi < n_target:
            hi += span
            n_hi = count(hi)
    else:
        raise BracketError("mu bracket never straddled the particle number", trace=trace)
    if not n_lo <= n_target <= n_hi:
        raise BracketError("mu bracket never straddled the particle number", trace=trace)
    mu = 0.5 * (lo + hi)
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        n = count(mu)
        if abs(n - n_target) <= cfg.mu_tol:
            return mu
        if n < n_target:
            lo = mu
        else:
            hi = mu
        if hi - lo < 1e-15 * max(1.0, abs(hi) + abs(lo)):
            break
    n = count(mu)
    if abs(n - n_target) <= cfg.mu_tol:
        return mu
    raise BracketError(
        f"particle number jumped across the target (closest {n:.6f} vs {n_target})",
        trace=trace,
    )


def _iterate_pairing(fields_fn, energy_fn, dim, n_particles, cfg, task, pair_partner=None):
    kappa = _initial_kappa(cfg, dim, pair_partner)
    zero = np.zeros((dim, dim), dtype=complex)
    h0 = fields_fn(zero, kappa)[0]
    rho = _initial_density(h0, n_particles, cfg, dim)
    history = []
    converged = False
    diverged = False
    iterations = 0
    mu = 0.0
    for iterations in range(1, cfg.max_iter + 1):
        h, delta = fields_fn(rho, kappa)
        mu = _solve_mu(h, delta, n_particles, cfg)
        _, eps_pos, u, v = _bdg_decompose(h, delta, mu)
        rho_new = v.conj() @ v.T
        kappa_new = v.conj() @ u.T
        residual = max(
            float(np.linalg.norm(rho_new - rho)), float(np.linalg.norm(kappa_new - kappa))
        )
        history.append(energy_fn(rho_new, kappa_new))
        if _diverged(history, cfg.divergence_limit):
            diverged = True
            break
        if residual <= cfg.density_tol:
            converged = True
            rho, kappa = rho_new, kappa_new
            break
        rho = (1.0 - cfg.mixing) * rho + cfg.mixing * rho_new
        kappa = (1.0 - cfg.mixing) * kappa + cfg.mixing * kappa_new
    # pure rebuild: the reported (rho, kappa, W) come from one exact vacuum
    h, delta = fields_fn(rho, kappa)
    mu = _solve_mu(h, delta, n_particles, cfg)
    full_eps, eps_pos, u, v = _bdg_decompose(h, delta, mu)
    rho_fin = hermitize(v.conj() @ v.T)
    kappa_fin = antisymmetrize(v.conj() @ u.T)
    energy = energy_fn(rho_fin, kappa_fin)
    m = dim
    big_r = np.block(
        [[rho_fin, kappa_fin], [-kappa_fin.conj(), np.eye(m) - rho_fin.conj()]]
    )
    warnings = []
    if diverged:
        warnings.append("divergence detector tripped: energy window exceeded the limit")
    if eps_pos.size and eps_pos[0] < cfg.degeneracy_tol:
        warnings.append(
            f"quasiparticle energy {eps_pos[0]:.3e} at the Fermi surface (gapless point)"
        )
    pair_z = None
    try:
        pair_z = condensate_amplitude(BogoliubovTransform(u, v))
    except (SingularU, np.linalg.LinAlgError):
        warnings.append("pair-condensate amplitude unavailable (singular U block)")
    residuals = {
        "density_change": float(np.linalg.norm(rho_fin - rho)),
        "idempotency": float(np.linalg.norm(big_r @ big_r - big_r)),
        "trace_error": abs(float(rho_fin.trace().real) - n_particles),
    }
    return SolverReport(
        task=task,
        converged=converged,
        energy=energy,
        iterations=iterations,
        density=rho_fin,
        spectrum=eps_pos,
        orbitals=np.block([[u, v.conj()], [v, u.conj()]]),
        residuals=residuals,
        warnings=warnings,
        kappa=kappa_fin,
        generalized_density=big_r,
        mu=mu,
        full_spectrum=full_eps,
        pair_condensate=pair_z,
        energy_history=history,
    )


def solve_hfb(t, vbar, n_particles, cfg: SolverConfig | None = None,
              pair_partner=None) -> SolverReport:
    """Quasiparticle vacuum of a two-body hamiltonian at fixed mean N."""
    cfg = cfg or SolverConfig()
    t = as_matrix(t)
    dim = t.shape[0]
    vbar = np.asarray(vbar, dtype=complex)

    def fields_fn(rho, kappa):
        _, h, delta = hfb_energy_and_fields(t, vbar, rho, kappa)
        return h, delta

    def energy_fn(rho, kappa):
        return hfb_energy_and_fields(t, vbar, rho, kappa)[0]

    return _iterate_pairing(fields_fn, energy_fn, dim, n_particles, cfg, "solve-hfb",
                            pair_partner)


def solve_ksbdg(functional: KSFunctional, n_particles, cfg: SolverConfig | None = None,
                pair_partner=None) -> SolverReport:
    """Pairing solver driven by a partitioned functional; the reported kappa
    is an auxiliary quantity of the scheme, not a physical expectation."""
    cfg = cfg or SolverConfig()
    dim = functional._dimension_hint()

    def fields_fn(rho, kappa):
        _, _, h, delta = functional.ksbdg_fields(rho, kappa)
        return h, delta

    def energy_fn(rho, kappa):
        return functional.energy(rho, kappa)

    report = _iterate_pairing(fields_fn, energy_fn, dim, n_particles, cfg, "solve-ksbdg",
                              pair_partner)
    report.kappa_is_auxiliary = True
    q, lam, _, _ = functional.ksbdg_fields(report.density, report.kappa)
    report.q_values = dict(zip(functional.active, q))
    report.multipliers = dict(zip(functional.active, lam))
    return report


def condensate_amplitude(transform, singular_tol: float = 1e-10, return_dropped: bool = False):
    """Pair-condensate amplitude z = (V U^-1)* of a quasiparticle vacuum.

    Exactly singular directions of U correspond to fully occupied canonical
    pairs; they are dropped from z (the vacuum then needs explicit creation
    operators on those modes).  Near-singular but not clean directions raise
    SingularU.
    """
    if isinstance(transform, BogoliubovTransform):
        u, v = transform.u, transform.v
    else:
        u, v = (as_matrix(b) for b in transform)
    p, s, qh = np.linalg.svd(u)
    smax = s.max() if s.size else 0.0
    if smax == 0.0:
        raise SingularU("U block vanishes entirely")
    hard = s < singular_tol * smax
    soft = (s < 1e-6 * smax) & ~hard
    if soft.any():
        raise SingularU(
            f"{int(soft.sum())} near-singular U directions cannot be cleanly dropped"
        )
    inv = np.where(hard, 0.0, 1.0 / np.where(hard, 1.0, s))
    z = (v @ (qh.conj().T * inv) @ p.conj().T).conj()
    z = antisymmetrize(0.5 * (z - z.T))
    dropped = [int(i) for i in np.nonzero(hard)[0]]
    if return_dropped:
        return z, dropped
    return z
