"""Built-in verification suite: the preset battery and the invariant checks
behind the `check` subcommand.

Every check returns (ok, detail); the CLI prints one line per check.  The
battery entries double as the models exercised by the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import edf, fock_oracle, matrixcore, scf, search
from .edf import LatticeModel1D, fd_gradient_check, lattice_functional, repartition
from .errors import NotRepresentable
from .fock_oracle import enumerate_basis, ground_state, hubbard_chain, pairing_hamiltonian
from .matrixcore import eig_hermitian, hermitize, qp_symmetry_defect
from .scf import SolverConfig, solve_hf, solve_hfb, solve_ks, solve_ksbdg


@dataclass(frozen=True)
class BatteryEntry:
    name: str
    kind: str  # hf | ks | hfb | ksbdg
    n_particles: int
    build: callable
    mixing: float = 0.5

    def run(self, **overrides):
        cfg = SolverConfig(mixing=self.mixing, **overrides)
        target = self.build()
        if self.kind == "hf":
            return solve_hf(target.t, target.vbar, self.n_particles, cfg)
        if self.kind == "hfb":
            return solve_hfb(target.t, target.vbar, self.n_particles, cfg)
        if self.kind == "ks":
            return solve_ks(target, self.n_particles, cfg)
        if self.kind == "ksbdg":
            return solve_ksbdg(target, self.n_particles, cfg)
        raise ValueError(self.kind)


def _lattice20():
    return lattice_functional(LatticeModel1D.harmonic(20, spring=0.03))


def _lattice20_kinetic_q():
    return lattice_functional(LatticeModel1D.harmonic(20, spring=0.03),
                              active="density+kinetic")


def _lattice12_paired():
    return lattice_functional(LatticeModel1D.harmonic(12, spring=0.05),
                              pairing_strength=1.0)


BATTERY = (
    BatteryEntry("hf/hubbard-dimer", "hf", 2, lambda: hubbard_chain(2, 1.0, 4.0)),
    BatteryEntry("hf/hubbard-chain-4", "hf", 4, lambda: hubbard_chain(4, 1.0, 2.0)),
    BatteryEntry("hf/hubbard-chain-6", "hf", 6, lambda: hubbard_chain(6, 1.0, 4.0)),
    BatteryEntry("hfb/pairing-2level", "hfb", 2, lambda: pairing_hamiltonian(2, 1.0, 1.5)),
    BatteryEntry("hfb/pairing-4level", "hfb", 4, lambda: pairing_hamiltonian(4, 1.0, 0.8)),
    BatteryEntry("ks/lattice-20", "ks", 3, _lattice20),
    BatteryEntry("ks/lattice-20-kinetic-q", "ks", 3, _lattice20_kinetic_q),
    BatteryEntry("ks/hf-dimer-functional", "ks", 2,
                 lambda: edf.hf_from_hamiltonian(hubbard_chain(2, 1.0, 4.0))),
    BatteryEntry("ksbdg/lattice-12-paired", "ksbdg", 4, _lattice12_paired, mixing=0.4),
    BatteryEntry("ksbdg/hfb-pairing-functional", "ksbdg", 2,
                 lambda: edf.hfb_from_hamiltonian(pairing_hamiltonian(2, 1.0, 1.5))),
)


GRADIENT_PRESETS = (
    ("hf-dimer", lambda: edf.hf_from_hamiltonian(hubbard_chain(2, 1.0, 4.0)), False),
    ("hf-chain-4", lambda: edf.hf_from_hamiltonian(hubbard_chain(4, 1.0, 2.0)), False),
    ("hfb-pairing-4level", lambda: edf.hfb_from_hamiltonian(pairing_hamiltonian(4, 1.0, 0.8)), True),
    ("lattice-20", _lattice20, False),
    ("lattice-20-kinetic-q", _lattice20_kinetic_q, False),
    ("lattice-12-paired", _lattice12_paired, True),
)


def random_interior_density(dim, rng, lo=0.1, hi=0.9):
    """Hermitian matrix with eigenvalues strictly inside the Pauli window."""
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    _, vecs = np.linalg.eigh(hermitize(raw))
    return vecs @ np.diag(rng.uniform(lo, hi, dim)) @ vecs.conj().T


def random_pairing_tensor(dim, rng, scale=0.05):
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return matrixcore.antisymmetrize(scale * (raw - raw.T))


def check_eigensolver(seed=42):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        a = hermitize(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        vals, vecs = eig_hermitian(a)
        vals2, vecs2 = eig_hermitian(a)
        if not (np.array_equal(vals, vals2) and np.array_equal(vecs, vecs2)):
            return False, "repeated decompositions differ"
        worst = max(worst, np.linalg.norm(vecs @ np.diag(vals) @ vecs.conj().T - a))
        if np.any(np.diff(vals) < -1e-12):
            return False, "eigenvalues not ascending"
    return worst <= 1e-12, f"max reconstruction error {worst:.2e}"


def check_gradients(points=10, seed=42, tol=1e-6):
    worst_named = ("", 0.0)
    for name, build, pairing in GRADIENT_PRESETS:
        functional = build()
        dim = functional._dimension_hint()
        rng = np.random.default_rng(seed)
        for _ in range(points):
            rho = random_interior_density(dim, rng)
            kappa = random_pairing_tensor(dim, rng) if pairing else None
            err = fd_gradient_check(functional, rho, kappa)
            if err > worst_named[1]:
                worst_named = (name, err)
    ok = worst_named[1] <= tol
    return ok, f"worst {worst_named[1]:.2e} ({worst_named[0]})"


def check_battery(reports=None):
    reports = reports if reports is not None else [(e, e.run()) for e in BATTERY]
    for entry, rep in reports:
        if not rep.converged:
            return False, f"{entry.name} did not converge"
        if entry.kind in ("hf", "ks"):
            if rep.residuals["idempotency"] > 1e-8:
                return False, f"{entry.name}: idempotency {rep.residuals['idempotency']:.2e}"
            if rep.residuals["commutator"] > 1e-7:
                return False, f"{entry.name}: [h,rho] {rep.residuals['commutator']:.2e}"
        else:
            if rep.residuals["idempotency"] > 1e-8:
                return False, f"{entry.name}: R^2-R {rep.residuals['idempotency']:.2e}"
            if rep.residuals["trace_error"] > 1e-8:
                return False, f"{entry.name}: trace {rep.residuals['trace_error']:.2e}"
            full = rep.full_spectrum
            m = len(full) // 2
            pairing_defect = np.abs(np.sort(np.abs(full[:m])) - full[m:]).max()
            if pairing_defect > 1e-10:
                return False, f"{entry.name}: +-eps defect {pairing_defect:.2e}"
    return True, f"{len(reports)} solver runs clean"


def check_oracle_bounds():
    details = []
    for build, n in (
        (lambda: hubbard_chain(2, 1.0, 4.0), 2),
        (lambda: hubbard_chain(4, 1.0, 2.0), 4),
        (lambda: hubbard_chain(6, 1.0, 4.0), 6),
        (lambda: pairing_hamiltonian(2, 1.0, 1.5), 2),
        (lambda: pairing_hamiltonian(4, 1.0, 0.5), 4),
    ):
        ham = build()
        rep = solve_hf(ham.t, ham.vbar, n)
        e0, _ = ground_state(ham, enumerate_basis(ham.num_orbitals, "fixed", n))
        if rep.energy < e0 - 1e-9:
            return False, f"variational bound broken: {rep.energy} < {e0}"
        details.append(rep.energy - e0)
    # non-interacting exactness
    ham0 = hubbard_chain(3, 1.0, 0.0)
    rep = solve_hf(ham0.t, ham0.vbar, 3)
    exact = float(np.sort(np.linalg.eigvalsh(ham0.t))[:3].sum())
    if abs(rep.energy - exact) > 1e-12:
        return False, f"non-interacting energy off by {abs(rep.energy - exact):.2e}"
    return True, f"min correlation energy {min(details):.3e}"


def check_repartition(seed=42):
    base = _lattice20()
    alt = repartition(base, [f"xi[{x}]" for x in range(19)], "to_regular")
    folded = repartition(base, list(base.active), "to_irregular")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        rho = random_interior_density(20, rng, lo=0.0, hi=1.0)
        e = base.energy(rho)
        worst = max(worst, abs(e - alt.energy(rho)), abs(e - folded.energy(rho)))
    if worst > 1e-12:
        return False, f"composed energies differ by {worst:.2e}"
    r1 = solve_ks(base, 3)
    r2 = solve_ks(alt, 3)
    de = abs(r1.energy - r2.energy)
    drho = float(np.linalg.norm(r1.density - r2.density))
    ok = de <= 1e-10 and drho <= 1e-8
    return ok, f"pointwise {worst:.1e}, solved dE {de:.1e}, drho {drho:.1e}"


def check_appendix():
    for d in (0.5, 1.0, 2.0):
        bundle = search.appendix_scan(d)
        y_min, value = bundle["minimum"]
        if abs(value - (-27.0 * d ** 4)) > 1e-10 * d ** 4:
            return False, f"d={d}: minimum {value}"
        if abs(abs(y_min) - 2.0 * d) > 1e-3 * d:
            return False, f"d={d}: argmin {y_min}"
        locs = sorted(bundle["kinks"].locations)
        if len(locs) != 3 or np.abs(np.array(locs) - np.array([-3 * d, 0, 3 * d])).max() > 1e-4 * d:
            return False, f"d={d}: kinks at {locs}"
    return True, "min -27 d^4 at |y|=2d; kinks at {-3d, 0, 3d}"


def check_two_level_line():
    t = np.diag([-1.0, 1.0])
    ham = fock_oracle.TwoBodyHamiltonian(t)
    basis = enumerate_basis(2, "fixed", 1)
    var = edf.site_density(0, 2)
    worst = 0.0
    for q in (0.0, 0.25, 0.5, 0.75, 1.0):
        energy, _, _ = fock_oracle.constrained_search(ham, basis, [var], [q])
        worst = max(worst, abs(energy - (1.0 - 2.0 * q)))
    return worst <= 1e-6, f"max deviation from the linear landscape {worst:.2e}"


def check_probe():
    rng = np.random.default_rng(11)
    raw = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q_mat, _ = np.linalg.qr(raw)
    rho_slater = q_mat[:, :2] @ q_mat[:, :2].conj().T
    variables = edf.full_matrix_variables(4)

    def targets_of(rho):
        return [rho[_parse(v.label)] for v in variables]

    res = search.ks_representability_probe(variables, targets_of(rho_slater), 4, 2)
    if not res.feasible or res.residual > 1e-8:
        return False, f"slater target residual {res.residual:.2e}"
    ham = hubbard_chain(2, 1.0, 4.0)
    _, psi0 = ground_state(ham, enumerate_basis(4, "fixed", 2))
    rho_corr = fock_oracle.one_body_density(psi0).array
    res = search.ks_representability_probe(variables, targets_of(rho_corr), 4, 2)
    if res.feasible or min(res.restart_residuals) < 1e-3:
        return False, f"correlated target resolved as feasible ({res.residual:.2e})"
    return True, f"slater reachable, correlated blocked at {res.residual:.3f}"


def _parse(label):
    k, l = label[4:-1].split(",")
    return int(k), int(l)


def check_qp_symmetry(seed=42):
    rng = np.random.default_rng(seed)
    for _ in range(5):
        m = 4
        h = hermitize(rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))
        delta = matrixcore.antisymmetrize(rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))
        mu = rng.standard_normal()
        big = np.block([[h - mu * np.eye(m), delta], [-delta.conj(), -h.conj() + mu * np.eye(m)]])
        if qp_symmetry_defect(big) > 1e-12:
            return False, "assembled doubled hamiltonian breaks the swap symmetry"
        eps, w = eig_hermitian(big)
        if np.abs(np.sort(np.abs(eps[:m])) - eps[m:]).max() > 1e-10:
            return False, "spectrum not symmetric about zero"
    return True, "swap symmetry and +-eps pairing hold"


CHECKS = (
    ("eigensolver", check_eigensolver),
    ("gradient-consistency", check_gradients),
    ("solver-battery", check_battery),
    ("oracle-bounds", check_oracle_bounds),
    ("repartition-equivalence", check_repartition),
    ("appendix-demo", check_appendix),
    ("two-level-landscape", check_two_level_line),
    ("representability-probe", check_probe),
    ("qp-symmetry", check_qp_symmetry),
)


def run_checks(names=None):
    """Run the invariant suite; yields (name, ok, detail)."""
    selected = CHECKS if not names else [c for c in CHECKS if c[0] in set(names)]
    results = []
    for name, fn in selected:
        try:
            ok, detail = fn()
        except NotRepresentable as err:
            ok, detail = False, f"unexpected infeasibility: {err}"
        except Exception as err:  # a check must never crash the suite
            ok, detail = False, f"{type(err).__name__}: {err}"
        results.append((name, bool(ok), detail))
    return results
