"""Exact many-body ground truth on small Fock spaces.

Bit-string occupation bases, dense second-quantized hamiltonians, reduced
density matrices and correlation functions from full wave-functions, and a
literal constrained search (quadratic penalty, multi-start projected gradient
descent on the unit sphere).

Conventions: orbital k occupies bit k of a basis word; operators pick up the
parity of the occupied orbitals below their index.  The one-body part is
sum_{kl} t_{kl} a+_k a_l, the two-body part (1/4) sum V_{kk'll'} a+_k a+_k'
a_l' a_l with fully antisymmetrized coefficients, so a state's energy equals
tr(t rho) plus the usual direct/exchange and pairing contractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    DimensionError,
    InvalidMatrix,
    NotRepresentable,
    SectorError,
    TooLarge,
)
from .matrixcore import DensityMatrix, PairingTensor, as_matrix, hermitize

FULL_SECTOR_MAX_ORBITALS = 16
FIXED_SECTOR_MAX_STATES = 65536
DENSE_DIAG_MAX_STATES = 4096

_popcount = np.bitwise_count


def _parity_sign(words, orbital):
    """(-1)^(number of occupied orbitals below `orbital`), vectorized."""
    below = words & ((np.int64(1) << orbital) - 1)
    return 1 - 2 * (_popcount(below).astype(np.int64) & 1)


def _parity_sign_int(word: int, orbital: int) -> int:
    return 1 - 2 * (int(word & ((1 << orbital) - 1)).bit_count() & 1)


@dataclass(frozen=True)
class FockBasis:
    """Ordered occupation-number basis, either fixed-N or the full 2^M space."""

    num_orbitals: int
    sector: str
    particle_number: int | None
    words: np.ndarray

    @property
    def size(self) -> int:
        return len(self.words)

    def index_of(self, words):
        idx = np.searchsorted(self.words, words)
        return idx

    def occupations(self, state_index: int) -> tuple:
        w = int(self.words[state_index])
        return tuple(k for k in range(self.num_orbitals) if (w >> k) & 1)


def enumerate_basis(num_orbitals: int, sector: str = "fixed", particle_number=None) -> FockBasis:
    """All occupation words of the requested sector, strictly increasing."""
    m = int(num_orbitals)
    if m < 1:
        raise DimensionError("need at least one orbital")
    if sector == "full":
        if m > FULL_SECTOR_MAX_ORBITALS:
            raise TooLarge(f"full sector capped at M={FULL_SECTOR_MAX_ORBITALS}")
        words = np.arange(2 ** m, dtype=np.int64)
        return FockBasis(m, "full", None, _ro(words))
    if sector != "fixed":
        raise SectorError(f"unknown sector {sector!r}")
    if particle_number is None:
        raise SectorError("fixed sector needs a particle number")
    n = int(particle_number)
    if not 0 <= n <= m:
        raise DimensionError(f"particle number {n} outside 0..{m}")
    if math.comb(m, n) > FIXED_SECTOR_MAX_STATES:
        raise TooLarge(f"C({m},{n}) exceeds the fixed-sector cap {FIXED_SECTOR_MAX_STATES}")
    words = np.sort(
        np.fromiter(
            (sum(1 << k for k in combo) for combo in combinations(range(m), n)),
            dtype=np.int64,
            count=math.comb(m, n),
        )
    )
    return FockBasis(m, "fixed", n, _ro(words))


def _ro(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ManyBodyState:
    """Amplitude vector over a Fock basis."""

    basis: FockBasis
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.size,):
            raise DimensionError("amplitude vector does not match the basis size")
        if self.normalized and abs(np.vdot(amps, amps).real - 1.0) > 1e-12:
            raise InvalidMatrix("state flagged normalized but <psi|psi> != 1")
        object.__setattr__(self, "amplitudes", _ro(amps.copy()))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "ManyBodyState":
        n = self.norm
        if n == 0.0:
            raise InvalidMatrix("cannot normalize the zero state")
        return ManyBodyState(self.basis, self.amplitudes / n, normalized=True)

    def phase_fixed(self) -> "ManyBodyState":
        amps = self.amplitudes
        lead = amps[np.abs(amps).argmax()]
        if abs(lead) > 0:
            amps = amps * (abs(lead) / lead)
        return ManyBodyState(self.basis, amps, normalized=self.normalized)


def _require_normalized(psi: ManyBodyState):
    if abs(np.vdot(psi.amplitudes, psi.amplitudes).real - 1.0) > 1e-12:
        raise InvalidMatrix("operation requires a normalized state")


class TwoBodyHamiltonian:
    """One-body matrix t plus antisymmetrized two-body coefficients V.

    V_{kk'll'} = -V_{k'kll'} = -V_{kk'l'l} = conj(V_{ll'kk'}), checked
    entrywise at construction.
    """

    __slots__ = ("t", "vbar", "_entries")

    def __init__(self, t, vbar=None, tol: float = 1e-14):
        t = as_matrix(t)
        if not np.all(np.isfinite(t.view(float))):
            raise InvalidMatrix("one-body matrix has non-finite entries")
        if np.abs(t - t.conj().T).max() > 1e-12 * max(1.0, np.abs(t).max()):
            raise InvalidMatrix("one-body matrix must be hermitian")
        m = t.shape[0]
        if vbar is None:
            vbar = np.zeros((m, m, m, m), dtype=complex)
        vbar = np.asarray(vbar, dtype=complex)
        if vbar.shape != (m, m, m, m):
            raise DimensionError("two-body tensor must be M^4")
        scale = max(1.0, np.abs(vbar).max())
        for defect, what in (
            (np.abs(vbar + vbar.transpose(1, 0, 2, 3)).max(), "antisymmetry in (k,k')"),
            (np.abs(vbar + vbar.transpose(0, 1, 3, 2)).max(), "antisymmetry in (l,l')"),
            (np.abs(vbar - vbar.transpose(2, 3, 0, 1).conj()).max(), "hermiticity"),
        ):
            if defect > tol * scale:
                raise InvalidMatrix(f"two-body tensor violates {what} by {defect:.3e}")
        self.t = _ro(hermitize(t))
        self.vbar = _ro(vbar.copy())
        self._entries = None

    @classmethod
    def from_entries(cls, t, entries, tol: float = 1e-14):
        """Build the dense tensor from canonical entries (k, k', l, l', value).

        All antisymmetry/hermiticity images are filled in; conflicting
        assignments raise.
        """
        t = as_matrix(t)
        m = t.shape[0]
        assigned: dict = {}

        def put(k, kp, l, lp, v):
            key = (k, kp, l, lp)
            if key in assigned and abs(assigned[key] - v) > tol * max(1.0, abs(v)):
                raise InvalidMatrix(f"conflicting two-body assignment at {key}")
            assigned[key] = v

        for k, kp, l, lp, v in entries:
            k, kp, l, lp = int(k), int(kp), int(l), int(lp)
            if len({k, kp}) < 2 or len({l, lp}) < 2:
                raise InvalidMatrix("two-body entry needs distinct creation and annihilation pairs")
            v = complex(v)
            for (a, b, sa) in ((k, kp, 1), (kp, k, -1)):
                for (c, d, sc) in ((l, lp, 1), (lp, l, -1)):
                    put(a, b, c, d, sa * sc * v)
                    put(c, d, a, b, sa * sc * np.conj(v))
        vbar = np.zeros((m, m, m, m), dtype=complex)
        for (k, kp, l, lp), v in assigned.items():
            vbar[k, kp, l, lp] = v
        return cls(t, vbar, tol=tol)

    @property
    def num_orbitals(self) -> int:
        return self.t.shape[0]

    @property
    def entries(self):
        """Canonical nonzero two-body entries with k<k' and l<l'."""
        if self._entries is None:
            m = self.num_orbitals
            out = []
            for k in range(m):
                for kp in range(k + 1, m):
                    block = self.vbar[k, kp]
                    for l in range(m):
                        for lp in range(l + 1, m):
                            v = block[l, lp]
                            if v != 0:
                                out.append((k, kp, l, lp, v))
            self._entries = tuple(out)
        return self._entries

    def shifted(self, mu: float) -> "TwoBodyHamiltonian":
        """Same interaction with t -> t - mu * 1 (grand-canonical shift)."""
        return TwoBodyHamiltonian(self.t - mu * np.eye(self.num_orbitals), self.vbar)


# ---------------------------------------------------------------------------
# dense matrix representation and ground states


def hamiltonian_matrix(ham: TwoBodyHamiltonian, basis: FockBasis) -> np.ndarray:
    """Dense matrix of the hamiltonian on the basis (column = source word)."""
    if basis.size > DENSE_DIAG_MAX_STATES:
        raise TooLarge(f"dense build capped at {DENSE_DIAG_MAX_STATES} states")
    if basis.num_orbitals != ham.num_orbitals:
        raise DimensionError("basis and hamiltonian orbital counts differ")
    words = basis.words
    lookup = {int(w): i for i, w in enumerate(words)}
    dim = basis.size
    out = np.zeros((dim, dim), dtype=complex)
    tnz = [(k, l, ham.t[k, l]) for k in range(ham.num_orbitals)
           for l in range(ham.num_orbitals) if ham.t[k, l] != 0]
    for j, w in enumerate(map(int, words)):
        for k, l, v in tnz:
            if not (w >> l) & 1:
                continue
            s = _parity_sign_int(w, l)
            w1 = w ^ (1 << l)
            if (w1 >> k) & 1:
                continue
            s *= _parity_sign_int(w1, k)
            out[lookup[w1 | (1 << k)], j] += v * s
        for k, kp, l, lp, v in ham.entries:
            if not ((w >> l) & 1 and (w >> lp) & 1):
                continue
            s = _parity_sign_int(w, l)
            w1 = w ^ (1 << l)
            s *= _parity_sign_int(w1, lp)
            w2 = w1 ^ (1 << lp)
            if (w2 >> kp) & 1:
                continue
            s *= _parity_sign_int(w2, kp)
            w3 = w2 | (1 << kp)
            if (w3 >> k) & 1:
                continue
            s *= _parity_sign_int(w3, k)
            out[lookup[w3 | (1 << k)], j] += v * s
    return out


def apply_hamiltonian(ham: TwoBodyHamiltonian, psi: ManyBodyState) -> ManyBodyState:
    """H |psi> on the state's own basis."""
    mat = hamiltonian_matrix(ham, psi.basis)
    return ManyBodyState(psi.basis, mat @ psi.amplitudes)


def ground_state(ham: TwoBodyHamiltonian, basis: FockBasis):
    """Lowest eigenpair by dense diagonalization; the state is phase-fixed."""
    mat = hamiltonian_matrix(ham, basis)
    vals, vecs = np.linalg.eigh(mat)
    psi = ManyBodyState(basis, vecs[:, 0], normalized=True).phase_fixed()
    return float(vals[0]), psi


def expectation(ham: TwoBodyHamiltonian, psi: ManyBodyState) -> float:
    mat = hamiltonian_matrix(ham, psi.basis)
    amps = psi.amplitudes
    return float((np.vdot(amps, mat @ amps) / np.vdot(amps, amps)).real)


# ---------------------------------------------------------------------------
# reduced densities


def one_body_density(psi: ManyBodyState) -> DensityMatrix:
    """rho_{kl} = <a+_l a_k>, hermitian with Pauli-bounded spectrum."""
    _require_normalized(psi)
    basis, amps = psi.basis, psi.amplitudes
    words = basis.words
    m = basis.num_orbitals
    rho = np.zeros((m, m), dtype=complex)
    occ = [((words >> k) & 1).astype(bool) for k in range(m)]
    for k in range(m):
        rho[k, k] = np.sum(np.abs(amps[occ[k]]) ** 2)
        for l in range(m):
            if l == k:
                continue
            sel = occ[k] & ~occ[l]
            if not sel.any():
                continue
            src = words[sel]
            sign = _parity_sign(src, k)
            mid = src ^ (np.int64(1) << k)
            sign = sign * _parity_sign(mid, l)
            dst = mid | (np.int64(1) << l)
            rho[k, l] = np.sum(amps[basis.index_of(dst)].conj() * amps[sel] * sign)
    n = basis.particle_number if basis.sector == "fixed" else None
    return DensityMatrix(hermitize(rho), particle_number=n)


def pairing_tensor_of(psi: ManyBodyState) -> PairingTensor:
    """kappa_{kl} = <a_l a_k>; needs the full (number-nonconserving) sector."""
    if psi.basis.sector != "full":
        raise SectorError("pairing tensor needs the full Fock sector")
    _require_normalized(psi)
    basis, amps = psi.basis, psi.amplitudes
    words = basis.words
    m = basis.num_orbitals
    kap = np.zeros((m, m), dtype=complex)
    for k in range(m):
        for l in range(k + 1, m):
            sel = (((words >> k) & 1) & ((words >> l) & 1)).astype(bool)
            if not sel.any():
                continue
            src = words[sel]
            sign = _parity_sign(src, k)
            mid = src ^ (np.int64(1) << k)
            sign = sign * _parity_sign(mid, l)
            dst = mid ^ (np.int64(1) << l)
            kap[k, l] = np.sum(amps[basis.index_of(dst)].conj() * amps[sel] * sign)
    return PairingTensor(kap - kap.T)


def two_body_correlation(psi: ManyBodyState) -> np.ndarray:
    """Connected two-body correlation tensor C_{kk'll'}.

    C = <a+_l a+_l' a_k' a_k> - rho_{kl} rho_{k'l'} + rho_{kl'} rho_{k'l};
    zero entrywise on any Slater determinant.
    """
    _require_normalized(psi)
    basis, amps = psi.basis, psi.amplitudes
    m = basis.num_orbitals
    words = basis.words
    if basis.sector == "fixed":
        if basis.particle_number < 2:
            return np.zeros((m, m, m, m), dtype=complex)
        aux = enumerate_basis(m, "fixed", basis.particle_number - 2)
    else:
        aux = basis
    pairs = [(p, q) for p in range(m) for q in range(p + 1, m)]
    x = np.zeros((len(pairs), aux.size), dtype=complex)
    for ip, (p, q) in enumerate(pairs):
        sel = (((words >> p) & 1) & ((words >> q) & 1)).astype(bool)
        if not sel.any():
            continue
        src = words[sel]
        sign = _parity_sign(src, p)
        mid = src ^ (np.int64(1) << p)
        sign = sign * _parity_sign(mid, q)
        dst = mid ^ (np.int64(1) << q)
        np.add.at(x, (ip, aux.index_of(dst)), amps[sel] * sign)
    overlap = x.conj() @ x.T  # overlap[lpair, kpair] = <chi_ll' | chi_kk'>
    gamma2 = np.zeros((m, m, m, m), dtype=complex)
    for ik, (k, kp) in enumerate(pairs):
        for il, (l, lp) in enumerate(pairs):
            g = overlap[il, ik]
            gamma2[k, kp, l, lp] = g
            gamma2[kp, k, l, lp] = -g
            gamma2[k, kp, lp, l] = -g
            gamma2[kp, k, lp, l] = g
    rho = one_body_density(psi).array
    c2 = gamma2 - np.einsum("kl,KL->kKlL", rho, rho) + np.einsum("kL,Kl->kKlL", rho, rho)
    return c2


def pair_condensate_state(z, normalize: bool = True) -> ManyBodyState:
    """exp(1/2 sum z_{kl} a+_k a+_l) |0> expanded on the full sector."""
    z = as_matrix(z)
    m = z.shape[0]
    basis = enumerate_basis(m, "full")
    words = basis.words
    pair_terms = [(k, l, z[k, l]) for k in range(m) for l in range(k + 1, m) if z[k, l] != 0]

    def apply_z(vec):
        out = np.zeros_like(vec)
        for k, l, v in pair_terms:
            sel = (~((words >> k) & 1).astype(bool)) & (~((words >> l) & 1).astype(bool))
            src = words[sel]
            # a+_k a+_l: the l-th creator acts first
            sign = _parity_sign(src, l)
            mid = src | (np.int64(1) << l)
            sign = sign * _parity_sign(mid, k)
            dst = mid | (np.int64(1) << k)
            np.add.at(out, basis.index_of(dst), v * sign * vec[sel])
        return out

    amps = np.zeros(basis.size, dtype=complex)
    amps[0] = 1.0
    term = amps.copy()
    for order in range(1, m // 2 + 1):
        term = apply_z(term) / order
        if not np.any(term):
            break
        amps = amps + term
    state = ManyBodyState(basis, amps)
    return state.normalize() if normalize else state


# ---------------------------------------------------------------------------
# model presets and file format


def hubbard_chain(length: int, hopping: float = 1.0, onsite: float = 4.0,
                  periodic: bool = False) -> TwoBodyHamiltonian:
    """Open (default) spin-1/2 chain; orbital index = 2*site + spin."""
    if length < 1:
        raise DimensionError("need at least one site")
    m = 2 * length
    t = np.zeros((m, m), dtype=complex)
    bonds = [(i, i + 1) for i in range(length - 1)]
    if periodic and length > 2:
        bonds.append((length - 1, 0))
    for i, j in bonds:
        for s in (0, 1):
            t[2 * i + s, 2 * j + s] = -hopping
            t[2 * j + s, 2 * i + s] = -hopping
    entries = [(2 * i, 2 * i + 1, 2 * i, 2 * i + 1, onsite) for i in range(length)]
    return TwoBodyHamiltonian.from_entries(t, entries)


def pairing_hamiltonian(levels: int, spacing: float = 1.0,
                        strength: float = 0.5) -> TwoBodyHamiltonian:
    """Picket-fence pairing model: doubly degenerate levels eps_j = j*spacing,
    attractive pair scattering of strength G between time-reversal partners
    (2j, 2j+1)."""
    if levels < 1:
        raise DimensionError("need at least one level")
    m = 2 * levels
    t = np.diag(np.repeat(spacing * np.arange(levels), 2)).astype(complex)
    entries = [
        (2 * j, 2 * j + 1, 2 * jp, 2 * jp + 1, -strength)
        for j in range(levels)
        for jp in range(levels)
    ]
    return TwoBodyHamiltonian.from_entries(t, entries)


def hamiltonian_from_config(cfg: dict) -> TwoBodyHamiltonian:
    """Hamiltonian from a definition mapping.

    Either a preset ({"preset": "hubbard_chain", "L": 6, "tau": 1, "U": 4} or
    {"preset": "pairing", "levels": 4, "spacing": 1, "G": 0.5}) or explicit
    fields: M, t (dense rows or {"diagonal": [...]}), V (list of
    [k, k', l, l', value], 0-based).
    """
    cfg = dict(cfg)
    preset = cfg.pop("preset", None)
    if preset == "hubbard_chain":
        return hubbard_chain(int(cfg.pop("L")), float(cfg.pop("tau", 1.0)),
                             float(cfg.pop("U", 4.0)), bool(cfg.pop("periodic", False)))
    if preset == "pairing":
        return pairing_hamiltonian(int(cfg.pop("levels")), float(cfg.pop("spacing", 1.0)),
                                   float(cfg.pop("G", 0.5)))
    if preset is not None:
        raise SectorError(f"unknown hamiltonian preset {preset!r}")
    m = int(cfg.pop("M"))
    t_spec = cfg.pop("t", None)
    if t_spec is None:
        t = np.zeros((m, m), dtype=complex)
    elif isinstance(t_spec, dict) and "diagonal" in t_spec:
        t = np.diag(np.asarray(t_spec["diagonal"], dtype=complex))
    else:
        t = np.asarray(t_spec, dtype=complex)
    entries = [tuple(e) for e in cfg.pop("V", [])]
    return TwoBodyHamiltonian.from_entries(t, entries)


# ---------------------------------------------------------------------------
# constrained search


@dataclass(frozen=True)
class SearchOptions:
    """Tunable knobs of the penalty search; defaults match the documented
    schedule {1e1..1e6} with 8 seeded restarts."""

    seed: int = 42
    restarts: int = 8
    penalty_schedule: tuple = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)
    max_iter: int = 250
    grad_tol: float = 1e-10
    feasibility_tol: float = 1e-5
    include_ground_start: bool = True
    extra_starts: tuple = ()


def density_operator_tensor(basis: FockBasis, memory_cap_bytes: int = 256_000_000) -> np.ndarray:
    """O[k, l] with rho_{kl}(psi) = psi^dag O[k,l] psi, dense."""
    m = basis.num_orbitals
    dim = basis.size
    need = 16 * m * m * dim * dim
    if need > memory_cap_bytes:
        raise TooLarge(f"density operator tensor would take {need} bytes")
    words = basis.words
    out = np.zeros((m, m, dim, dim), dtype=complex)
    occ = [((words >> k) & 1).astype(bool) for k in range(m)]
    cols = np.arange(dim)
    for k in range(m):
        out[k, k][occ[k], occ[k]] = 1.0
        for l in range(m):
            if l == k:
                continue
            sel = occ[k] & ~occ[l]
            if not sel.any():
                continue
            src = words[sel]
            sign = _parity_sign(src, k)
            mid = src ^ (np.int64(1) << k)
            sign = sign * _parity_sign(mid, l)
            dst = basis.index_of(mid | (np.int64(1) << l))
            out[k, l][dst, cols[sel]] = sign
    return out


class _PenaltyProblem:
    """Objective <psi|H|psi> + mu * sum_A |Q_A(rho(psi)) - q_A|^2 on the sphere.

    Linear variables are lowered to state-space operators once, so a step of
    the optimizer costs a handful of matrix-vector products; the full density
    matrix is only assembled for nonlinear variables.
    """

    def __init__(self, ham, basis, variables, targets):
        self.h = hamiltonian_matrix(ham, basis)
        self.ops = density_operator_tensor(basis)
        self.m = basis.num_orbitals
        dim = basis.size
        self._ops_flat = self.ops.reshape(self.m * self.m * dim, dim)
        self.variables = list(variables)
        self.targets = np.asarray(targets, dtype=complex)
        if len(self.variables) != len(self.targets):
            raise DimensionError("one target per variable required")
        zero = np.zeros((self.m, self.m), dtype=complex)
        self._fixed_ops = []
        for var in self.variables:
            if getattr(var, "is_linear", False):
                d = np.asarray(var.derivative(zero), dtype=complex)
                self._fixed_ops.append(np.einsum("kl,lkab->ab", d, self.ops))
            else:
                self._fixed_ops.append(None)
        self._all_linear = all(op is not None for op in self._fixed_ops)

    def density(self, psi):
        dim = len(psi)
        tmp = (self._ops_flat @ psi).reshape(self.m * self.m, dim)
        return (tmp @ psi.conj()).reshape(self.m, self.m)

    def q_values(self, psi, rho=None):
        if self._all_linear and rho is None:
            return np.array([np.vdot(psi, op @ psi) for op in self._fixed_ops])
        rho = self.density(psi) if rho is None else rho
        return np.array([complex(v.evaluator(rho)) for v in self.variables])

    def _operators_at(self, psi):
        if self._all_linear:
            return self._fixed_ops
        rho = self.density(psi)
        ops = []
        for var, fixed in zip(self.variables, self._fixed_ops):
            if fixed is not None:
                ops.append(fixed)
            else:
                dm = np.asarray(var.derivative(rho), dtype=complex)
                ops.append(np.einsum("kl,lkab->ab", dm, self.ops))
        return ops

    def value_and_grad(self, psi, mu):
        qs = self.q_values(psi)
        dq = qs - self.targets
        hpsi = self.h @ psi
        energy = float(np.vdot(psi, hpsi).real)
        grad = hpsi.copy()
        for op, d in zip(self._operators_at(psi), dq):
            if d == 0:
                continue
            grad += mu * (np.conj(d) * (op @ psi) + d * (op.conj().T @ psi))
        value = energy + mu * float(np.sum(np.abs(dq) ** 2))
        return value, grad, energy, dq

    def value(self, psi, mu):
        dq = self.q_values(psi) - self.targets
        energy = float(np.vdot(psi, self.h @ psi).real)
        return energy + mu * float(np.sum(np.abs(dq) ** 2))


def _normalize(vec):
    return vec / np.linalg.norm(vec)


def _legendre_start(problem, target):
    """Deterministic warm start for a single linear variable: ground state of
    H + lam * Q with lam bisected until <Q> brackets the target."""
    if len(problem.variables) != 1 or problem._fixed_ops[0] is None:
        return None
    op = problem._fixed_ops[0]
    if np.abs(op - op.conj().T).max() > 1e-10 * max(1.0, np.abs(op).max()):
        return None
    target = float(np.real(target))
    h = problem.h
    span = max(1.0, float(np.linalg.norm(h, 2)))
    reach = max(1e-6, float(np.linalg.norm(op, 2)))
    lam_max = 50.0 * span / reach

    def ground_q(lam):
        vals, vecs = np.linalg.eigh(h + lam * op)
        psi = vecs[:, 0]
        return psi, float(np.vdot(psi, op @ psi).real)

    lo, hi = -lam_max, lam_max
    psi, _ = ground_q(0.0)
    for _ in range(80):
        lam = 0.5 * (lo + hi)
        psi, q = ground_q(lam)
        # <Q> is nonincreasing in lam for the minimizing eigenstate
        if q > target:
            lo = lam
        else:
            hi = lam
    return psi


def _sphere_minimize(problem, psi0, mu, max_iter, grad_tol):
    psi = _normalize(psi0)
    step = 0.1
    value, grad, _, _ = problem.value_and_grad(psi, mu)
    stall = 0
    for _ in range(max_iter):
        tangent = grad - psi * np.vdot(psi, grad).real
        gnorm = np.linalg.norm(tangent)
        if gnorm <= grad_tol * (1.0 + abs(value)):
            break
        accepted = False
        for _ in range(40):
            trial = _normalize(psi - step * tangent)
            trial_value = problem.value(trial, mu)
            if trial_value <= value - 1e-4 * step * gnorm ** 2:
                # a long plateau means the stage is converged to rounding
                stall = stall + 1 if value - trial_value <= 1e-15 * (1.0 + abs(value)) else 0
                psi = trial
                value, grad, _, _ = problem.value_and_grad(psi, mu)
                step = min(step * 1.3, 1e3)
                accepted = True
                break
            step *= 0.5
        if not accepted or stall >= 5:
            break
    return psi


def constrained_search(ham, basis, variables, targets, opts: SearchOptions | None = None):
    """Minimum of <H> over states with Q[psi] pinned to `targets`.

    Quadratic-penalty homotopy over the documented schedule with multi-start
    projected gradient descent.  Returns (energy, state, residual) where
    `energy` is the penalty-corrected estimate and `residual` the final
    infinity-norm constraint violation; raises NotRepresentable when no
    restart reaches the feasibility tolerance.
    """
    opts = opts or SearchOptions()
    problem = _PenaltyProblem(ham, basis, variables, targets)
    dim = basis.size
    rng = np.random.default_rng(opts.seed)
    schedule = tuple(opts.penalty_schedule)
    final_stage = (schedule[-1],)
    starts = []  # (vector, stage schedule)
    if opts.include_ground_start:
        _, psi0 = ground_state(ham, basis)
        starts.append((psi0.amplitudes.astype(complex), schedule))
        warm = _legendre_start(problem, targets[0]) if len(list(targets)) == 1 else None
        if warm is not None:
            # already near-optimal: homotopy would first pull it away
            starts.append((warm, final_stage))
    for extra in opts.extra_starts:
        starts.append((np.asarray(extra, dtype=complex), schedule))
    while len(starts) < max(opts.restarts, 1):
        starts.append((rng.standard_normal(dim) + 1j * rng.standard_normal(dim), schedule))

    best = None  # (corrected, residual, psi); feasible always beats infeasible
    mu_last = schedule[-1]
    tol = opts.feasibility_tol
    for start, stages in starts:
        psi = _normalize(start)
        for mu in stages:
            # intermediate stages are homotopy only; tighten on the last one
            gtol = opts.grad_tol if mu == mu_last else max(opts.grad_tol, 1e-6)
            psi = _sphere_minimize(problem, psi, mu, opts.max_iter, gtol)
        _, _, energy, dq = problem.value_and_grad(psi, mu_last)
        corrected = energy + 2.0 * mu_last * float(np.sum(np.abs(dq) ** 2))
        residual = float(np.abs(dq).max()) if dq.size else 0.0
        candidate = (corrected, residual, psi)
        if best is None:
            best = candidate
            continue
        best_ok, cand_ok = best[1] <= tol, residual <= tol
        if cand_ok and (not best_ok or corrected < best[0]):
            best = candidate
        elif not cand_ok and not best_ok and residual < best[1]:
            best = candidate
    corrected, residual, psi = best
    state = ManyBodyState(basis, psi, normalized=True).phase_fixed()
    if residual > opts.feasibility_tol:
        raise NotRepresentable(
            f"constraint residual {residual:.3e} after the full penalty schedule",
            residual=residual,
        )
    return corrected, state, residual
