"""Dense matrix kernel and the density-matrix data model.

Symmetries are exact by construction: hermitian matrices store one triangle
and mirror it, pairing tensors store the strict upper triangle and negate it.
The eigensolver wraps LAPACK with a deterministic phase and ordering
convention so repeated runs produce bitwise-identical spectra and orbitals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidMatrix, InvalidOccupation

# eigenvalue window for occupation-like matrices (rho and the doubled R)
PAULI_TOL = 1e-10
# |tr(rho) - N| when a particle number is declared
TRACE_TOL = 1e-8
# relative symmetry defect accepted at construction time
SYMMETRY_TOL = 1e-10


def as_matrix(obj) -> np.ndarray:
    """Dense complex square array behind `obj` (wrapper class or ndarray)."""
    arr = np.asarray(getattr(obj, "array", obj), dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def _require_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise InvalidMatrix("matrix contains non-finite entries")


def _scale(arr: np.ndarray) -> float:
    return max(1.0, float(np.abs(arr).max())) if arr.size else 1.0


def hermitize(arr: np.ndarray) -> np.ndarray:
    """Mirror the lower triangle so the result is hermitian bit-for-bit."""
    lower = np.tril(arr, -1)
    return lower + lower.conj().T + np.diag(arr.diagonal().real)


def antisymmetrize(arr: np.ndarray) -> np.ndarray:
    """Negate the strict upper triangle into the lower one; zero diagonal."""
    upper = np.triu(arr, 1)
    return upper - upper.T


def _check_hermitian(arr: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    defect = np.abs(arr - arr.conj().T).max() if arr.size else 0.0
    if defect > tol * _scale(arr):
        raise InvalidMatrix(f"matrix is not hermitian (defect {defect:.3e})")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SPBasis:
    """Finite single-particle basis: a dimension, orbital tags, and an
    optional pairing partner map k <-> kbar (fixed-point-free involution)."""

    dimension: int
    labels: tuple = ()
    pair_partner: tuple | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionError("basis dimension must be positive")
        labels = tuple(self.labels) or tuple(f"orb{k}" for k in range(self.dimension))
        if len(labels) != self.dimension:
            raise DimensionError("need one label per orbital")
        object.__setattr__(self, "labels", labels)
        if self.pair_partner is not None:
            partner = tuple(int(p) for p in self.pair_partner)
            if len(partner) != self.dimension or self.dimension % 2:
                raise InvalidMatrix("pair_partner needs an even dimension and one entry per orbital")
            for k, p in enumerate(partner):
                if not 0 <= p < self.dimension or p == k or partner[p] != k:
                    raise InvalidMatrix("pair_partner must be an involution with no fixed points")
            object.__setattr__(self, "pair_partner", partner)


def adjacent_pair_partner(dimension: int) -> tuple:
    """Involution pairing (0,1), (2,3), ... — the layout used by the presets."""
    if dimension % 2:
        raise DimensionError("adjacent pairing needs an even dimension")
    return tuple(k + 1 if k % 2 == 0 else k - 1 for k in range(dimension))


class HermitianMatrix:
    """Complex square matrix kept exactly hermitian."""

    __slots__ = ("array",)

    def __init__(self, values, tol: float = SYMMETRY_TOL):
        arr = as_matrix(values)
        _require_finite(arr)
        _check_hermitian(arr, tol)
        self.array = _freeze(hermitize(arr))

    @property
    def dimension(self) -> int:
        return self.array.shape[0]


class DensityMatrix:
    """One-body density matrix: hermitian, eigenvalues within [0, 1].

    When `particle_number` is given the trace is checked against it.
    """

    __slots__ = ("array", "particle_number", "eigenvalues")

    def __init__(self, values, particle_number=None, tol: float = PAULI_TOL):
        arr = as_matrix(values)
        _require_finite(arr)
        _check_hermitian(arr)
        arr = hermitize(arr)
        evs = np.linalg.eigvalsh(arr)
        if evs.size and (evs[0] < -tol or evs[-1] > 1.0 + tol):
            raise InvalidMatrix(
                f"occupation spectrum [{evs[0]:.3e}, {evs[-1]:.3e}] violates the Pauli window"
            )
        if particle_number is not None:
            err = abs(float(arr.trace().real) - float(particle_number))
            if err > TRACE_TOL:
                raise InvalidMatrix(f"trace misses declared particle number by {err:.3e}")
        self.array = _freeze(arr)
        self.particle_number = None if particle_number is None else float(particle_number)
        self.eigenvalues = _freeze(evs)

    @property
    def dimension(self) -> int:
        return self.array.shape[0]

    @property
    def trace(self) -> float:
        return float(self.array.trace().real)


class PairingTensor:
    """Pairing tensor: exactly antisymmetric, strict upper triangle is the truth."""

    __slots__ = ("array",)

    def __init__(self, values, tol: float = SYMMETRY_TOL):
        arr = as_matrix(values)
        _require_finite(arr)
        defect = np.abs(arr + arr.T).max() if arr.size else 0.0
        if defect > tol * _scale(arr):
            raise InvalidMatrix(f"pairing tensor is not antisymmetric (defect {defect:.3e})")
        self.array = _freeze(antisymmetrize(arr))

    @property
    def dimension(self) -> int:
        return self.array.shape[0]


class GeneralizedDensity:
    """Doubled density matrix R = [[rho, kappa], [-kappa*, 1-rho*]].

    Hermitian with eigenvalues in [0, 1]; R^2 = R characterizes a
    quasiparticle vacuum.
    """

    __slots__ = ("rho", "kappa", "matrix", "eigenvalues")

    def __init__(self, rho, kappa, tol: float = PAULI_TOL):
        r = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
        k = kappa if isinstance(kappa, PairingTensor) else PairingTensor(kappa)
        if r.dimension != k.dimension:
            raise DimensionError("rho and kappa dimensions differ")
        m = r.dimension
        big = np.block(
            [[r.array, k.array], [-k.array.conj(), np.eye(m) - r.array.conj()]]
        )
        evs = np.linalg.eigvalsh(big)
        if evs[0] < -tol or evs[-1] > 1.0 + tol:
            raise InvalidMatrix(
                f"generalized density spectrum [{evs[0]:.3e}, {evs[-1]:.3e}] leaves [0, 1]"
            )
        self.rho = r
        self.kappa = k
        self.matrix = _freeze(big)
        self.eigenvalues = _freeze(evs)

    @property
    def dimension(self) -> int:
        return self.rho.dimension

    def idempotency_defect(self) -> float:
        return float(np.linalg.norm(self.matrix @ self.matrix - self.matrix))


class BogoliubovTransform:
    """Quasiparticle transform W = [[U, V*], [V, U*]], unitary."""

    __slots__ = ("u", "v", "matrix")

    def __init__(self, u, v, tol: float = 1e-10):
        u = as_matrix(u)
        v = as_matrix(v)
        _require_finite(u)
        _require_finite(v)
        if u.shape != v.shape:
            raise DimensionError("U and V blocks must have equal shapes")
        w = np.block([[u, v.conj()], [v, u.conj()]])
        defect = np.linalg.norm(w.conj().T @ w - np.eye(2 * u.shape[0]))
        if defect > tol:
            raise InvalidMatrix(f"Bogoliubov transform not unitary (defect {defect:.3e})")
        self.u = _freeze(u.copy())
        self.v = _freeze(v.copy())
        self.matrix = _freeze(w)

    @property
    def dimension(self) -> int:
        return self.u.shape[0]


def eig_hermitian(matrix):
    """Eigendecomposition with deterministic phases and ordering.

    Returns (values, vectors) with values ascending and each eigenvector's
    largest-magnitude component made real and positive.  Degenerate levels are
    ordered by the row index of that leading component, so repeated calls and
    symmetric inputs resolve identically.
    """
    arr = as_matrix(matrix)
    _require_finite(arr)
    _check_hermitian(arr)
    vals, vecs = np.linalg.eigh(arr)
    lead = np.abs(vecs).argmax(axis=0)
    pivots = vecs[lead, np.arange(vecs.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    vecs = vecs / phases[None, :]
    order = np.lexsort((lead, vals))
    return vals[order], np.ascontiguousarray(vecs[:, order])


def density_from_orbitals(orbitals, occupied) -> DensityMatrix:
    """Projector onto the span of the selected orthonormal orbital columns."""
    u = as_matrix(orbitals)
    idx = [int(i) for i in occupied]
    if len(set(idx)) != len(idx):
        raise InvalidOccupation("duplicate orbital indices")
    if any(i < 0 or i >= u.shape[1] for i in idx):
        raise InvalidOccupation(f"orbital index outside 0..{u.shape[1] - 1}")
    defect = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1]))
    if defect > 1e-8:
        raise InvalidMatrix(f"orbital matrix not unitary (defect {defect:.3e})")
    cols = u[:, sorted(idx)]
    rho = cols @ cols.conj().T
    return DensityMatrix(hermitize(rho), particle_number=len(idx))


def idempotency_defect(rho) -> float:
    """Frobenius norm of rho^2 - rho; zero iff a single Slater determinant."""
    arr = as_matrix(rho)
    return float(np.linalg.norm(arr @ arr - arr))


def assemble_generalized(rho, kappa) -> GeneralizedDensity:
    """Build and validate the doubled density matrix from rho and kappa."""
    r = as_matrix(rho)
    k = as_matrix(kappa)
    if r.shape != k.shape:
        raise DimensionError(f"rho {r.shape} and kappa {k.shape} differ")
    return GeneralizedDensity(rho, kappa)


def qp_symmetry_defect(h) -> float:
    """|| Sx H Sx + H* ||_F for a doubled matrix; zero for every correctly
    assembled quasiparticle hamiltonian, which forces the ±eps spectrum."""
    arr = as_matrix(h)
    n = arr.shape[0]
    if n % 2:
        raise DimensionError("doubled matrix must have even dimension")
    m = n // 2
    swapped = np.roll(arr, (m, m), axis=(0, 1))
    return float(np.linalg.norm(swapped + arr.conj()))
