import numpy as np
import pytest

from scmfkit.errors import DimensionError, InvalidMatrix, InvalidOccupation
from scmfkit.matrixcore import (
    BogoliubovTransform,
    DensityMatrix,
    GeneralizedDensity,
    HermitianMatrix,
    PairingTensor,
    SPBasis,
    adjacent_pair_partner,
    antisymmetrize,
    assemble_generalized,
    density_from_orbitals,
    eig_hermitian,
    hermitize,
    idempotency_defect,
    qp_symmetry_defect,
)


def random_hermitian(dim, rng):
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return hermitize(raw)


class TestEigHermitian:
    def test_identity(self):
        vals, vecs = eig_hermitian(np.eye(3))
        assert np.allclose(vals, [1.0, 1.0, 1.0])
        assert np.array_equal(vecs, np.eye(3))

    def test_two_level_flip(self):
        vals, _ = eig_hermitian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(vals, [-1.0, 1.0])

    def test_reconstruction_and_order(self, rng):
        for _ in range(5):
            a = random_hermitian(6, rng)
            vals, vecs = eig_hermitian(a)
            assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.conj().T - a) <= 1e-12
            assert np.all(np.diff(vals) >= -1e-12)
            assert np.linalg.norm(vecs.conj().T @ vecs - np.eye(6)) <= 1e-12

    def test_deterministic_phases(self, rng):
        a = random_hermitian(6, rng)
        vals1, vecs1 = eig_hermitian(a)
        vals2, vecs2 = eig_hermitian(a.copy())
        assert np.array_equal(vals1, vals2)
        assert np.array_equal(vecs1, vecs2)
        # leading component of every column is real positive (up to rounding)
        lead = np.abs(vecs1).argmax(axis=0)
        pivots = vecs1[lead, np.arange(6)]
        assert np.all(np.abs(pivots.imag) <= 1e-14)
        assert np.all(pivots.real > 0.0)

    def test_rejects_nonfinite(self):
        bad = np.array([[np.nan, 0.0], [0.0, 1.0]])
        with pytest.raises(InvalidMatrix):
            eig_hermitian(bad)

    def test_rejects_nonhermitian(self):
        with pytest.raises(InvalidMatrix):
            eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestDensityFromOrbitals:
    def test_identity_orbitals(self):
        rho = density_from_orbitals(np.eye(4), [0, 1])
        assert np.allclose(rho.array, np.diag([1.0, 1.0, 0.0, 0.0]))
        assert rho.particle_number == 2

    def test_all_orbitals(self):
        rho = density_from_orbitals(np.eye(3), range(3))
        assert np.allclose(rho.array, np.eye(3))

    def test_rotation_projector(self):
        theta = 0.3
        c, s = np.cos(theta), np.sin(theta)
        u = np.array([[c, -s], [s, c]])
        rho = density_from_orbitals(u, [0])
        expected = np.array([[c * c, c * s], [c * s, s * s]])
        assert np.allclose(rho.array, expected, atol=1e-14)

    def test_duplicates_rejected(self):
        with pytest.raises(InvalidOccupation):
            density_from_orbitals(np.eye(3), [0, 0])

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidOccupation):
            density_from_orbitals(np.eye(3), [3])

    def test_always_idempotent(self, rng):
        for _ in range(5):
            a = random_hermitian(6, rng)
            _, vecs = eig_hermitian(a)
            rho = density_from_orbitals(vecs, [0, 2, 3])
            assert idempotency_defect(rho) <= 1e-12
            assert abs(rho.trace - 3.0) <= 1e-12


class TestIdempotencyDefect:
    def test_projector(self):
        assert idempotency_defect(np.diag([1.0, 0.0])) == 0.0

    def test_half_filled(self):
        defect = idempotency_defect(np.diag([0.5, 0.5]))
        assert abs(defect - np.sqrt(2.0) * 0.25) <= 1e-15


class TestDataModel:
    def test_hermitian_exact_storage(self, rng):
        a = random_hermitian(5, rng)
        stored = HermitianMatrix(a).array
        assert np.array_equal(stored, stored.conj().T)

    def test_density_pauli_window(self):
        with pytest.raises(InvalidMatrix):
            DensityMatrix(np.diag([1.5, 0.0]))
        with pytest.raises(InvalidMatrix):
            DensityMatrix(np.diag([-0.2, 0.0]))

    def test_density_trace_flagged(self):
        DensityMatrix(np.diag([1.0, 0.0]), particle_number=1)
        with pytest.raises(InvalidMatrix):
            DensityMatrix(np.diag([1.0, 0.0]), particle_number=2)

    def test_pairing_antisymmetry_rejected(self):
        bad = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(InvalidMatrix):
            PairingTensor(bad)

    def test_pairing_exact_storage(self, rng):
        raw = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        kappa = PairingTensor(antisymmetrize(raw)).array
        assert np.array_equal(kappa, -kappa.T)
        assert np.all(kappa.diagonal() == 0.0)

    def test_sp_basis_partner_validation(self):
        SPBasis(4, pair_partner=adjacent_pair_partner(4))
        with pytest.raises(InvalidMatrix):
            SPBasis(4, pair_partner=(0, 1, 2, 3))  # fixed points
        with pytest.raises(InvalidMatrix):
            SPBasis(3, pair_partner=(1, 0, 2))  # odd dimension / fixed point

    def test_bogoliubov_unitarity(self):
        BogoliubovTransform(np.eye(2), np.zeros((2, 2)))
        with pytest.raises(InvalidMatrix):
            BogoliubovTransform(np.eye(2), np.eye(2))


class TestGeneralizedDensity:
    def test_block_layout(self):
        gen = assemble_generalized(np.diag([1.0, 0.0]), np.zeros((2, 2)))
        assert np.allclose(gen.matrix, np.diag([1.0, 0.0, 0.0, 1.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            assemble_generalized(np.eye(2), np.zeros((3, 3)))

    def test_bcs_vacuum_is_idempotent(self):
        u = v = 1.0 / np.sqrt(2.0)
        rho = np.diag([v * v, v * v])
        kappa = antisymmetrize(np.array([[0.0, u * v], [0.0, 0.0]]))
        gen = assemble_generalized(rho, kappa)
        assert gen.idempotency_defect() <= 1e-10
        assert np.all(np.abs(gen.eigenvalues - np.round(gen.eigenvalues)) <= 1e-8)

    def test_inconsistent_blocks_rejected(self):
        # empty rho with nonzero kappa cannot come from any state
        kappa = antisymmetrize(np.array([[0.0, 0.4], [0.0, 0.0]]))
        with pytest.raises(InvalidMatrix):
            assemble_generalized(np.zeros((2, 2)), kappa)


class TestQpSymmetry:
    @staticmethod
    def _doubled(h, delta, mu):
        m = h.shape[0]
        return np.block(
            [[h - mu * np.eye(m), delta], [-delta.conj(), -h.conj() + mu * np.eye(m)]]
        )

    def test_assembled_is_symmetric(self, rng):
        h = random_hermitian(4, rng)
        delta = antisymmetrize(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        big = self._doubled(h, delta, 0.37)
        assert qp_symmetry_defect(big) <= 1e-12

    def test_identity_defect_value(self):
        for m in (1, 2, 4):
            assert abs(qp_symmetry_defect(np.eye(2 * m)) - 2.0 * np.sqrt(2 * m)) <= 1e-12

    def test_odd_dimension_rejected(self):
        with pytest.raises(DimensionError):
            qp_symmetry_defect(np.eye(3))

    def test_eigenpair_mapping(self, rng):
        h = random_hermitian(3, rng)
        delta = antisymmetrize(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        big = self._doubled(h, delta, -0.2)
        vals, vecs = eig_hermitian(big)
        swap = np.roll(np.eye(6), 3, axis=0)
        for i in range(6):
            partner = swap @ vecs[:, i].conj()
            assert np.linalg.norm(big @ partner - (-vals[i]) * partner) <= 1e-10
        # +-eps pairing of the spectrum
        assert np.abs(np.sort(np.abs(vals[:3])) - vals[3:]).max() <= 1e-10
