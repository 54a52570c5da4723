import math

import numpy as np
import pytest

from conftest import kron_sector_matrix, random_interior_density

import scmfkit.fock_oracle as fo
from scmfkit.edf import site_density
from scmfkit.errors import InvalidMatrix, NotRepresentable, SectorError, TooLarge
from scmfkit.matrixcore import antisymmetrize


def dimer_energy(tau, onsite):
    return (onsite - math.sqrt(onsite ** 2 + 16 * tau ** 2)) / 2.0


# frozen by the independent operator-kron diagonalization in conftest
PAIRING_4LEVEL_E0 = 0.6355484735756061
PAIRING_2LEVEL_G05_E0 = -0.6180339887498948


class TestBasis:
    def test_single_particle(self):
        basis = fo.enumerate_basis(2, "fixed", 1)
        assert basis.size == 2
        assert list(basis.words) == [0b01, 0b10]

    def test_counts(self):
        assert fo.enumerate_basis(4, "fixed", 2).size == 6
        assert fo.enumerate_basis(4, "full").size == 16

    def test_ordered_and_unique(self):
        words = fo.enumerate_basis(6, "fixed", 3).words
        assert np.all(np.diff(words) > 0)

    def test_caps(self):
        with pytest.raises(TooLarge):
            fo.enumerate_basis(24, "full")
        with pytest.raises(TooLarge):
            fo.enumerate_basis(40, "fixed", 20)


class TestHamiltonianBuild:
    def test_two_body_symmetries_validated(self):
        bad = np.zeros((2, 2, 2, 2))
        bad[0, 1, 0, 1] = 1.0  # no antisymmetry images
        with pytest.raises(InvalidMatrix):
            fo.TwoBodyHamiltonian(np.zeros((2, 2)), bad)

    def test_from_entries_round_trip(self):
        ham = fo.pairing_hamiltonian(2, 1.0, 0.7)
        v = ham.vbar
        assert np.abs(v + v.transpose(1, 0, 2, 3)).max() == 0.0
        assert np.abs(v + v.transpose(0, 1, 3, 2)).max() == 0.0
        assert np.abs(v - v.transpose(2, 3, 0, 1).conj()).max() == 0.0

    @pytest.mark.parametrize(
        "ham",
        [
            fo.hubbard_chain(2, 1.0, 4.0),
            fo.hubbard_chain(3, 0.7, 2.5),
            fo.pairing_hamiltonian(2, 1.0, 0.5),
            fo.pairing_hamiltonian(4, 1.0, 0.5),
        ],
        ids=["dimer", "chain3", "pair2", "pair4"],
    )
    def test_matrix_matches_kron_reference(self, ham):
        n = ham.num_orbitals // 2
        basis = fo.enumerate_basis(ham.num_orbitals, "fixed", n)
        built = fo.hamiltonian_matrix(ham, basis)
        reference = kron_sector_matrix(ham, n)
        assert np.abs(built - reference).max() <= 1e-12


class TestGroundState:
    def test_one_particle_two_levels(self):
        ham = fo.TwoBodyHamiltonian(np.diag([-1.0, 1.0]))
        basis = fo.enumerate_basis(2, "fixed", 1)
        e0, psi = fo.ground_state(ham, basis)
        assert abs(e0 - (-1.0)) <= 1e-14
        assert abs(abs(psi.amplitudes[0]) - 1.0) <= 1e-12

    @pytest.mark.parametrize("tau,onsite", [(1.0, 4.0), (0.5, 1.0), (1.3, 2.7)])
    def test_hubbard_dimer_closed_form(self, tau, onsite):
        ham = fo.hubbard_chain(2, tau, onsite)
        basis = fo.enumerate_basis(4, "fixed", 2)
        e0, _ = fo.ground_state(ham, basis)
        assert abs(e0 - dimer_energy(tau, onsite)) <= 1e-12

    def test_pairing_models_frozen_values(self):
        ham = fo.pairing_hamiltonian(4, 1.0, 0.5)
        e0, _ = fo.ground_state(ham, fo.enumerate_basis(8, "fixed", 4))
        assert abs(e0 - PAIRING_4LEVEL_E0) <= 1e-12
        ham = fo.pairing_hamiltonian(2, 1.0, 0.5)
        e0, _ = fo.ground_state(ham, fo.enumerate_basis(4, "fixed", 2))
        assert abs(e0 - PAIRING_2LEVEL_G05_E0) <= 1e-12
        # 2-level seniority closed form: e0+e1-G - sqrt((e1-e0)^2 + G^2)
        assert abs(PAIRING_2LEVEL_G05_E0 - (1.0 - 0.5 - math.sqrt(1.0 + 0.25))) <= 1e-12

    def test_apply_matches_matrix(self, rng):
        ham = fo.hubbard_chain(2, 1.0, 4.0)
        basis = fo.enumerate_basis(4, "fixed", 2)
        amps = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
        psi = fo.ManyBodyState(basis, amps)
        out = fo.apply_hamiltonian(ham, psi)
        ref = fo.hamiltonian_matrix(ham, basis) @ amps
        assert np.abs(out.amplitudes - ref).max() <= 1e-12


class TestDensities:
    def test_single_determinant(self):
        basis = fo.enumerate_basis(4, "fixed", 2)
        amps = np.zeros(basis.size)
        amps[list(basis.words).index(0b0011)] = 1.0
        rho = fo.one_body_density(fo.ManyBodyState(basis, amps, normalized=True))
        assert np.allclose(rho.array, np.diag([1.0, 1.0, 0.0, 0.0]))

    def test_equal_superposition(self):
        basis = fo.enumerate_basis(2, "fixed", 1)
        psi = fo.ManyBodyState(basis, np.array([1.0, 1.0]) / np.sqrt(2), normalized=True)
        rho = fo.one_body_density(psi)
        assert np.allclose(rho.array, 0.5 * np.ones((2, 2)))

    def test_correlated_occupations_interior(self):
        ham = fo.hubbard_chain(2, 1.0, 4.0)
        basis = fo.enumerate_basis(4, "fixed", 2)
        _, psi = fo.ground_state(ham, basis)
        evs = fo.one_body_density(psi).eigenvalues
        assert np.all(evs > 1e-3) and np.all(evs < 1.0 - 1e-3)

    def test_pairing_tensor_number_selection(self):
        # a fixed-N state embedded in the full sector has kappa = 0
        basis = fo.enumerate_basis(4, "full")
        amps = np.zeros(basis.size)
        amps[0b0011] = 1.0
        kappa = fo.pairing_tensor_of(fo.ManyBodyState(basis, amps, normalized=True))
        assert np.abs(kappa.array).max() == 0.0

    def test_pairing_tensor_bcs_value(self):
        basis = fo.enumerate_basis(2, "full")
        amps = np.zeros(4)
        amps[0b00] = 1.0 / np.sqrt(2)
        amps[0b11] = 1.0 / np.sqrt(2)
        kappa = fo.pairing_tensor_of(fo.ManyBodyState(basis, amps, normalized=True))
        assert abs(kappa.array[0, 1] - 0.5) <= 1e-12

    def test_pairing_tensor_needs_full_sector(self):
        basis = fo.enumerate_basis(4, "fixed", 2)
        amps = np.zeros(basis.size)
        amps[0] = 1.0
        with pytest.raises(SectorError):
            fo.pairing_tensor_of(fo.ManyBodyState(basis, amps, normalized=True))

    def test_pauli_window_for_random_states(self, rng):
        basis = fo.enumerate_basis(6, "fixed", 3)
        for _ in range(5):
            amps = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
            psi = fo.ManyBodyState(basis, amps).normalize()
            evs = fo.one_body_density(psi).eigenvalues
            assert evs.min() >= -1e-12 and evs.max() <= 1.0 + 1e-12


class TestTwoBodyCorrelation:
    def test_zero_on_determinants(self):
        basis = fo.enumerate_basis(4, "fixed", 2)
        amps = np.zeros(basis.size)
        amps[2] = 1.0
        c2 = fo.two_body_correlation(fo.ManyBodyState(basis, amps, normalized=True))
        assert np.abs(c2).max() <= 1e-12

    def test_zero_on_rotated_determinants(self, rng):
        # any idempotent-density state, not only basis words
        from scmfkit.fock_oracle import pair_condensate_state

        basis = fo.enumerate_basis(4, "fixed", 2)
        ham = fo.hubbard_chain(2, 1.0, 0.0)  # free: ground state is a determinant
        _, psi = fo.ground_state(ham, basis)
        c2 = fo.two_body_correlation(psi)
        assert np.abs(c2).max() <= 1e-12

    def test_nonzero_with_interaction(self):
        ham = fo.hubbard_chain(2, 1.0, 4.0)
        basis = fo.enumerate_basis(4, "fixed", 2)
        _, psi = fo.ground_state(ham, basis)
        assert np.abs(fo.two_body_correlation(psi)).max() > 0.05

    def test_antisymmetry(self):
        ham = fo.pairing_hamiltonian(2, 1.0, 0.5)
        basis = fo.enumerate_basis(4, "fixed", 2)
        _, psi = fo.ground_state(ham, basis)
        c2 = fo.two_body_correlation(psi)
        assert np.abs(c2 + c2.transpose(1, 0, 2, 3)).max() <= 1e-12
        assert np.abs(c2 + c2.transpose(0, 1, 3, 2)).max() <= 1e-12

    def test_exactly_kappa_kappa_on_vacuum(self):
        # quasiparticle vacuum: the connected part is the pairing contraction
        z = antisymmetrize(np.array([[0.0, 0.8], [0.0, 0.0]], dtype=complex))
        state = fo.pair_condensate_state(z)
        kappa = fo.pairing_tensor_of(state).array
        c2 = fo.two_body_correlation(state)
        expected = np.einsum("lL,kK->kKlL", kappa.conj(), kappa)
        assert np.abs(c2 - expected).max() <= 1e-10

    def test_pair_block_dominance_fixed_n(self):
        ham = fo.pairing_hamiltonian(4, 1.0, 0.5)
        basis = fo.enumerate_basis(8, "fixed", 4)
        _, psi = fo.ground_state(ham, basis)
        c2 = fo.two_body_correlation(psi)
        pair_block = max(
            abs(c2[2 * j, 2 * j + 1, 2 * jp, 2 * jp + 1])
            for j in range(4)
            for jp in range(4)
            if j != jp
        )
        mask = np.ones(c2.shape, dtype=bool)
        for j in range(4):
            for jp in range(4):
                for a, b in ((2 * j, 2 * j + 1), (2 * j + 1, 2 * j)):
                    for c, d in ((2 * jp, 2 * jp + 1), (2 * jp + 1, 2 * jp)):
                        mask[a, b, c, d] = False
        off_block = np.abs(c2[mask]).max()
        assert pair_block > 3 * off_block


class TestPairCondensate:
    def test_vacuum(self):
        state = fo.pair_condensate_state(np.zeros((4, 4)))
        assert abs(state.amplitudes[0] - 1.0) <= 1e-14
        assert np.abs(state.amplitudes[1:]).max() == 0.0

    def test_one_pair_amplitude(self):
        z = antisymmetrize(np.array([[0.0, 1.0], [0.0, 0.0]]))
        state = fo.pair_condensate_state(z)
        kappa = fo.pairing_tensor_of(state).array
        assert abs(kappa[0, 1] - 0.5) <= 1e-12  # u = v = 1/sqrt(2)


class TestConstrainedSearch:
    def setup_method(self):
        self.ham = fo.pairing_hamiltonian(2, 1.0, 0.5)
        self.basis = fo.enumerate_basis(4, "fixed", 2)
        self.e0, self.psi0 = fo.ground_state(self.ham, self.basis)
        self.var = site_density(0, 4)

    def test_target_at_ground_state(self):
        rho0 = fo.one_body_density(self.psi0).array
        energy, _, residual = fo.constrained_search(
            self.ham, self.basis, [self.var], [rho0[0, 0].real]
        )
        assert abs(energy - self.e0) <= 1e-7
        assert residual <= 1e-7

    def test_fixed_trace_infeasible(self):
        from scmfkit.edf import PrincipalVariable

        trace = PrincipalVariable(
            label="trace",
            evaluator=lambda rho, kappa=None: np.trace(rho).real,
            derivative=lambda rho=None, kappa=None: np.eye(4, dtype=complex),
        )
        with pytest.raises(NotRepresentable):
            fo.constrained_search(self.ham, self.basis, [trace], [1.2])

    def test_scan_minimum_tracks_ground_state(self):
        rho0 = fo.one_body_density(self.psi0).array
        values = []
        for q in np.linspace(0.5, 0.95, 6):
            energy, _, _ = fo.constrained_search(self.ham, self.basis, [self.var], [q])
            values.append(energy)
        direct, _, _ = fo.constrained_search(
            self.ham, self.basis, [self.var], [rho0[0, 0].real]
        )
        assert min(values + [direct]) >= self.e0 - 1e-9
        assert abs(direct - self.e0) <= 1e-7

    def test_determinism(self):
        energy1, psi1, _ = fo.constrained_search(self.ham, self.basis, [self.var], [0.7])
        energy2, psi2, _ = fo.constrained_search(self.ham, self.basis, [self.var], [0.7])
        assert energy1 == energy2
        assert np.array_equal(psi1.amplitudes, psi2.amplitudes)
