"""Shared test helpers: an independent operator-kron reference for Fock-space
hamiltonians (separate code path from the package's bit-string build)."""

import numpy as np
import pytest


def kron_fermi_ops(num_orbitals):
    """Annihilation operators on the 2^M space; orbital 0 is the leftmost
    factor and indices are mapped back to the package's bit convention by
    kron_index_map."""
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    parity = np.diag([1.0, -1.0])
    eye = np.eye(2)
    ops = []
    for k in range(num_orbitals):
        mats = [parity] * k + [a] + [eye] * (num_orbitals - k - 1)
        out = np.array([[1.0]])
        for m in mats:
            out = np.kron(out, m)
        ops.append(out)
    return ops


def kron_index_map(num_orbitals):
    """kron_index -> package word: kron bit for orbital k sits at position
    (M-1-k) of the kron index, the package keeps orbital k at bit k."""
    m = num_orbitals
    out = np.zeros(2 ** m, dtype=np.int64)
    for idx in range(2 ** m):
        word = 0
        for k in range(m):
            if (idx >> (m - 1 - k)) & 1:
                word |= 1 << k
        out[idx] = word
    return out


def kron_hamiltonian(ham):
    """Dense 2^M matrix of a TwoBodyHamiltonian via operator products."""
    m = ham.num_orbitals
    ann = kron_fermi_ops(m)
    crt = [op.conj().T for op in ann]
    out = np.zeros((2 ** m, 2 ** m), dtype=complex)
    for k in range(m):
        for l in range(m):
            if ham.t[k, l] != 0:
                out += ham.t[k, l] * (crt[k] @ ann[l])
    for k, kp, l, lp, v in ham.entries:
        out += v * (crt[k] @ crt[kp] @ ann[lp] @ ann[l])
    return out


def kron_sector_matrix(ham, particle_number):
    """Fixed-N block of the kron hamiltonian, reordered to match the
    package's ascending-word basis."""
    m = ham.num_orbitals
    big = kron_hamiltonian(ham)
    words = kron_index_map(m)
    weights = np.array([int(w).bit_count() for w in words])
    sel = np.where(weights == particle_number)[0]
    sel = sel[np.argsort(words[sel])]
    return big[np.ix_(sel, sel)]


def random_interior_density(dim, rng, lo=0.1, hi=0.9):
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    herm = (raw + raw.conj().T) / 2
    _, vecs = np.linalg.eigh(herm)
    return vecs @ np.diag(rng.uniform(lo, hi, dim)) @ vecs.conj().T


def random_pairing_tensor(dim, rng, scale=0.05):
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    upper = np.triu(scale * (raw - raw.T), 1)
    return upper - upper.T


@pytest.fixture
def rng():
    return np.random.default_rng(42)
