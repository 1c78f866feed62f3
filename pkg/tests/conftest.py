"""Shared independent oracles for the test suite.

These helpers deliberately avoid the package's fast paths: gates are
checked against explicitly constructed full matrices, purities against
partial traces of the full density matrix.
"""

import string

import numpy as np
import pytest


def kron_chain(mats):
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def full_1q_matrix(u2, n, q):
    """Embed a 2x2 matrix on qubit q (qubit 0 = most significant)."""
    mats = [np.eye(2, dtype=complex)] * n
    mats[q] = u2
    return kron_chain(mats)


def cnot_matrix(n, control, target):
    dim = 1 << n
    u = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        if (i >> (n - 1 - control)) & 1:
            u[i ^ (1 << (n - 1 - target)), i] = 1.0
        else:
            u[i, i] = 1.0
    return u


def cry_matrix(n, control, target, theta):
    dim = 1 << n
    u = np.zeros((dim, dim), dtype=complex)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    for i in range(dim):
        if not (i >> (n - 1 - control)) & 1:
            u[i, i] = 1.0
            continue
        j = i ^ (1 << (n - 1 - target))
        if (i >> (n - 1 - target)) & 1:  # target bit 1 column
            u[i, i] = c
            u[j, i] = -s
        else:
            u[i, i] = c
            u[j, i] = s
    return u


def reduced_density_matrix(amps, n, keep):
    """Partial trace of |psi><psi| onto the kept qubits, via einsum."""
    keep = sorted(keep)
    t = np.asarray(amps).reshape((2,) * n)
    letters = string.ascii_lowercase
    i_idx = letters[:n]
    j_idx = "".join(letters[n + q] if q in keep else i_idx[q]
                    for q in range(n))
    out = "".join(i_idx[q] for q in keep) + \
          "".join(letters[n + q] for q in keep)
    dm = np.einsum(f"{i_idx},{j_idx}->{out}", t, t.conj())
    k = len(keep)
    return dm.reshape(1 << k, 1 << k)


def purity_oracle(amps, n, subset):
    subset = sorted(set(subset))
    if len(subset) in (0, n):
        return 1.0
    dm = reduced_density_matrix(amps, n, subset)
    return float(np.real(np.trace(dm @ dm)))


def random_state(n, rng):
    z = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return z / np.linalg.norm(z)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
