"""Shared test helpers: random integral sets and an independent brute-force
second-quantized oracle built from Jordan-Wigner ladder operators on the
full 2^(2M) Fock space. The oracle shares no code with the package kernels.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from sqdkit.hamiltonian import ActiveSpaceHamiltonian


def random_hamiltonian(m, n_alpha, n_beta, seed=0, scale=1.0):
    """Random symmetric integrals with full 8-fold eri symmetry."""
    rng = np.random.default_rng(seed)
    h1 = rng.standard_normal((m, m)) * scale
    h1 = 0.5 * (h1 + h1.T)
    raw = rng.standard_normal((m, m, m, m)) * scale
    avg = np.zeros_like(raw)
    perms = [
        (0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
        (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0),
    ]
    for perm in perms:
        avg += np.transpose(raw, perm)
    avg /= len(perms)
    # Copy the canonical element to all 8 slots so the symmetry is bitwise
    # exact, not merely exact up to summation order.
    eri = np.empty_like(avg)
    for p in range(m):
        for r in range(p + 1):
            for q in range(m):
                for s in range(q + 1):
                    val = avg[max((p, r), (q, s))[0], max((p, r), (q, s))[1],
                              min((p, r), (q, s))[0], min((p, r), (q, s))[1]]
                    for a, b in ((p, r), (r, p)):
                        for c, d in ((q, s), (s, q)):
                            eri[a, b, c, d] = val
                            eri[c, d, a, b] = val
    return ActiveSpaceHamiltonian(
        m_orbitals=m,
        n_alpha=n_alpha,
        n_beta=n_beta,
        e_core=float(rng.standard_normal()),
        h_one=h1,
        eri=eri,
    )


def jw_ladder_operators(n_modes):
    """Sparse annihilation operators a_k on the 2^n Fock space.

    Basis index encodes occupations with bit k of the index = occupation of
    mode k (alpha modes 0..M-1, then beta), matching the package convention
    that earlier modes sit lower in the fermionic ordering.
    """
    dim = 2**n_modes
    ops = []
    idx = np.arange(dim)
    for k in range(n_modes):
        occupied = (idx >> k) & 1 == 1
        rows = idx[occupied] & ~(1 << k)
        cols = idx[occupied]
        # Parity of modes below k.
        below = cols & ((1 << k) - 1)
        signs = 1.0 - 2.0 * (np.array([int(b).bit_count() for b in below]) % 2)
        ops.append(sp.csr_matrix((signs, (rows, cols)), shape=(dim, dim)))
    return ops


def fock_space_hamiltonian(h):
    """Dense second-quantized H on the full 2^(2M) Fock space."""
    m = h.m_orbitals
    n_modes = 2 * m
    dim = 2**n_modes
    ann = jw_ladder_operators(n_modes)
    cre = [op.conj().T for op in ann]
    mat = sp.identity(dim, format="csr") * h.e_core
    for p in range(m):
        for r in range(m):
            if h.h_one[p, r] == 0.0:
                continue
            for spin in (0, m):
                mat = mat + h.h_one[p, r] * (cre[p + spin] @ ann[r + spin])
    for p in range(m):
        for r in range(m):
            for q in range(m):
                for s in range(m):
                    val = 0.5 * h.eri[p, r, q, s]
                    if val == 0.0:
                        continue
                    for sig in (0, m):
                        for tau in (0, m):
                            mat = mat + val * (
                                cre[p + sig] @ cre[q + tau] @ ann[s + tau] @ ann[r + sig]
                            )
    return mat.toarray()


def fock_index(det, m):
    """Index of a determinant's basis state in the Fock-space oracle."""
    return det.alpha | (det.beta << m)


def sector_block(h, basis):
    """Oracle Hamiltonian restricted to a determinant list."""
    full = fock_space_hamiltonian(h)
    idx = [fock_index(d, h.m_orbitals) for d in basis]
    return full[np.ix_(idx, idx)]
