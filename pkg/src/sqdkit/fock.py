"""Determinant bit-mask encoding, Slater-Condon matrix elements, excitation
enumeration, and a dense exact-diagonalization oracle for tiny sectors.

Spin strings are plain integers: bit p set means spatial orbital p of that
spin sector is occupied. The fermionic phase convention orders spin-orbitals
as alpha(0..M-1) then beta(0..M-1); since every operator here moves electrons
within one spin block in pairs, phases reduce to per-block parities.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

__all__ = [
    "Determinant",
    "CiVector",
    "sector_strings",
    "sector_basis",
    "sector_dimension",
    "occupied_orbitals",
    "matrix_element",
    "diagonal_element",
    "connected",
    "occupancy_matrix",
    "basis_occupancy",
    "build_dense",
    "SectorSizeError",
]


class SectorSizeError(ValueError):
    """Requested dense construction exceeds the configured size cap."""


class Determinant(NamedTuple):
    """Electronic configuration: one occupation bit-mask per spin sector."""

    alpha: int
    beta: int

    def occupancy(self, m: int) -> np.ndarray:
        """Length-2M 0/1 vector, alpha block first."""
        out = np.empty(2 * m, dtype=np.uint8)
        for p in range(m):
            out[p] = (self.alpha >> p) & 1
            out[m + p] = (self.beta >> p) & 1
        return out


@dataclass
class CiVector:
    """Real CI amplitudes over a sorted, duplicate-free determinant basis."""

    basis: list[Determinant]
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if len(self.basis) != self.coeffs.shape[0]:
            raise ValueError("basis and coeffs lengths differ")

    def normalize(self) -> "CiVector":
        nrm = np.linalg.norm(self.coeffs)
        if nrm == 0:
            raise ValueError("cannot normalize a zero vector")
        return CiVector(self.basis, self.coeffs / nrm)


def occupied_orbitals(mask: int) -> list[int]:
    occ = []
    p = 0
    while mask:
        if mask & 1:
            occ.append(p)
        mask >>= 1
        p += 1
    return occ


def sector_strings(m: int, n: int) -> list[int]:
    """All length-M bit-masks with popcount n, sorted ascending as integers."""
    if not 0 <= n <= m:
        raise ValueError(f"cannot place {n} electrons in {m} orbitals")
    masks = [sum(1 << p for p in occ) for occ in combinations(range(m), n)]
    masks.sort()
    return masks


def sector_dimension(m: int, n_alpha: int, n_beta: int) -> int:
    from math import comb

    return comb(m, n_alpha) * comb(m, n_beta)


def sector_basis(m: int, n_alpha: int, n_beta: int) -> list[Determinant]:
    """Canonical-ordered sector basis: sorted by (alpha, beta) as integers."""
    alphas = sector_strings(m, n_alpha)
    betas = sector_strings(m, n_beta)
    return [Determinant(a, b) for a in alphas for b in betas]


def _parity_between(mask: int, p: int, q: int) -> int:
    """(-1)**(number of set bits strictly between positions p and q)."""
    if p > q:
        p, q = q, p
    seg = mask & (((1 << q) - 1) ^ ((1 << (p + 1)) - 1))
    return -1 if seg.bit_count() & 1 else 1


def _annihilate(mask: int, p: int):
    if not (mask >> p) & 1:
        return None
    sign = -1 if (mask & ((1 << p) - 1)).bit_count() & 1 else 1
    return mask & ~(1 << p), sign


def _create(mask: int, p: int):
    if (mask >> p) & 1:
        return None
    sign = -1 if (mask & ((1 << p) - 1)).bit_count() & 1 else 1
    return mask | (1 << p), sign


def _double_phase(mask: int, i: int, j: int, b: int, a: int) -> int:
    """Phase of a+_a a+_b a_j a_i applied to a spin string."""
    sign = 1
    for op, p in ((_annihilate, i), (_annihilate, j), (_create, b), (_create, a)):
        res = op(mask, p)
        if res is None:
            raise ValueError("invalid double excitation")
        mask, s = res
        sign *= s
    return sign


def diagonal_element(h, d: Determinant) -> float:
    """<d|H|d> including the core energy."""
    occ_a = occupied_orbitals(d.alpha)
    occ_b = occupied_orbitals(d.beta)
    eri = h.eri
    val = h.e_core
    val += sum(h.h_one[p, p] for p in occ_a)
    val += sum(h.h_one[p, p] for p in occ_b)
    for occ in (occ_a, occ_b):
        for ii, p in enumerate(occ):
            for q in occ[ii + 1:]:
                val += eri[p, p, q, q] - eri[p, q, q, p]
    for p in occ_a:
        for q in occ_b:
            val += eri[p, p, q, q]
    return float(val)


def _single_element(h, a: int, i: int, occ_same: list[int], occ_other: list[int]) -> float:
    """Spatial part of <...a...|H|...i...> for a single excitation i->a."""
    eri = h.eri
    val = h.h_one[a, i]
    for p in occ_same:
        val += eri[a, i, p, p] - eri[a, p, p, i]
    for p in occ_other:
        val += eri[a, i, p, p]
    return float(val)


def matrix_element(h, d1: Determinant, d2: Determinant) -> float:
    """Slater-Condon matrix element <d1|H|d2>.

    Zero when the excitation degree exceeds 2; the diagonal includes e_core.
    Raises ValueError on a particle-number mismatch.
    """
    if d1.alpha.bit_count() != d2.alpha.bit_count() or d1.beta.bit_count() != d2.beta.bit_count():
        raise ValueError("determinants live in different particle-number sectors")

    diff_a = d1.alpha ^ d2.alpha
    diff_b = d1.beta ^ d2.beta
    deg_a = diff_a.bit_count() // 2
    deg_b = diff_b.bit_count() // 2
    degree = deg_a + deg_b
    if degree > 2:
        return 0.0
    if degree == 0:
        return diagonal_element(h, d2)

    if degree == 1:
        if deg_a == 1:
            same2, other2, diff = d2.alpha, d2.beta, diff_a
        else:
            same2, other2, diff = d2.beta, d2.alpha, diff_b
        i = (diff & same2).bit_length() - 1  # occupied in d2 only
        a = (diff & ~same2).bit_length() - 1  # occupied in d1 only
        occ_same = occupied_orbitals(same2 & ~(1 << i))
        occ_other = occupied_orbitals(other2)
        sign = _parity_between(same2, i, a)
        return sign * _single_element(h, a, i, occ_same, occ_other)

    if deg_a == 1 and deg_b == 1:
        ia = (diff_a & d2.alpha).bit_length() - 1
        aa = (diff_a & ~d2.alpha).bit_length() - 1
        ib = (diff_b & d2.beta).bit_length() - 1
        ab = (diff_b & ~d2.beta).bit_length() - 1
        sign = _parity_between(d2.alpha, ia, aa) * _parity_between(d2.beta, ib, ab)
        return sign * float(h.eri[aa, ia, ab, ib])

    # Same-spin double excitation {i,j} -> {a,b}.
    if deg_a == 2:
        same2, diff = d2.alpha, diff_a
    else:
        same2, diff = d2.beta, diff_b
    holes = occupied_orbitals(diff & same2)
    parts = occupied_orbitals(diff & ~same2)
    i, j = holes
    a, b = parts
    sign = _double_phase(same2, i, j, b, a)
    return sign * float(h.eri[a, i, b, j] - h.eri[b, i, a, j])


def _spin_singles(mask: int, m: int):
    """All (new_mask, a, i, sign) single excitations i->a within one spin."""
    occ = occupied_orbitals(mask)
    out = []
    for i in occ:
        for a in range(m):
            if (mask >> a) & 1:
                continue
            out.append((mask ^ (1 << i) | (1 << a), a, i, _parity_between(mask, i, a)))
    return out


def connected(h, d: Determinant) -> list[tuple[Determinant, float]]:
    """Singles and doubles d' from d with nonzero <d'|H|d>, excluding d."""
    m = h.m_orbitals
    eri = h.eri
    occ_a = occupied_orbitals(d.alpha)
    occ_b = occupied_orbitals(d.beta)
    virt_a = [p for p in range(m) if not (d.alpha >> p) & 1]
    virt_b = [p for p in range(m) if not (d.beta >> p) & 1]
    out = []

    singles_a = _spin_singles(d.alpha, m)
    singles_b = _spin_singles(d.beta, m)
    for mask, a, i, sign in singles_a:
        occ_rest = [p for p in occ_a if p != i]
        val = sign * _single_element(h, a, i, occ_rest, occ_b)
        if val != 0.0:
            out.append((Determinant(mask, d.beta), val))
    for mask, a, i, sign in singles_b:
        occ_rest = [p for p in occ_b if p != i]
        val = sign * _single_element(h, a, i, occ_rest, occ_a)
        if val != 0.0:
            out.append((Determinant(d.alpha, mask), val))

    # Same-spin doubles.
    for mask0, occ, which in ((d.alpha, occ_a, 0), (d.beta, occ_b, 1)):
        virt = virt_a if which == 0 else virt_b
        for i, j in combinations(occ, 2):
            for a, b in combinations(virt, 2):
                val = eri[a, i, b, j] - eri[b, i, a, j]
                if val == 0.0:
                    continue
                sign = _double_phase(mask0, i, j, b, a)
                mask = mask0 ^ (1 << i) ^ (1 << j) | (1 << a) | (1 << b)
                dd = Determinant(mask, d.beta) if which == 0 else Determinant(d.alpha, mask)
                out.append((dd, sign * float(val)))

    # Opposite-spin doubles.
    for mask_a, aa, ia, sign_a in singles_a:
        for mask_b, ab, ib, sign_b in singles_b:
            val = eri[aa, ia, ab, ib]
            if val == 0.0:
                continue
            out.append((Determinant(mask_a, mask_b), sign_a * sign_b * float(val)))

    return out


def occupancy_matrix(masks, m: int) -> np.ndarray:
    """Rows of 0/1 orbital occupations for a sequence of spin strings."""
    arr = np.asarray(list(masks), dtype=np.int64).reshape(-1)
    return ((arr[:, None] >> np.arange(m)) & 1).astype(float)


def basis_occupancy(basis: list[Determinant], m: int) -> np.ndarray:
    """(len(basis), 2M) occupancy array, alpha block first."""
    occ_a = occupancy_matrix([d.alpha for d in basis], m)
    occ_b = occupancy_matrix([d.beta for d in basis], m)
    return np.hstack([occ_a, occ_b])


def build_dense(h, sector: tuple[int, int], cap: int = 20000) -> np.ndarray:
    """Full Hamiltonian matrix over the canonical-ordered sector basis.

    Brute-force oracle for tests and the casci_oracle method; refuses sectors
    larger than ``cap`` determinants.
    """
    n_alpha, n_beta = sector
    dim = sector_dimension(h.m_orbitals, n_alpha, n_beta)
    if dim > cap:
        raise SectorSizeError(f"sector dimension {dim} exceeds cap {cap}")
    basis = sector_basis(h.m_orbitals, n_alpha, n_beta)
    index = {d: i for i, d in enumerate(basis)}
    mat = np.zeros((dim, dim))
    for j, d in enumerate(basis):
        mat[j, j] = diagonal_element(h, d)
        for dp, val in connected(h, d):
            i = index.get(dp)
            if i is not None:
                mat[i, j] = val
    return mat
