"""Subspace projection and eigensolvers.

A subspace is the Cartesian product of unique alpha and beta spin strings.
The projected Hamiltonian is applied matrix-free through per-spin excitation
tables: same-spin blocks act on one string list, and the cross-spin
density-density coupling is contracted one orbital pair at a time, so memory
stays linear in the subspace dimension.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import (
    CiVector,
    Determinant,
    SectorSizeError,
    _double_phase,
    _spin_singles,
    connected,
    diagonal_element,
    occupancy_matrix,
    occupied_orbitals,
    sector_dimension,
    sector_strings,
)

__all__ = [
    "Subspace",
    "EigResult",
    "SolverOptions",
    "SolverConvergenceError",
    "build_subspace",
    "full_sector_subspace",
    "davidson_ground",
    "variance",
    "hci_ground",
]


class SolverConvergenceError(RuntimeError):
    """Davidson failed to reach the residual tolerance."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class Subspace:
    """Cartesian product of unique alpha and beta strings (sorted)."""

    alpha_strings: tuple[int, ...]
    beta_strings: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return len(self.alpha_strings) * len(self.beta_strings)

    def basis(self) -> list[Determinant]:
        return [Determinant(a, b) for a in self.alpha_strings for b in self.beta_strings]


@dataclass
class EigResult:
    """Ground-state solve output for one subspace."""

    energy: float
    state: CiVector
    occupations: np.ndarray
    variance: float
    d_significant: int
    dimension: int = 0
    iterations: int = 0


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 300
    restart: int = 20
    dense_dimension: int = 100
    compute_variance: bool = True
    variance_sector_cap: int = 300_000
    variance_basis_cap: int = 4000
    significant_weight: float = 1e-8
    hci_det_cap: int = 20000


def build_subspace(batch) -> Subspace:
    """Unique alpha strings x unique beta strings spanned by a batch."""
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    na = batch[0].alpha.bit_count()
    nb = batch[0].beta.bit_count()
    alphas, betas = set(), set()
    for d in batch:
        if d.alpha.bit_count() != na or d.beta.bit_count() != nb:
            raise ValueError("batch mixes particle-number sectors")
        alphas.add(d.alpha)
        betas.add(d.beta)
    return Subspace(tuple(sorted(alphas)), tuple(sorted(betas)))


def full_sector_subspace(m: int, n_alpha: int, n_beta: int) -> Subspace:
    return Subspace(
        tuple(sector_strings(m, n_alpha)), tuple(sector_strings(m, n_beta))
    )


def _same_spin_matrix(h, strings, index):
    """One-spin restricted Hamiltonian (h plus antisymmetrized same-spin
    two-body) over a string list, as a symmetric CSR matrix."""
    m = h.m_orbitals
    h1, eri = h.h_one, h.eri
    n = len(strings)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for col, mask in enumerate(strings):
        occ = occupied_orbitals(mask)
        occ_arr = np.asarray(occ, dtype=int)
        dval = float(h1[occ_arr, occ_arr].sum()) if occ else 0.0
        for ii, p in enumerate(occ):
            for q in occ[ii + 1:]:
                dval += eri[p, p, q, q] - eri[p, q, q, p]
        diag[col] = dval
        virt = [p for p in range(m) if not (mask >> p) & 1]
        for mask2, a, i, sign in _spin_singles(mask, m):
            row = index.get(mask2)
            if row is None:
                continue
            rest = occ_arr[occ_arr != i]
            val = h1[a, i]
            if rest.size:
                val += float(eri[a, i, rest, rest].sum() - eri[a, rest, rest, i].sum())
            rows.append(row)
            cols.append(col)
            vals.append(sign * val)
        for i, j in combinations(occ, 2):
            for a, b in combinations(virt, 2):
                val = eri[a, i, b, j] - eri[b, i, a, j]
                if val == 0.0:
                    continue
                mask2 = mask ^ (1 << i) ^ (1 << j) | (1 << a) | (1 << b)
                row = index.get(mask2)
                if row is None:
                    continue
                rows.append(row)
                cols.append(col)
                vals.append(_double_phase(mask, i, j, b, a) * float(val))
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat = mat + sp.diags(diag)
    return mat.tocsr(), diag


def _excitation_table(strings, index, m):
    """Transitions (row, col, p, r, sign) of E_pr = a+_p a_r within a list,
    including the diagonal number operators p = r."""
    rows, cols, ps, rs, signs = [], [], [], [], []
    for col, mask in enumerate(strings):
        for p in occupied_orbitals(mask):
            rows.append(col)
            cols.append(col)
            ps.append(p)
            rs.append(p)
            signs.append(1)
        for mask2, a, i, sign in _spin_singles(mask, m):
            row = index.get(mask2)
            if row is None:
                continue
            rows.append(row)
            cols.append(col)
            ps.append(a)
            rs.append(i)
            signs.append(sign)
    return (
        np.asarray(rows, dtype=np.intp),
        np.asarray(cols, dtype=np.intp),
        np.asarray(ps, dtype=np.intp),
        np.asarray(rs, dtype=np.intp),
        np.asarray(signs, dtype=float),
    )


class ProjectedHamiltonian:
    """Matrix-free H restricted to a Cartesian-product subspace."""

    def __init__(self, h, subspace: Subspace):
        self.h = h
        self.subspace = subspace
        m = h.m_orbitals
        self.m = m
        alphas = list(subspace.alpha_strings)
        betas = list(subspace.beta_strings)
        self.na, self.nb = len(alphas), len(betas)
        idx_a = {s: i for i, s in enumerate(alphas)}
        idx_b = {s: i for i, s in enumerate(betas)}
        self.index_alpha = idx_a
        self.index_beta = idx_b

        self.h_alpha, diag_a = _same_spin_matrix(h, alphas, idx_a)
        self.h_beta, diag_b = _same_spin_matrix(h, betas, idx_b)

        # Cross-spin term: sum_qs W_qs (alpha side) x E_qs (beta side), with
        # W_qs = sum_pr (pr|qs) E^alpha_pr.
        rows, cols, ps, rs, signs = _excitation_table(alphas, idx_a, m)
        w_data = signs[:, None] * h.eri[ps, rs].reshape(len(ps), m * m)
        rows_b, cols_b, ps_b, rs_b, signs_b = _excitation_table(betas, idx_b, m)

        w_blocks, e_blocks = [], []
        for (q, s) in {(int(q), int(s)) for q, s in zip(ps_b, rs_b)}:
            col_qs = w_data[:, q * m + s]
            if not np.any(col_qs):
                continue
            w = sp.csr_matrix((col_qs, (rows, cols)), shape=(self.na, self.na))
            w.eliminate_zeros()
            if w.nnz == 0:
                continue
            sel = (ps_b == q) & (rs_b == s)
            e = sp.csr_matrix(
                (signs_b[sel], (rows_b[sel], cols_b[sel])), shape=(self.nb, self.nb)
            )
            w_blocks.append(w)
            e_blocks.append(e)
        # One block-row of W matrices and one stacked E matrix turn the
        # pair-by-pair contraction into two sparse products per matvec.
        self._n_cross = len(w_blocks)
        if self._n_cross:
            self._w_row = sp.hstack(w_blocks, format="csr")
            self._e_stack = sp.vstack(e_blocks, format="csr")

        occ_a = occupancy_matrix(alphas, m)
        occ_b = occupancy_matrix(betas, m)
        self.occ_alpha = occ_a
        self.occ_beta = occ_b
        coul = np.einsum("ppqq->pq", h.eri)
        self._diag = (
            h.e_core
            + diag_a[:, None]
            + diag_b[None, :]
            + occ_a @ coul @ occ_b.T
        )

    @property
    def dimension(self) -> int:
        return self.na * self.nb

    def diagonal(self) -> np.ndarray:
        return self._diag.ravel()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        c = x.reshape(self.na, self.nb)
        sigma = self.h.e_core * c
        sigma += self.h_alpha @ c
        sigma += (self.h_beta @ c.T).T
        if self._n_cross:
            t = (self._e_stack @ c.T).reshape(self._n_cross, self.nb, self.na)
            t = np.ascontiguousarray(t.transpose(0, 2, 1)).reshape(-1, self.nb)
            sigma += self._w_row @ t
        return sigma.ravel()

    def occupations(self, coeffs: np.ndarray) -> np.ndarray:
        """Spin-orbital <n_p,sigma> of a normalized subspace vector."""
        c2 = (coeffs.reshape(self.na, self.nb)) ** 2
        occ_a = c2.sum(axis=1) @ self.occ_alpha
        occ_b = c2.sum(axis=0) @ self.occ_beta
        return np.concatenate([occ_a, occ_b])


def _full_sector_operator(h, n_alpha, n_beta) -> ProjectedHamiltonian:
    """Memoized full-sector projection, reused across variance evaluations."""
    cache = getattr(h, "_sector_operator_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(h, "_sector_operator_cache", cache)
    key = (n_alpha, n_beta)
    if key not in cache:
        cache[key] = ProjectedHamiltonian(
            h, full_sector_subspace(h.m_orbitals, n_alpha, n_beta)
        )
    return cache[key]


def _davidson(matvec, diag, dim, opts: SolverOptions, v0=None):
    """Lowest eigenpair by the Davidson method with a diagonal preconditioner."""
    if dim == 0:
        raise ValueError("empty subspace")
    if dim <= opts.dense_dimension:
        mat = np.column_stack([matvec(col) for col in np.eye(dim)])
        mat = 0.5 * (mat + mat.T)
        evals, evecs = np.linalg.eigh(mat)
        return float(evals[0]), evecs[:, 0], 1

    if v0 is None:
        # Start on the lowest-diagonal basis state, plus a small deterministic
        # perturbation so the Krylov space cannot stay trapped in an invariant
        # symmetry sector that excludes the ground state.
        v0 = 1e-3 * np.random.default_rng(0).standard_normal(dim)
        v0[int(np.argmin(diag))] = 1.0
    v = v0 / np.linalg.norm(v0)
    V = v[:, None]
    W = matvec(v)[:, None]
    best_res = np.inf
    for it in range(1, opts.max_iter + 1):
        T = V.T @ W
        T = 0.5 * (T + T.T)
        evals, evecs = np.linalg.eigh(T)
        theta = float(evals[0])
        s = evecs[:, 0]
        x = V @ s
        r = W @ s - theta * x
        rnorm = float(np.linalg.norm(r))
        best_res = min(best_res, rnorm)
        if rnorm < opts.tol:
            return theta, x / np.linalg.norm(x), it
        denom = theta - diag
        denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
        t = r / denom
        if V.shape[1] >= min(opts.restart, dim - 1):
            V = x[:, None]
            W = (W @ s)[:, None]
        # Orthogonalize the correction against the search space (twice).
        for _ in range(2):
            t -= V @ (V.T @ t)
        tnorm = np.linalg.norm(t)
        if tnorm < 1e-12:
            t = np.random.default_rng(it).standard_normal(dim)
            for _ in range(2):
                t -= V @ (V.T @ t)
            tnorm = np.linalg.norm(t)
        t /= tnorm
        V = np.hstack([V, t[:, None]])
        W = np.hstack([W, matvec(t)[:, None]])
    raise SolverConvergenceError(
        f"Davidson did not converge in {opts.max_iter} iterations "
        f"(best residual {best_res:.3e})",
        best_residual=best_res,
    )


def _finalize(h, basis, coeffs, opts):
    coeffs = coeffs / np.linalg.norm(coeffs)
    state = CiVector(basis, coeffs)
    var = float("nan")
    if opts.compute_variance:
        var = variance(
            h,
            state,
            sector_cap=opts.variance_sector_cap,
            basis_cap=opts.variance_basis_cap,
        )
    d_sig = int(np.count_nonzero(coeffs**2 > opts.significant_weight))
    return state, var, d_sig


def davidson_ground(h, s: Subspace, opts: SolverOptions | None = None, v0=None) -> EigResult:
    """Lowest eigenpair of the Hamiltonian projected on a product subspace."""
    opts = opts or SolverOptions()
    ph = ProjectedHamiltonian(h, s)
    energy, vec, iters = _davidson(ph.matvec, ph.diagonal(), ph.dimension, opts, v0=v0)
    state, var, d_sig = _finalize(h, s.basis(), vec, opts)
    return EigResult(
        energy=energy,
        state=state,
        occupations=ph.occupations(state.coeffs),
        variance=var,
        d_significant=d_sig,
        dimension=ph.dimension,
        iterations=iters,
    )


def variance(h, state: CiVector, sector_cap: int = 300_000, basis_cap: int = 4000) -> float:
    """Hamiltonian variance <H^2> - <H>^2 with H applied exactly.

    Uses a full-sector matrix-free application when the sector fits under
    ``sector_cap``; otherwise falls back to direct enumeration of connected
    determinants (only viable for small bases, hence ``basis_cap``).
    """
    if not state.basis:
        raise ValueError("empty CI vector")
    m = h.m_orbitals
    d0 = state.basis[0]
    n_alpha, n_beta = d0.alpha.bit_count(), d0.beta.bit_count()
    coeffs = state.coeffs / np.linalg.norm(state.coeffs)

    if sector_dimension(m, n_alpha, n_beta) <= sector_cap:
        ph = _full_sector_operator(h, n_alpha, n_beta)
        c = np.zeros((ph.na, ph.nb))
        for d, v in zip(state.basis, coeffs):
            c[ph.index_alpha[d.alpha], ph.index_beta[d.beta]] = v
        w = ph.matvec(c.ravel())
        e = float(c.ravel() @ w)
        var = float(w @ w) - e * e
    else:
        if len(state.basis) > basis_cap:
            raise SectorSizeError(
                "variance: sector too large for matrix-free application and "
                f"basis larger than {basis_cap} for direct enumeration"
            )
        amp: dict[Determinant, float] = {}
        index = {d: i for i, d in enumerate(state.basis)}
        for d, v in zip(state.basis, coeffs):
            amp[d] = amp.get(d, 0.0) + v * diagonal_element(h, d)
            for dp, hval in connected(h, d):
                amp[dp] = amp.get(dp, 0.0) + v * hval
        e = sum(coeffs[index[d]] * a for d, a in amp.items() if d in index)
        var = sum(a * a for a in amp.values()) - e * e
    if -1e-12 < var < 0.0:
        var = 0.0
    return var


def _detlist_eig(h, dets, opts: SolverOptions):
    """Ground state over an arbitrary determinant list (dense or eigsh)."""
    basis = sorted(set(dets))
    n = len(basis)
    index = {d: i for i, d in enumerate(basis)}
    if n == 1:
        return diagonal_element(h, basis[0]), np.ones(1), basis
    rows, cols, vals = [], [], []
    for j, d in enumerate(basis):
        rows.append(j)
        cols.append(j)
        vals.append(diagonal_element(h, d))
        for dp, v in connected(h, d):
            i = index.get(dp)
            if i is not None:
                rows.append(i)
                cols.append(j)
                vals.append(v)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    if n <= 600:
        evals, evecs = np.linalg.eigh(mat.toarray())
        return float(evals[0]), evecs[:, 0], basis
    evals, evecs = spla.eigsh(mat, k=1, which="SA")
    return float(evals[0]), evecs[:, 0], basis


def hci_ground(h, sector: tuple[int, int], eps1_schedule, opts: SolverOptions | None = None) -> EigResult:
    """Variational heat-bath selection: grow the determinant set by admitting
    connected determinants whose coupling to the current wavefunction exceeds
    eps1, tightening eps1 along the schedule. No perturbative correction."""
    opts = opts or SolverOptions()
    eps1_schedule = list(eps1_schedule)
    if not eps1_schedule:
        raise ValueError("empty eps1 schedule")
    if any(e <= 0 for e in eps1_schedule):
        raise ValueError("eps1 thresholds must be positive")
    if any(b > a for a, b in zip(eps1_schedule, eps1_schedule[1:])):
        raise ValueError("eps1 schedule must be nonincreasing")

    n_alpha, n_beta = sector
    ref = Determinant((1 << n_alpha) - 1, (1 << n_beta) - 1)
    space = {ref}
    conn_cache: dict[Determinant, list] = {}
    energy, coeffs, basis = _detlist_eig(h, space, opts)
    iterations = 0
    for eps in eps1_schedule:
        while True:
            added = False
            for d, c in zip(basis, coeffs):
                if d not in conn_cache:
                    conn_cache[d] = connected(h, d)
                ac = abs(c)
                for dp, hval in conn_cache[d]:
                    if dp not in space and abs(hval) * ac > eps:
                        space.add(dp)
                        added = True
            if len(space) > opts.hci_det_cap:
                raise SectorSizeError(
                    f"HCI selection grew past the cap of {opts.hci_det_cap} determinants"
                )
            if not added:
                break
            energy, coeffs, basis = _detlist_eig(h, space, opts)
            iterations += 1

    state = CiVector(basis, coeffs).normalize()
    m = h.m_orbitals
    from .fock import basis_occupancy

    occ = (state.coeffs**2) @ basis_occupancy(basis, m)
    var = float("nan")
    if opts.compute_variance:
        var = variance(
            h, state, sector_cap=opts.variance_sector_cap, basis_cap=opts.variance_basis_cap
        )
    d_sig = int(np.count_nonzero(state.coeffs**2 > opts.significant_weight))
    return EigResult(
        energy=energy,
        state=state,
        occupations=occ,
        variance=var,
        d_significant=d_sig,
        dimension=len(basis),
        iterations=iterations,
    )
