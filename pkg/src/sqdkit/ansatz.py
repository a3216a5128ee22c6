"""Orbital-rotation / Jastrow-phase state preparation in a fixed
particle-number determinant sector.

The ansatz alternates orthogonal orbital rotations exp(K) (K antisymmetric)
with diagonal density-density phase layers, applied to the closed-shell
reference determinant. Amplitudes are complex internally; only their squared
moduli reach the sampler.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .fock import Determinant, basis_occupancy, sector_basis, sector_strings
from .solver import _excitation_table

__all__ = [
    "LucjParams",
    "StateVector",
    "prepare_rhf",
    "apply_orbital_rotation",
    "apply_jastrow",
    "prepare_lucj",
    "default_locality_mask",
    "random_params",
    "load_params",
    "save_params",
]

_ANTISYM_TOL = 1e-12


def _check_antisymmetric(k: np.ndarray, m: int):
    k = np.asarray(k, dtype=float)
    if k.shape != (m, m):
        raise ValueError(f"K must be {m}x{m}, got {k.shape}")
    if np.max(np.abs(k + k.T)) > _ANTISYM_TOL:
        raise ValueError("K is not antisymmetric")
    return k


def _check_jastrow(j: np.ndarray, m: int, mask=None):
    j = np.asarray(j, dtype=float)
    if j.shape != (2 * m, 2 * m):
        raise ValueError(f"J must be {2 * m}x{2 * m}, got {j.shape}")
    if np.max(np.abs(j - j.T)) > _ANTISYM_TOL:
        raise ValueError("J is not symmetric")
    if mask is not None and np.any(j[~np.asarray(mask, dtype=bool)] != 0.0):
        raise ValueError("J has nonzero entries outside the locality mask")
    return j


@dataclass
class LucjParams:
    """Explicit ansatz parameters: one (K, J) pair per layer plus an optional
    trailing orbital rotation, with an optional locality mask on J."""

    m: int
    layers: list[tuple[np.ndarray, np.ndarray]]
    k_final: np.ndarray | None = None
    locality_mask: np.ndarray | None = None

    def __post_init__(self):
        mask = None
        if self.locality_mask is not None:
            mask = np.asarray(self.locality_mask, dtype=bool)
            if mask.shape != (2 * self.m, 2 * self.m):
                raise ValueError("locality mask has wrong shape")
            self.locality_mask = mask
        self.layers = [
            (_check_antisymmetric(k, self.m), _check_jastrow(j, self.m, mask))
            for k, j in self.layers
        ]
        if self.k_final is not None:
            self.k_final = _check_antisymmetric(self.k_final, self.m)


@dataclass
class StateVector:
    """Complex amplitudes over the canonical (n_alpha, n_beta) sector basis."""

    m: int
    n_alpha: int
    n_beta: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

    def basis(self) -> list[Determinant]:
        return sector_basis(self.m, self.n_alpha, self.n_beta)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def prepare_rhf(m: int, n_alpha: int, n_beta: int) -> StateVector:
    """Unit amplitude on the closed-shell reference determinant."""
    if n_alpha != n_beta:
        raise ValueError("open-shell reference is not supported")
    if n_alpha > m:
        raise ValueError("more electrons than orbitals")
    alphas = sector_strings(m, n_alpha)
    betas = sector_strings(m, n_beta)
    ref = (1 << n_alpha) - 1
    amps = np.zeros(len(alphas) * len(betas), dtype=complex)
    amps[alphas.index(ref) * len(betas) + betas.index(ref)] = 1.0
    return StateVector(m, n_alpha, n_beta, amps)


def _one_body_generator(k: np.ndarray, m: int, n_alpha: int, n_beta: int):
    """Sparse sector-basis matrix of sum_{pr,sigma} K_pr a+_p a_r."""
    gens = []
    for n in (n_alpha, n_beta):
        strings = sector_strings(m, n)
        index = {s: i for i, s in enumerate(strings)}
        rows, cols, ps, rs, signs = _excitation_table(strings, index, m)
        data = signs * k[ps, rs]
        gens.append(sp.csr_matrix((data, (rows, cols)), shape=(len(strings),) * 2))
    ga, gb = gens
    return sp.kron(ga, sp.identity(gb.shape[0]), format="csr") + sp.kron(
        sp.identity(ga.shape[0]), gb, format="csr"
    )


def apply_orbital_rotation(v: StateVector, k: np.ndarray) -> StateVector:
    """exp(K_hat) v evaluated in the determinant sector (norm preserving)."""
    k = _check_antisymmetric(k, v.m)
    gen = _one_body_generator(k, v.m, v.n_alpha, v.n_beta)
    amps = expm_multiply(gen.astype(complex), v.amplitudes)
    return StateVector(v.m, v.n_alpha, v.n_beta, amps)


def apply_jastrow(v: StateVector, j: np.ndarray, mask=None) -> StateVector:
    """Diagonal phase layer: amplitude of |x> gains exp(i <x|J_hat|x>)."""
    j = _check_jastrow(j, v.m, mask)
    occ = basis_occupancy(v.basis(), v.m)
    phases = np.einsum("ip,pq,iq->i", occ, j, occ)
    return StateVector(v.m, v.n_alpha, v.n_beta, v.amplitudes * np.exp(1j * phases))


def prepare_lucj(params: LucjParams, h) -> StateVector:
    """Compose exp(-K_final) [prod_mu exp(K_mu) exp(iJ_mu) exp(-K_mu)] |RHF>."""
    if params.m != h.m_orbitals:
        raise ValueError("parameter and Hamiltonian orbital counts differ")
    v = prepare_rhf(h.m_orbitals, h.n_alpha, h.n_beta)
    for k, j in params.layers:
        v = apply_orbital_rotation(v, -k)
        v = apply_jastrow(v, j, params.locality_mask)
        v = apply_orbital_rotation(v, k)
    if params.k_final is not None:
        v = apply_orbital_rotation(v, -params.k_final)
    return v


def default_locality_mask(m: int) -> np.ndarray:
    """Allow same-orbital alpha-beta pairs, nearest-neighbor same-spin pairs,
    and the diagonal; everything else is frozen to zero."""
    mask = np.zeros((2 * m, 2 * m), dtype=bool)
    for p in range(m):
        mask[p, p] = mask[m + p, m + p] = True
        mask[p, m + p] = mask[m + p, p] = True
        if p + 1 < m:
            mask[p, p + 1] = mask[p + 1, p] = True
            mask[m + p, m + p + 1] = mask[m + p + 1, m + p] = True
    return mask


def random_params(m: int, seed: int = 0, scale: float = 0.1, layers: int = 1) -> LucjParams:
    """Small random parameters for demos and desk-scale tests: random
    antisymmetric K and a masked J built from the two-electron diagonal scale."""
    rng = np.random.default_rng(seed)
    mask = default_locality_mask(m)
    layer_list = []
    for _ in range(layers):
        a = rng.standard_normal((m, m)) * scale
        k = a - a.T
        j = rng.standard_normal((2 * m, 2 * m)) * scale
        j = 0.5 * (j + j.T)
        j[~mask] = 0.0
        layer_list.append((k, j))
    a = rng.standard_normal((m, m)) * scale
    return LucjParams(m=m, layers=layer_list, k_final=a - a.T, locality_mask=mask)


def load_params(source) -> LucjParams:
    """Read ansatz parameters from a JSON file path, file object, or dict."""
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source) as fh:
            data = json.load(fh)
    m = int(data["m"])
    layers = []
    for entry in data["layers"]:
        k = np.asarray(entry["K"], dtype=float).reshape(m, m)
        j = np.asarray(entry["J"], dtype=float).reshape(2 * m, 2 * m)
        layers.append((k, j))
    k_final = None
    if data.get("K_final") is not None:
        k_final = np.asarray(data["K_final"], dtype=float).reshape(m, m)
    mask = None
    if data.get("locality_mask") is not None:
        mask = np.asarray(data["locality_mask"], dtype=bool).reshape(2 * m, 2 * m)
    return LucjParams(m=m, layers=layers, k_final=k_final, locality_mask=mask)


def save_params(params: LucjParams, path):
    data = {
        "m": params.m,
        "layers": [
            {"K": k.ravel().tolist(), "J": j.ravel().tolist()}
            for k, j in params.layers
        ],
        "K_final": None if params.k_final is None else params.k_final.ravel().tolist(),
        "locality_mask": None
        if params.locality_mask is None
        else params.locality_mask.astype(int).ravel().tolist(),
    }
    with open(path, "w") as fh:
        json.dump(data, fh)
