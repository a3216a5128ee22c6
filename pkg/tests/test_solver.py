"""Subspace projection, Davidson, variance, and HCI selection."""
import numpy as np
import pytest

from sqdkit.fock import (
    CiVector,
    Determinant,
    SectorSizeError,
    build_dense,
    connected,
    diagonal_element,
    matrix_element,
    sector_basis,
)
from sqdkit.solver import (
    SolverOptions,
    Subspace,
    build_subspace,
    davidson_ground,
    full_sector_subspace,
    hci_ground,
    variance,
)
from tests.util import random_hamiltonian


def test_build_subspace_single_determinant():
    s = build_subspace([Determinant(0b0011, 0b0101)])
    assert s.dimension == 1
    assert s.basis() == [Determinant(0b0011, 0b0101)]


def test_build_subspace_product_rule():
    batch = [
        Determinant(0b0011, 0b0011),
        Determinant(0b0011, 0b0101),
        Determinant(0b0101, 0b0110),
    ]
    s = build_subspace(batch)
    assert len(s.alpha_strings) == 2 and len(s.beta_strings) == 3
    assert s.dimension == 6
    assert set(batch) <= set(s.basis())


def test_build_subspace_rejects_mixed_sectors():
    with pytest.raises(ValueError, match="sector"):
        build_subspace([Determinant(0b0011, 0b0011), Determinant(0b0111, 0b0011)])


def test_davidson_dimension_one():
    h = random_hamiltonian(4, 2, 2, seed=0)
    d = Determinant(0b0011, 0b0101)
    res = davidson_ground(h, build_subspace([d]))
    assert res.energy == pytest.approx(diagonal_element(h, d), abs=1e-12)


def test_davidson_two_by_two_closed_form():
    h = random_hamiltonian(2, 1, 1, seed=3, scale=0.8)
    s = Subspace(alpha_strings=(0b01,), beta_strings=(0b01, 0b10))
    d1, d2 = s.basis()
    a = matrix_element(h, d1, d1)
    b = matrix_element(h, d2, d2)
    c = matrix_element(h, d1, d2)
    expected = ((a + b) - np.sqrt((a - b) ** 2 + 4 * c * c)) / 2
    res = davidson_ground(h, s)
    assert res.energy == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_davidson_matches_dense_on_random_subspaces(seed):
    h = random_hamiltonian(6, 2, 2, seed=seed, scale=0.5)
    rng = np.random.default_rng(seed)
    basis = sector_basis(6, 2, 2)
    batch = [basis[i] for i in rng.choice(len(basis), size=40, replace=False)]
    s = build_subspace(batch)
    res = davidson_ground(h, s)
    sub = s.basis()
    mat = np.array([[matrix_element(h, x, y) for y in sub] for x in sub])
    assert res.energy == pytest.approx(np.linalg.eigvalsh(mat)[0], abs=1e-10)
    # Rayleigh quotient consistency.
    v = res.state.coeffs
    assert v @ mat @ v == pytest.approx(res.energy, abs=1e-10)


def test_davidson_iterative_path_beyond_dense_cutoff():
    h = random_hamiltonian(6, 3, 3, seed=4, scale=0.4)
    s = full_sector_subspace(6, 3, 3)  # d = 400 forces the iterative branch
    opts = SolverOptions(dense_dimension=100)
    res = davidson_ground(h, s, opts)
    e0 = np.linalg.eigvalsh(build_dense(h, (3, 3)))[0]
    assert res.energy == pytest.approx(e0, abs=1e-10)
    assert res.iterations > 1
    assert res.variance < 1e-10


def test_subspace_monotonicity():
    h = random_hamiltonian(5, 2, 2, seed=6, scale=0.5)
    basis = sector_basis(5, 2, 2)
    rng = np.random.default_rng(1)
    order = rng.permutation(len(basis))
    prev = np.inf
    for n in (4, 12, 30, len(basis)):
        s = build_subspace([basis[i] for i in order[:n]])
        e = davidson_ground(h, s).energy
        assert e <= prev + 1e-12
        prev = e


def test_occupations_sum_to_electron_count():
    h = random_hamiltonian(5, 2, 1, seed=2)
    res = davidson_ground(h, full_sector_subspace(5, 2, 1))
    assert res.occupations.shape == (10,)
    assert res.occupations.sum() == pytest.approx(3.0, abs=1e-10)
    assert res.occupations[:5].sum() == pytest.approx(2.0, abs=1e-10)


def test_variance_zero_at_exact_eigenvector():
    h = random_hamiltonian(4, 2, 2, seed=7)
    res = davidson_ground(h, full_sector_subspace(4, 2, 2))
    assert 0.0 <= res.variance < 1e-10


def test_variance_single_determinant_connected_sum():
    h = random_hamiltonian(4, 2, 2, seed=8, scale=0.7)
    d = Determinant(0b0011, 0b0011)
    state = CiVector([d], np.ones(1))
    expected = sum(v * v for _, v in connected(h, d))
    assert variance(h, state) == pytest.approx(expected, abs=1e-12)


def test_variance_nonnegative_and_paths_agree():
    h = random_hamiltonian(4, 2, 2, seed=9)
    basis = sector_basis(4, 2, 2)[:7]
    rng = np.random.default_rng(0)
    state = CiVector(basis, rng.standard_normal(7)).normalize()
    full = variance(h, state, sector_cap=300_000)
    enum = variance(h, state, sector_cap=0, basis_cap=100)
    assert full >= 0.0
    assert enum == pytest.approx(full, abs=1e-11)


def test_variance_shrinks_toward_full_sector():
    h = random_hamiltonian(4, 2, 2, seed=10, scale=0.5)
    basis = sector_basis(4, 2, 2)
    e0, v0 = np.linalg.eigh(build_dense(h, (2, 2)))
    order = np.argsort(-np.abs(v0[:, 0]))
    variances = []
    for n in (6, 14, 24, 36):
        s = build_subspace([basis[i] for i in order[:n]])
        variances.append(davidson_ground(h, s).variance)
    assert variances[-1] < 1e-10
    assert variances == sorted(variances, reverse=True)


def test_variance_cap_error():
    h = random_hamiltonian(4, 2, 2, seed=0)
    state = CiVector(sector_basis(4, 2, 2)[:5], np.ones(5)).normalize()
    with pytest.raises(SectorSizeError):
        variance(h, state, sector_cap=0, basis_cap=2)


def test_hci_large_eps_returns_reference_energy():
    h = random_hamiltonian(4, 2, 2, seed=11)
    ref = Determinant(0b0011, 0b0011)
    res = hci_ground(h, (2, 2), [1e6])
    assert res.dimension == 1
    assert res.energy == pytest.approx(diagonal_element(h, ref), abs=1e-12)


def test_hci_zero_limit_matches_fci():
    h = random_hamiltonian(4, 2, 2, seed=12, scale=0.6)
    res = hci_ground(h, (2, 2), [1e-12])
    e0 = np.linalg.eigvalsh(build_dense(h, (2, 2)))[0]
    assert res.energy == pytest.approx(e0, abs=1e-8)


def test_hci_monotone_along_schedule():
    h = random_hamiltonian(5, 2, 2, seed=13, scale=0.5)
    schedule = [1e-1, 1e-2, 1e-3, 1e-6]
    energies = [
        hci_ground(h, (2, 2), schedule[: i + 1]).energy for i in range(len(schedule))
    ]
    for a, b in zip(energies, energies[1:]):
        assert b <= a + 1e-12


def test_hci_schedule_validation():
    h = random_hamiltonian(4, 2, 2, seed=0)
    with pytest.raises(ValueError):
        hci_ground(h, (2, 2), [])
    with pytest.raises(ValueError):
        hci_ground(h, (2, 2), [1e-6, 1e-3])
    with pytest.raises(ValueError):
        hci_ground(h, (2, 2), [-1.0])


def test_hci_det_cap():
    h = random_hamiltonian(6, 3, 3, seed=14)
    opts = SolverOptions(hci_det_cap=5)
    with pytest.raises(SectorSizeError):
        hci_ground(h, (3, 3), [1e-8], opts)


def test_d_significant_counts_weights():
    h = random_hamiltonian(4, 2, 2, seed=15, scale=0.5)
    res = davidson_ground(h, full_sector_subspace(4, 2, 2))
    weights = res.state.coeffs**2
    assert res.d_significant == int(np.count_nonzero(weights > 1e-8))
    assert 1 <= res.d_significant <= res.dimension
