"""Self-consistent configuration recovery."""
import json

import numpy as np
import pytest

from sqdkit.fock import sector_basis
from sqdkit.recovery import (
    InitializationError,
    OccupationEstimate,
    RecoveryConfig,
    initial_occupations,
    recover_configuration,
    recover_shots,
    run_recovery,
)
from sqdkit.sampler import NoiseSpec, ShotSet, sample
from sqdkit.ansatz import prepare_lucj, random_params
from sqdkit.fock import build_dense
from tests.util import random_hamiltonian


def shotset_from_rows(rows):
    bits = np.asarray(rows, dtype=np.uint8)
    return ShotSet(m=bits.shape[1] // 2, bits=bits)


def test_initial_occupations_single_string():
    shots = shotset_from_rows([[1, 1, 0, 0]] * 4)
    occ = initial_occupations(shots, (2, 0))
    np.testing.assert_allclose(occ.n_occ, [1, 1, 0, 0])


def test_initial_occupations_averaging():
    shots = shotset_from_rows([[1, 0, 1, 0], [0, 1, 0, 1]])
    occ = initial_occupations(shots, (1, 1))
    np.testing.assert_allclose(occ.n_occ, [0.5, 0.5, 0.5, 0.5])


def test_initial_occupations_filters_corrupt_shots():
    rows = [[1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 1, 0], [0, 0, 0, 0]]
    shots = shotset_from_rows(rows)
    occ = initial_occupations(shots, (1, 1))
    correct = np.array(rows[:2], dtype=float)
    np.testing.assert_allclose(occ.n_occ, correct.mean(axis=0))


def test_initial_occupations_requires_correct_shot():
    shots = shotset_from_rows([[1, 1, 1, 0]])
    with pytest.raises(InitializationError):
        initial_occupations(shots, (1, 1))


def test_recover_identity_on_correct_string():
    occ = OccupationEstimate(np.array([0.9, 0.1, 0.8, 0.2]))
    rng = np.random.default_rng(0)
    x = np.array([0, 1, 1, 0], dtype=np.uint8)
    d = recover_configuration(x, occ, (1, 1), rng)
    assert (d.alpha, d.beta) == (0b10, 0b01)


def test_surplus_never_flips_fully_occupied_orbitals():
    # Alpha occupations exactly (1,1,0,0): the flip-down weight (x - n)+
    # vanishes on the first two orbitals, so the surplus electron in orbital 2
    # is always the one removed.
    occ = OccupationEstimate(np.array([1.0, 1.0, 0.0, 0.0] + [0.0] * 4))
    rng = np.random.default_rng(1)
    x = np.array([1, 1, 1, 0, 0, 0, 0, 0], dtype=np.uint8)
    for _ in range(50):
        d = recover_configuration(x, occ, (2, 0), rng)
        assert d.alpha == 0b011
        assert d.beta == 0


def test_flip_frequencies_match_weights():
    # One surplus alpha electron among orbitals {0,1,2}; flip-down weights
    # are (1 - n) on occupied bits, so orbital p is removed with probability
    # (1 - n_p) / sum.
    n = np.array([0.9, 0.5, 0.2, 0.7])
    occ = OccupationEstimate(np.concatenate([n, n]))
    x = np.array([1, 1, 1, 0, 1, 1, 0, 0], dtype=np.uint8)
    rng = np.random.default_rng(2)
    trials = 20_000
    removed = np.zeros(4)
    for _ in range(trials):
        d = recover_configuration(x, occ, (2, 2), rng)
        lost = 0b0111 & ~d.alpha
        removed[lost.bit_length() - 1] += 1
    weights = np.clip(1 - n[:3], 0, None)
    probs = weights / weights.sum()
    for p in range(3):
        sigma = np.sqrt(trials * probs[p] * (1 - probs[p]))
        assert abs(removed[p] - trials * probs[p]) < 3.5 * sigma
    assert removed[3] == 0


def test_recover_shots_restores_particle_numbers():
    h = random_hamiltonian(5, 2, 2, seed=0)
    v = prepare_lucj(random_params(5, seed=1), h)
    shots = sample(v, 3000, NoiseSpec(0.1, seed=2))
    occ = initial_occupations(shots, (2, 2))
    fixed = recover_shots(shots, occ, (2, 2), np.random.default_rng(3))
    assert fixed.sector_mask(2, 2).all()
    # Sectors that were already correct pass through untouched.
    keep = shots.sector_mask(2, 2)
    assert np.array_equal(fixed.bits[keep], shots.bits[keep])


def test_run_recovery_reaches_fci_with_saturating_shots():
    h = random_hamiltonian(4, 2, 2, seed=3, scale=0.5)
    basis = sector_basis(4, 2, 2)
    bits = np.array([d.occupancy(4) for d in basis], dtype=np.uint8)
    shots = ShotSet(m=4, bits=bits)
    cfg = RecoveryConfig(k_batches=1, batch_size=len(basis), max_steps=2, seed=0)
    res = run_recovery(h, shots, cfg)
    e0 = np.linalg.eigvalsh(build_dense(h, (2, 2)))[0]
    assert res.energy == pytest.approx(e0, abs=1e-8)


def test_degenerate_batches_share_one_energy(tmp_path):
    h = random_hamiltonian(4, 2, 2, seed=4, scale=0.5)
    basis = sector_basis(4, 2, 2)
    bits = np.array([d.occupancy(4) for d in basis], dtype=np.uint8)
    shots = ShotSet(m=4, bits=bits)
    # batch_size equal to the pool makes all K batches identical.
    cfg = RecoveryConfig(k_batches=3, batch_size=len(basis), max_steps=1, seed=0)
    log = tmp_path / "steps.jsonl"
    res = run_recovery(h, shots, cfg, log_path=log)
    record = json.loads(log.read_text().splitlines()[0])
    energies = record["energies"]
    assert len(energies) == 3
    assert max(energies) - min(energies) < 1e-12
    assert res.energy == pytest.approx(energies[0], abs=1e-12)


def test_single_batch_occupations_match_ground_state():
    h = random_hamiltonian(4, 2, 2, seed=5, scale=0.5)
    basis = sector_basis(4, 2, 2)
    bits = np.array([d.occupancy(4) for d in basis], dtype=np.uint8)
    shots = ShotSet(m=4, bits=bits)
    cfg = RecoveryConfig(k_batches=1, batch_size=len(basis), max_steps=1, seed=0)
    res = run_recovery(h, shots, cfg)
    np.testing.assert_allclose(
        res.final_occ.n_occ, res.best_batch.occupations, atol=1e-12
    )


def test_run_recovery_deterministic():
    h = random_hamiltonian(5, 2, 2, seed=6, scale=0.4)
    v = prepare_lucj(random_params(5, seed=7), h)
    shots = sample(v, 2000, NoiseSpec(0.05, seed=8))
    cfg = RecoveryConfig(k_batches=3, batch_size=200, max_steps=3, seed=9)
    r1 = run_recovery(h, shots, cfg)
    r2 = run_recovery(h, shots, cfg)
    assert r1.energy == r2.energy
    assert r1.per_step_energies == r2.per_step_energies
    np.testing.assert_array_equal(r1.final_occ.n_occ, r2.final_occ.n_occ)


def test_run_recovery_threads_match_serial():
    h = random_hamiltonian(5, 2, 2, seed=10, scale=0.4)
    v = prepare_lucj(random_params(5, seed=11), h)
    shots = sample(v, 2000, NoiseSpec(0.05, seed=12))
    base = dict(k_batches=4, batch_size=150, max_steps=2, seed=13)
    r1 = run_recovery(h, shots, RecoveryConfig(threads=1, **base))
    r4 = run_recovery(h, shots, RecoveryConfig(threads=4, **base))
    assert r1.energy == r4.energy
    assert r1.per_step_energies == r4.per_step_energies


def test_run_recovery_energy_is_global_minimum():
    h = random_hamiltonian(5, 2, 2, seed=14, scale=0.4)
    v = prepare_lucj(random_params(5, seed=15), h)
    shots = sample(v, 2000, NoiseSpec(0.08, seed=16))
    cfg = RecoveryConfig(k_batches=2, batch_size=150, max_steps=4, seed=17)
    res = run_recovery(h, shots, cfg)
    assert res.energy == pytest.approx(min(res.per_step_energies), abs=0)
    assert res.steps_run == len(res.per_step_energies)


def test_config_validation():
    with pytest.raises(ValueError):
        RecoveryConfig(k_batches=0, batch_size=10)
    with pytest.raises(ValueError):
        RecoveryConfig(k_batches=1, batch_size=0)
    h = random_hamiltonian(4, 2, 2, seed=0)
    shots = shotset_from_rows([[1, 1, 0, 0, 1, 1, 0, 0]])
    with pytest.raises(ValueError, match="batch_size"):
        run_recovery(h, shots, RecoveryConfig(k_batches=1, batch_size=5))


def test_table_shaped_parameters_accepted():
    cfg = RecoveryConfig(k_batches=10, batch_size=10_000, max_steps=10)
    assert (cfg.k_batches, cfg.batch_size, cfg.max_steps) == (10, 10_000, 10)
