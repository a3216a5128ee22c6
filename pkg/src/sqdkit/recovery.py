"""Self-consistent configuration recovery.

Corrupted shots are repaired toward the current occupation-number estimate:
in a spin sector with surplus electrons, occupied bits flip down with weight
(x_p - n_p)+, with a deficit empty bits flip up with weight (n_p - x_p)+,
sampled without replacement until the particle number is exact. Recovered
configurations are batched, each batch is diagonalized, and the occupation
estimate is refreshed from the batch ground states until the minimum batch
energy stops moving.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .sampler import ShotSet
from .solver import EigResult, SolverOptions, build_subspace, davidson_ground

__all__ = [
    "OccupationEstimate",
    "RecoveryConfig",
    "RecoveryResult",
    "InitializationError",
    "initial_occupations",
    "recover_configuration",
    "recover_shots",
    "run_recovery",
]


class InitializationError(RuntimeError):
    pass


@dataclass
class OccupationEstimate:
    """Average spin-orbital occupations, alpha block first (2M values)."""

    n_occ: np.ndarray

    def __post_init__(self):
        self.n_occ = np.asarray(self.n_occ, dtype=float)
        if np.any(self.n_occ < -1e-12) or np.any(self.n_occ > 1 + 1e-12):
            raise ValueError("occupations must lie in [0, 1]")
        self.n_occ = np.clip(self.n_occ, 0.0, 1.0)


@dataclass(frozen=True)
class RecoveryConfig:
    k_batches: int
    batch_size: int
    max_steps: int = 10
    energy_tol: float = 1e-6
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.k_batches < 1:
            raise ValueError("k_batches must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class RecoveryResult:
    energy: float
    per_step_energies: list[float]
    final_occ: OccupationEstimate
    best_batch: EigResult
    steps_run: int = 0


def initial_occupations(shots: ShotSet, sector: tuple[int, int]) -> OccupationEstimate:
    """Mean occupation over the particle-number-correct subset of the shots."""
    keep = shots.sector_mask(*sector)
    if not np.any(keep):
        raise InitializationError(
            "no shots with the correct particle number; lower the noise "
            "probability or draw more shots"
        )
    return OccupationEstimate(shots.bits[keep].mean(axis=0))


def _select_flips(weights, candidates, k_per_row, rng):
    """Choose k positions per row among candidates without replacement, with
    probability proportional to the weights (exponential-key trick). Rows may
    have different k; zero-weight candidates are picked only when forced."""
    keys = rng.gumbel(size=weights.shape)
    with np.errstate(divide="ignore"):
        keys = keys + np.where(weights > 0, np.log(weights), -1e12)
    keys[~candidates] = -np.inf
    order = np.argsort(-keys, axis=1)
    flips = np.zeros_like(candidates)
    for k in np.unique(k_per_row):
        if k == 0:
            continue
        rows = np.nonzero(k_per_row == k)[0]
        cols = order[rows, :k]
        flips[rows[:, None], cols] = True
    return flips


def _recover_block(bits, occ, n_target, rng):
    """Restore exact particle number within one spin block (vectorized)."""
    bits = bits.copy()
    counts = bits.sum(axis=1).astype(int)
    delta = counts - n_target

    surplus = np.nonzero(delta > 0)[0]
    if surplus.size:
        cand = bits[surplus] == 1
        weights = np.where(cand, np.clip(1.0 - occ, 0.0, None)[None, :], 0.0)
        flips = _select_flips(weights, cand, delta[surplus], rng)
        bits[surplus] ^= flips.astype(np.uint8)

    deficit = np.nonzero(delta < 0)[0]
    if deficit.size:
        cand = bits[deficit] == 0
        weights = np.where(cand, np.clip(occ, 0.0, None)[None, :], 0.0)
        flips = _select_flips(weights, cand, -delta[deficit], rng)
        bits[deficit] ^= flips.astype(np.uint8)
    return bits


def recover_shots(shots: ShotSet, occ: OccupationEstimate, sector, rng) -> ShotSet:
    """Recover every shot; the result has exact per-sector particle numbers."""
    m = shots.m
    n_alpha, n_beta = sector
    alpha = _recover_block(shots.bits[:, :m], occ.n_occ[:m], n_alpha, rng)
    beta = _recover_block(shots.bits[:, m:], occ.n_occ[m:], n_beta, rng)
    return ShotSet(m=m, bits=np.hstack([alpha, beta]))


def recover_configuration(x, occ: OccupationEstimate, sector, rng):
    """Recover a single raw bitstring (length-2M 0/1 array) to a determinant
    with exact particle numbers; sectors already correct pass through."""
    x = np.asarray(x, dtype=np.uint8).reshape(1, -1)
    m = x.shape[1] // 2
    repaired = recover_shots(ShotSet(m=m, bits=x), occ, sector, rng)
    return repaired.to_determinants()[0]


def run_recovery(
    h,
    shots: ShotSet,
    cfg: RecoveryConfig,
    solver_opts: SolverOptions | None = None,
    log_path=None,
) -> RecoveryResult:
    """Iterate recovery / batching / diagonalization until the energy
    min over batches converges; returns the lowest-energy batch seen."""
    if len(shots) == 0:
        raise ValueError("empty shot set")
    if cfg.batch_size > len(shots):
        raise ValueError(
            f"batch_size {cfg.batch_size} exceeds shot pool size {len(shots)}"
        )
    solver_opts = solver_opts or SolverOptions()
    sector = h.sector
    occ = initial_occupations(shots, sector)
    seed_seq = np.random.SeedSequence(cfg.seed)

    log_fh = open(log_path, "w") if log_path is not None else None
    per_step = []
    best: EigResult | None = None
    steps_run = 0
    try:
        for step in range(cfg.max_steps):
            rng = np.random.default_rng(seed_seq.spawn(1)[0])
            pool = recover_shots(shots, occ, sector, rng).to_determinants()
            results: list[EigResult | None] = [None] * cfg.k_batches
            subspaces = []
            for _ in range(cfg.k_batches):
                idx = rng.choice(len(pool), size=cfg.batch_size, replace=False)
                subspaces.append(build_subspace([pool[i] for i in idx]))

            def solve(s):
                return davidson_ground(h, s, solver_opts)

            if cfg.threads > 1:
                with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
                    futures = [ex.submit(solve, s) for s in subspaces]
                    for b, fut in enumerate(futures):
                        try:
                            results[b] = fut.result()
                        except Exception as exc:  # noqa: BLE001 - batch isolation
                            warnings.warn(f"batch {b} failed: {exc}")
            else:
                for b, s in enumerate(subspaces):
                    try:
                        results[b] = solve(s)
                    except Exception as exc:  # noqa: BLE001 - batch isolation
                        warnings.warn(f"batch {b} failed: {exc}")

            ok = [r for r in results if r is not None]
            if not ok:
                raise RuntimeError(f"all {cfg.k_batches} batches failed at step {step}")
            step_min = min(r.energy for r in ok)
            per_step.append(step_min)
            step_best = min(ok, key=lambda r: r.energy)
            if best is None or step_best.energy < best.energy:
                best = step_best
            occ = OccupationEstimate(
                np.mean([r.occupations for r in ok], axis=0)
            )
            steps_run = step + 1

            if log_fh is not None:
                record = {
                    "step": step,
                    "energies": [None if r is None else r.energy for r in results],
                    "dims": [s.dimension for s in subspaces],
                    "min_energy": step_min,
                    "occupations": occ.n_occ.tolist(),
                }
                log_fh.write(json.dumps(record) + "\n")

            if step > 0 and abs(per_step[-1] - per_step[-2]) < cfg.energy_tol:
                break
    finally:
        if log_fh is not None:
            log_fh.close()

    return RecoveryResult(
        energy=best.energy,
        per_step_energies=per_step,
        final_occ=occ,
        best_batch=best,
        steps_run=steps_run,
    )
