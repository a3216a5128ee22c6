"""Emulated device sampling: draw occupation bitstrings from a sector state,
corrupt them with independent bit flips (breaking particle-number
conservation), and read/write shot files so real-device counts can be
ingested at the same boundary.

Bit order convention: character 0 of a line is alpha orbital 0, ascending
through alpha, then beta orbital 0 ascending.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .fock import Determinant, basis_occupancy

__all__ = ["ShotSet", "NoiseSpec", "sample", "read_shots", "write_shots", "ShotParseError"]


class ShotParseError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    """Independent symmetric per-bit flip channel."""

    flip_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ValueError("flip probability must lie in [0, 1]")


@dataclass
class ShotSet:
    """Multiset of raw length-2M bitstrings, one row per shot."""

    m: int
    bits: np.ndarray  # (n_shots, 2M) uint8

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2 or self.bits.shape[1] != 2 * self.m:
            raise ValueError(f"shots must have {2 * self.m} bits per row")

    def __len__(self) -> int:
        return self.bits.shape[0]

    def electron_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """(alpha, beta) electron count per shot."""
        return (
            self.bits[:, : self.m].sum(axis=1),
            self.bits[:, self.m:].sum(axis=1),
        )

    def sector_mask(self, n_alpha: int, n_beta: int) -> np.ndarray:
        ca, cb = self.electron_counts()
        return (ca == n_alpha) & (cb == n_beta)

    def to_determinants(self) -> list[Determinant]:
        """Rows as determinants (valid for any particle content)."""
        weights = 1 << np.arange(self.m, dtype=np.int64)
        alpha = (self.bits[:, : self.m].astype(np.int64) * weights).sum(axis=1)
        beta = (self.bits[:, self.m:].astype(np.int64) * weights).sum(axis=1)
        return [Determinant(int(a), int(b)) for a, b in zip(alpha, beta)]


def sample(v, n_shots: int, noise: NoiseSpec) -> ShotSet:
    """Draw shots i.i.d. from |<x|Psi>|^2, then flip each bit independently
    with the configured probability. Deterministic for a fixed seed."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    probs = v.probabilities()
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized (sum of probabilities {total:.3e})")
    probs = probs / total
    rng = np.random.default_rng(noise.seed)
    idx = rng.choice(probs.size, size=n_shots, p=probs)
    occ = basis_occupancy(v.basis(), v.m).astype(np.uint8)
    bits = occ[idx]
    if noise.flip_probability > 0.0:
        flips = rng.random(bits.shape) < noise.flip_probability
        bits = bits ^ flips.astype(np.uint8)
    return ShotSet(m=v.m, bits=bits)


def read_shots(text, m: int | None = None) -> ShotSet:
    """Parse a shot file: one 0/1 bitstring per line with an optional
    repetition count; '#' starts a comment line."""
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = [str(ln) for ln in text]
    rows = []
    width = None if m is None else 2 * m
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        bitstring = tokens[0]
        if width is None:
            width = len(bitstring)
            if width % 2 != 0:
                raise ShotParseError(f"line {lineno}: odd bitstring length {width}")
        if len(bitstring) != width:
            raise ShotParseError(
                f"line {lineno}: expected {width} bits, got {len(bitstring)}"
            )
        if set(bitstring) - {"0", "1"}:
            raise ShotParseError(f"line {lineno}: non-binary characters in {bitstring!r}")
        count = 1
        if len(tokens) > 1:
            try:
                count = int(tokens[1])
            except ValueError:
                raise ShotParseError(f"line {lineno}: bad count {tokens[1]!r}") from None
            if count < 1 or len(tokens) > 2:
                raise ShotParseError(f"line {lineno}: bad shot line {line!r}")
        row = np.frombuffer(bitstring.encode(), dtype=np.uint8) - ord("0")
        rows.extend([row] * count)
    if width is None:
        raise ShotParseError("no shots in input")
    return ShotSet(m=width // 2, bits=np.array(rows, dtype=np.uint8))


def write_shots(shots: ShotSet) -> str:
    """Aggregate identical bitstrings and emit 'bits count' lines in
    lexicographic order (round-trips through read_shots)."""
    counter = Counter(
        "".join(chr(ord("0") + b) for b in row) for row in shots.bits
    )
    lines = [f"# shots for M={shots.m} ({len(shots)} total)"]
    for bitstring in sorted(counter):
        lines.append(f"{bitstring} {counter[bitstring]}")
    return "\n".join(lines) + "\n"
