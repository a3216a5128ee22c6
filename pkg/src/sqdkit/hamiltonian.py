"""Active-space electronic Hamiltonian container and FCIDUMP text I/O.

Integrals are stored densely: ``h_one`` is the M x M one-body matrix and
``eri`` is the rank-4 two-electron array (pr|qs) in chemists' notation with
the full 8-fold permutational symmetry completed on load.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ActiveSpaceHamiltonian",
    "FcidumpError",
    "parse_fcidump",
    "write_fcidump",
]


class FcidumpError(ValueError):
    """Malformed FCIDUMP content (carries a line number where applicable)."""


@dataclass(frozen=True)
class ActiveSpaceHamiltonian:
    """Second-quantized active-space Hamiltonian data.

    Immutable after construction; the integral arrays are marked read-only so
    the instance can be shared freely across worker threads.
    """

    m_orbitals: int
    n_alpha: int
    n_beta: int
    e_core: float
    h_one: np.ndarray
    eri: np.ndarray
    core_energy_missing: bool = field(default=False, compare=False)

    def __post_init__(self):
        m = self.m_orbitals
        h = np.ascontiguousarray(self.h_one, dtype=float)
        eri = np.ascontiguousarray(self.eri, dtype=float)
        if h.shape != (m, m):
            raise ValueError(f"h_one must be {m}x{m}, got {h.shape}")
        if eri.shape != (m, m, m, m):
            raise ValueError(f"eri must have shape {(m, m, m, m)}, got {eri.shape}")
        if not (0 <= self.n_alpha <= m and 0 <= self.n_beta <= m):
            raise ValueError(
                f"electron counts ({self.n_alpha},{self.n_beta}) outside [0,{m}]"
            )
        if not np.array_equal(h, h.T):
            raise ValueError("h_one is not symmetric")
        h.setflags(write=False)
        eri.setflags(write=False)
        object.__setattr__(self, "h_one", h)
        object.__setattr__(self, "eri", eri)

    @property
    def sector(self) -> tuple[int, int]:
        return (self.n_alpha, self.n_beta)

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta


_HEADER_INT = {
    "NORB": re.compile(r"NORB\s*=\s*(\d+)", re.I),
    "NELEC": re.compile(r"NELEC\s*=\s*(\d+)", re.I),
    "MS2": re.compile(r"MS2\s*=\s*(-?\d+)", re.I),
}


def parse_fcidump(text) -> ActiveSpaceHamiltonian:
    """Parse an FCIDUMP character stream (string or iterable of lines).

    Recognized data lines are ``value i j k l`` with 1-based indices:
    four nonzero-style indices give (ij|kl), ``i j 0 0`` gives h_ij,
    ``i 0 0 0`` gives an orbital energy (ignored), and ``0 0 0 0`` gives the
    core energy. Stored elements are symmetry-completed to all 8 index
    permutations. A missing core-energy line leaves e_core = 0 and sets the
    ``core_energy_missing`` flag.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = [str(ln).rstrip("\n") for ln in text]

    # Header runs from &FCI to &END (or a bare "/"); namelist keys may span lines.
    header = []
    body_start = 0
    for lineno, line in enumerate(lines, start=1):
        header.append(line)
        if re.search(r"&END|/\s*$", line, re.I):
            body_start = lineno
            break
    else:
        raise FcidumpError("no &END (or '/') terminating the FCIDUMP header")
    header_text = " ".join(header)

    values = {}
    for key, pat in _HEADER_INT.items():
        mobj = pat.search(header_text)
        if mobj is None:
            raise FcidumpError(f"FCIDUMP header is missing {key}")
        values[key] = int(mobj.group(1))
    norb, nelec, ms2 = values["NORB"], values["NELEC"], values["MS2"]
    if norb <= 0:
        raise FcidumpError(f"NORB must be positive, got {norb}")
    if (nelec + ms2) % 2 != 0 or abs(ms2) > nelec:
        raise FcidumpError(f"inconsistent NELEC={nelec}, MS2={ms2}")
    n_alpha = (nelec + ms2) // 2
    n_beta = (nelec - ms2) // 2

    h_one = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    e_core = 0.0
    have_core = False

    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        if len(tokens) != 5:
            raise FcidumpError(f"line {lineno}: expected 'value i j k l', got {line!r}")
        try:
            val = float(tokens[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError as exc:
            raise FcidumpError(f"line {lineno}: {exc}") from None
        for idx in (i, j, k, l):
            if idx < 0 or idx > norb:
                raise FcidumpError(f"line {lineno}: index {idx} outside [0, {norb}]")
        if i == j == k == l == 0:
            e_core = val
            have_core = True
        elif k == 0 and l == 0 and j == 0:
            pass  # orbital energy line, not used
        elif k == 0 and l == 0:
            if i == 0:
                raise FcidumpError(f"line {lineno}: bad index pattern {line!r}")
            h_one[i - 1, j - 1] = val
            h_one[j - 1, i - 1] = val
        else:
            if min(i, j, k, l) == 0:
                raise FcidumpError(f"line {lineno}: bad index pattern {line!r}")
            p, r, q, s = i - 1, j - 1, k - 1, l - 1
            for a, b in ((p, r), (r, p)):
                for c, d in ((q, s), (s, q)):
                    eri[a, b, c, d] = val
                    eri[c, d, a, b] = val

    return ActiveSpaceHamiltonian(
        m_orbitals=norb,
        n_alpha=n_alpha,
        n_beta=n_beta,
        e_core=e_core,
        h_one=h_one,
        eri=eri,
        core_energy_missing=not have_core,
    )


def _canonical_pair(i, j):
    return (i, j) if i >= j else (j, i)


def _canonical_quad(p, r, q, s):
    a = _canonical_pair(p, r)
    b = _canonical_pair(q, s)
    return a + b if a >= b else b + a


def write_fcidump(h: ActiveSpaceHamiltonian) -> str:
    """Emit the unique-by-symmetry nonzero elements in FCIDUMP layout.

    Lines are ordered lexicographically on the canonical index tuple; values
    are written with 17 significant digits so parse(write(h)) round-trips.
    """
    m = h.m_orbitals
    nelec = h.n_alpha + h.n_beta
    ms2 = h.n_alpha - h.n_beta
    out = [
        f" &FCI NORB={m},NELEC={nelec},MS2={ms2},",
        "  ORBSYM=" + "1," * m,
        "  ISYM=1,",
        " &END",
    ]

    seen = set()
    eri_lines = []
    for p in range(m):
        for r in range(p + 1):
            for q in range(m):
                for s in range(q + 1):
                    key = _canonical_quad(p, r, q, s)
                    if key in seen:
                        continue
                    seen.add(key)
                    val = h.eri[key[0], key[1], key[2], key[3]]
                    if abs(val) > 1e-16:
                        eri_lines.append((key, val))
    for (p, r, q, s), val in sorted(eri_lines):
        out.append(f"{val:.17E} {p + 1:4d} {r + 1:4d} {q + 1:4d} {s + 1:4d}")

    h_lines = []
    for p in range(m):
        for r in range(p + 1):
            val = h.h_one[p, r]
            if abs(val) > 1e-16:
                h_lines.append(((p, r), val))
    for (p, r), val in sorted(h_lines):
        out.append(f"{val:.17E} {p + 1:4d} {r + 1:4d}    0    0")

    out.append(f"{h.e_core:.17E}    0    0    0    0")
    return "\n".join(out) + "\n"
