"""Sample-based quantum diagonalization toolkit for supramolecular binding
energies: emulated bitstring sampling, self-consistent configuration
recovery, projected-subspace diagonalization, and zero-variance energy
extrapolation, with exact-diagonalization oracles at desk scale."""

__version__ = "0.1.0"

from .extrapolate import HARTREE_TO_KCAL_PER_MOL  # noqa: F401
from .fock import Determinant, CiVector  # noqa: F401
from .hamiltonian import ActiveSpaceHamiltonian, parse_fcidump, write_fcidump  # noqa: F401
from .solver import Subspace, EigResult, SolverOptions  # noqa: F401
