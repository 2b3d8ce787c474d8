"""Mixing dynamics of RL lattices (SSH-type lattices whose second sublattice
is lossy): open chains, the three-node dissipative beam splitter and
balanced rings."""

from .errors import RLMixError
from .lattice import CouplingParams, Hamiltonian, LatticeSpec, balanced_delta, build
from .spectral import SpectralData, eigensolve, ep_scan
from .dynamics import AmplitudeState, Trajectory, evolve
from .mixing import MixReport, mixing_report, scaling_study
from .initstate import dark_state, orthogonal_recipe

__version__ = "0.1.0"

__all__ = [
    "AmplitudeState",
    "CouplingParams",
    "Hamiltonian",
    "LatticeSpec",
    "MixReport",
    "RLMixError",
    "SpectralData",
    "Trajectory",
    "balanced_delta",
    "build",
    "dark_state",
    "eigensolve",
    "ep_scan",
    "evolve",
    "mixing_report",
    "orthogonal_recipe",
    "scaling_study",
]
