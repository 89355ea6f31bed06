"""Collisional thermalization of qubit chains: scattering, collision maps and Lindblad dynamics."""
from .chain import ChainSpec, DensityMatrix, Spectrum, build_chain_hamiltonian, diagonalize, gibbs_state, spectrum_for
from .collision import CollisionTensor, Variant, assemble_tensor, kraus_decomposition
from .quadrature import QuadratureConfig

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "CollisionTensor",
    "DensityMatrix",
    "QuadratureConfig",
    "Spectrum",
    "Variant",
    "assemble_tensor",
    "build_chain_hamiltonian",
    "diagonalize",
    "gibbs_state",
    "kraus_decomposition",
    "spectrum_for",
]
