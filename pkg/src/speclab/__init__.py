"""Spectral-inequality constants for 1D Schrodinger operators observed on thick sets."""
from .eigen import SpectralSubspace, build_hamiltonian, eigenpairs_below, subspace_for
from .errors import (ConfigError, DomainError, EmptySpectrumError, NumericalError, PotentialError,
                     SpeclabError, UnobservableError)
from .grid import Grid, PotentialSpec, harmonic, make_grid, power, power_pair
from .observability import observability_constant, sweep_and_fit, theory_kappa
from .sensors import SensorSet

__version__ = "0.1.0"
