"""Floquet analysis and embedded eigenvalues of -u'' + A(x) u with asymptotically periodic A."""
from ._backend import BACKEND
from .decay import fit_decay_rate, fit_eigenfunction, roughness_probe, roughness_trials
from .errors import ConfigError, NumericalError
from .floquet import floquet_decomposition, monodromy, periodic_schrodinger
from .ode import IntegratorConfig, evolve_subspace, fundamental_matrix
from .persistence import (codimension, generalized_eigenfunctions, lambda_prime,
                          persistence_scan, tangent_data, tangent_functional)
from .potentials import (make_example5, make_perturbation, mathieu_potential, profile,
                         xbeta_norm)
from .spectral import (MatchingConfig, band_scan, eigenfunction, find_embedded_eigenvalue,
                       hill_discriminant, mismatch)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigError", "IntegratorConfig", "MatchingConfig", "NumericalError",
    "band_scan", "codimension", "eigenfunction", "evolve_subspace", "find_embedded_eigenvalue",
    "fit_decay_rate", "fit_eigenfunction", "floquet_decomposition", "fundamental_matrix",
    "generalized_eigenfunctions", "hill_discriminant", "lambda_prime", "make_example5",
    "make_perturbation", "mathieu_potential", "mismatch", "monodromy", "periodic_schrodinger",
    "persistence_scan", "profile", "roughness_probe", "roughness_trials", "tangent_data",
    "tangent_functional", "xbeta_norm", "__version__",
]
