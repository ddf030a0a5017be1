"""Checks and numerical index experiments for first-order elliptic boundary value problems.

Modules
-------
symbolalg
    Linear principal symbols: ellipticity, Clifford relations, norm bounds.
raritaschwinger
    Rarita-Schwinger bundle maps and symbol from a Dirac-type seed.
adapted
    Adapted boundary symbols, circle boundary operators, spectral projectors.
bconds
    Boundary conditions in graphical normal form, adjoints, Lopatinsky-Schapiro checks.
indexlab
    Cylinder discretizations, numerical indices and model-solution identities.
cli
    JSON-configured experiments with deterministic reports.
"""

from ._validation import ConfigurationError, NotEllipticError, NotInvertibleError
from .adapted import BoundaryOperator1D, SpectralSplit, spectral_projectors
from .bconds import GraphBC, MatchingBC, PseudoLocalBC
from .indexlab import CylinderModel, IndexReport, numerical_index
from .symbolalg import LinearSymbol, Metric

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "NotEllipticError",
    "NotInvertibleError",
    "BoundaryOperator1D",
    "SpectralSplit",
    "spectral_projectors",
    "GraphBC",
    "MatchingBC",
    "PseudoLocalBC",
    "CylinderModel",
    "IndexReport",
    "numerical_index",
    "LinearSymbol",
    "Metric",
]
