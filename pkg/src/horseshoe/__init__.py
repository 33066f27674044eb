"""Non-uniformly hyperbolic horseshoes in the standard family, at desk scale.

Modules: ``torus_map`` (the maps), ``foliation`` (direction fields and leaves),
``tangency`` (tangency circles and the parameter search), ``partition`` (the
circle map Psi, Markov partitions, Cantor covers), ``dimension`` (Bowen's
equation and thickness) and ``cli``.
"""

from .errors import HorseshoeError
from .torus_map import Parameter, TorusPoint

__version__ = "0.1.0"

__all__ = ["HorseshoeError", "Parameter", "TorusPoint", "__version__"]
