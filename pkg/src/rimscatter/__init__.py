"""Physical-optics model and weight synthesis for a paraboloid with a reconfigurable rim."""
from .core import DishConfig, Geometry, build_geometry, fixed_field, element_field_vector, total_pattern
from .weights import PhaseAlphabet, WeightVector

__version__ = "0.1.0"

__all__ = [
    "DishConfig",
    "Geometry",
    "PhaseAlphabet",
    "WeightVector",
    "build_geometry",
    "element_field_vector",
    "fixed_field",
    "total_pattern",
]
