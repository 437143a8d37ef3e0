"""Heat-equation normal forms, the elliptic umbilic worked example and a
numerical scale-space tracker."""
from . import damon, heat_forms, poly, scale_space, unfolding
from .poly import Polynomial, parse

__all__ = ["Polynomial", "parse", "poly", "heat_forms", "damon", "unfolding", "scale_space"]
__version__ = "0.1.0"
