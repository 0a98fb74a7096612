"""Symbolic tensor calculus: metrics, coordinate changes, curvature and geodesics.

Everything lives in a :class:`Session`, which stores tensor objects by ID.
Representations in other index configurations or coordinate systems are
computed on first request and cached on the object.
"""

from .calc import calc, parse_formula
from .curvature import (christoffel, einstein, line_element, ricci_scalar, ricci_tensor,
                        riemann, volume_element_squared)
from .errors import TensorError
from .geodesic import (activate, geodesic_from_christoffel, geodesic_from_lagrangian,
                       lagrangian, set_curve_parameter)
from .registry import Role, Session, diag
from .session_io import (export_all, export_tensor, import_all, import_tensor,
                         list_components, show)
from .transform import add_coord_transformation, represent

__all__ = [
    "Session", "Role", "diag", "TensorError", "calc", "parse_formula",
    "add_coord_transformation", "represent",
    "christoffel", "riemann", "ricci_tensor", "ricci_scalar", "einstein",
    "line_element", "volume_element_squared",
    "lagrangian", "geodesic_from_lagrangian", "geodesic_from_christoffel", "activate",
    "set_curve_parameter",
    "export_all", "export_tensor", "import_all", "import_tensor", "show", "list_components",
]
