"""H^2(curl)-conforming finite elements on rectangles and triangles, and a mixed quad-curl solver."""

from .analysis import dof_counts, error_norms, manufactured_example1, rates, successive_diff
from .assembly import assemble, solve
from .fespace import build_h1_space, build_h2curl_space, eval_fe, interpolate, lagrange_interp_curl
from .mesh import affine_map, graded_lshape_mesh, uniform_rect_mesh, uniform_tri_mesh
from .poly2d import Poly2D, VecPoly2D, monomial_basis, scalar_curl, vector_curl
from .ref_element import build_rect_element, build_tri_element, verify_unisolvence

__version__ = "0.1.0"

__all__ = [
    "Poly2D", "VecPoly2D", "monomial_basis", "scalar_curl", "vector_curl",
    "build_rect_element", "build_tri_element", "verify_unisolvence",
    "uniform_rect_mesh", "uniform_tri_mesh", "graded_lshape_mesh", "affine_map",
    "build_h2curl_space", "build_h1_space", "interpolate", "eval_fe", "lagrange_interp_curl",
    "assemble", "solve",
    "manufactured_example1", "error_norms", "rates", "successive_diff", "dof_counts",
]
