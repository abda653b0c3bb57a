"""Stable geodesic bouquets on doubles of convex polytopes.

Billiards in a polytope, their lifts to the double, parallel-defect
stability certificates, explicit constructions, and Gaussian smoothing of
the double with curvature certificates.
"""
__version__ = "0.1.0"

from .billiards import BilliardTrajectory, ValidationReport, loop_from_points, shoot, validate
from .constructions import (HexagonFamilyParams, SimplexFamilyParams, build_hexagon,
                            build_simplex_family, hyperplanes_from_simplex, regular_simplex)
from .double import GeodesicLoop, OpenGeodesic, lift, parallel_transport, transport_oracle
from .errors import *  # noqa: F401,F403
from .polytope import Polytope
from .stability import (Bouquet, StabilityCertificate, Verdict, certify, defect_operator,
                        index_form, kernel_invariant_plane, kernel_two_collision, null_extension)
from .subspaces import Subspace, intersect, nullspace
