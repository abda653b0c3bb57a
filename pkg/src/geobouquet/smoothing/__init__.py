"""Gaussian smoothing of the double, its certificates, meshes and refinement."""
from .certificates import (ConeData, ConvexityCertificate, cone_facets, length_neutral_level,
                           length_neutral_offset, level_surface_curvature, projective_inradius,
                           rim_excess, sheet_height, strong_convexity_certificate,
                           tangent_frame, unit_ball_volume, vertex_cone)
from .field import AnalyticField, FieldEval, SmoothField
from .projection import ActiveSetProjector, dykstra, project_brute, project_to_polytope
from .refine import (BrokenBouquet, FlatModel, RefineResult, SurfaceModel, metric_distortion,
                     refine_bouquet, refine_flat)
from .report import smoothing_report
from .surface import SurfaceMesh, extract_surface, is_watertight

__all__ = [
    "ActiveSetProjector", "AnalyticField", "BrokenBouquet", "ConeData", "ConvexityCertificate",
    "FieldEval", "FlatModel", "RefineResult", "SmoothField", "SurfaceMesh", "SurfaceModel",
    "cone_facets", "dykstra", "extract_surface", "is_watertight", "length_neutral_level",
    "length_neutral_offset", "level_surface_curvature", "metric_distortion", "project_brute",
    "project_to_polytope", "projective_inradius", "refine_bouquet", "refine_flat", "rim_excess",
    "sheet_height", "smoothing_report", "strong_convexity_certificate", "tangent_frame",
    "unit_ball_volume", "vertex_cone",
]
