"""Compositional regression through principal nested spheres.

Compositions are mapped to the positive orthant of the sphere, reduced
with backward principal nested spheres (PNS), regressed in the space of
PNS scores and mapped back to the simplex.
"""
from .geom import (
    Kind,
    Subsphere,
    circular_frechet_mean,
    drop_dimension,
    geodesic_dist,
    lift_dimension,
    project_to_subsphere,
    rotation_to_pole,
    wrap,
)
from .pns import (
    PnsModel,
    biplot_paths,
    fit_pns,
    fit_subsphere,
    pns_mean,
    pns_scores,
    scores_to_sphere,
    select_sphere_kind,
    variance_explained,
)
from .regress import (
    RegressionModel,
    design_matrix,
    fit_circular_ls,
    fit_circular_vonmises,
    fit_compositional_regression,
    fit_score_regression,
    predict_composition,
)
from .simplex import inverse_power_transform, normalize, orthant_truncate, power_transform

__version__ = "0.1.0"

__all__ = [
    "biplot_paths",
    "circular_frechet_mean",
    "design_matrix",
    "drop_dimension",
    "fit_circular_ls",
    "fit_circular_vonmises",
    "fit_compositional_regression",
    "fit_pns",
    "fit_score_regression",
    "fit_subsphere",
    "geodesic_dist",
    "inverse_power_transform",
    "Kind",
    "lift_dimension",
    "normalize",
    "orthant_truncate",
    "pns_mean",
    "pns_scores",
    "PnsModel",
    "power_transform",
    "predict_composition",
    "project_to_subsphere",
    "RegressionModel",
    "rotation_to_pole",
    "scores_to_sphere",
    "select_sphere_kind",
    "Subsphere",
    "variance_explained",
    "wrap",
]
