"""Wasserstein barycenters of randomly warped measures.

Quick tour::

    from warpbary import Measure1D, iterated_barycenter, w2_1d
    a = Measure1D([0.0, 1.0])
    b = Measure1D([2.0, 4.0])
    bary = iterated_barycenter([a, b])
"""

from .analysis import (
    GeodesicCurve,
    GeodesicRangeWarning,
    PcaResult,
    discriminant_features,
    dist_to_geodesic,
    geodesic_pca,
    geodesic_point,
    monotone_range,
    transport_to_barycenter,
    validity_range,
)
from .barycenter import (
    BarycenterProblem,
    MultiMarginalSolution,
    admissible_barycenter,
    barycenter_objective,
    fixed_point_residual,
    gaussian_barycenter_fixedpoint,
    gaussian_iterated_barycenter,
    iterated_barycenter,
    multimarginal_oracle,
    pair_barycenter,
)
from .deformations import (
    DeformationProcess,
    Identity,
    OrthogonalConjugate,
    PointwiseMap,
    ProductIncreasing,
    RadialDistortion,
    ScaleLocation,
    average_deformation,
    check_admissible_pair,
    compose,
    deformation_from_dict,
    deformation_to_dict,
    random_deformation,
    reflection,
    sample_deformations,
)
from .errors import *  # noqa: F401,F403
from .estimation import (
    ExperimentReport,
    SmoothedMeasure,
    consistency_experiment,
    control_bound_check,
    smooth,
    template_estimate,
)
from .measures import (
    DiscreteMeasure,
    GaussianMeasure,
    Measure1D,
    QuantileGrid,
    grid_nodes,
    make_discrete,
    push_forward,
    quantile,
    second_moment,
    to_measure1d,
    to_quantile_grid,
)
from .transport import (
    MonotoneMap1D,
    TransportPlan,
    brenier_map_1d,
    gaussian_ot_map,
    quantile_pairs,
    solve_ot_lp,
    sqrtm_spd,
    w2_1d,
    w2_gaussian,
)

__version__ = "0.1.0"
