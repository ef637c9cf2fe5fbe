"""Clifford systems, iterated centrioles of SO(n), and the classification of
vector bundles over spheres by shortening clutching maps."""

from .clifford import (
    CliffordSystem, IsotypicDecomposition, ModuleClass, build, class_in_Ak, decompose,
    direct_sum, group_kind, irreducible, irreducible_dim, is_extendible, restrict,
    second_irreducible,
)
from .errors import BranchError, InvalidInput, NonConvergence, ResolutionError
from .liegroup import GroupGeodesic, det_winding, distance, expm, logm, skew_spectral
from .centriole import (
    CentrioleContext, cut_corner, in_midpoint_set, index_lower_bound, minimality_test,
    random_point, tangent_project,
)
from .pathflow import (
    DiscretePath, FlowConfig, MapFamily, SphereGrid, birkhoff_sweep, discrete_energy,
    flow_family, normalize_poles, shorten,
)
from .classifier import BundleReport, classify, hopf_clutching, linear_to_module, split_report

__version__ = "0.1.0"
