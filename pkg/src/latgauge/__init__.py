"""Lattice Yang-Mills and boundary-conditioned slab sigma models.

Sampling, error analysis and curvature checks on the compact groups U(N),
SU(N) and SO(N).
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    InsufficientSamples,
    LatGaugeError,
    NoCenter,
    NonPositiveMagnitude,
    ParseError,
    SideTooLong,
    SingularInput,
    StepTooLarge,
    UnsupportedFamily,
    ValidationError,
)
from .groups import (  # noqa: E402
    AlgebraElement,
    Family,
    GroupElement,
    GroupSpec,
    algebra_basis,
    center_element,
    exp_map,
    haar_sample,
    project_to_group,
)
from .lattice import (  # noqa: E402
    Edge,
    Loop,
    Plaquette,
    SlabGeometry,
    TorusLattice,
    enumerate_geometry,
    rectangular_loop,
    slab,
    torus_distance,
)
from .seeding import derive_chain_seed  # noqa: E402
from .stats import Estimate  # noqa: E402
from .thresholds import bakry_emery_constant, beta_threshold  # noqa: E402

__all__ = [
    "InsufficientSamples",
    "LatGaugeError",
    "NoCenter",
    "NonPositiveMagnitude",
    "ParseError",
    "SideTooLong",
    "SingularInput",
    "StepTooLarge",
    "UnsupportedFamily",
    "ValidationError",
    "AlgebraElement",
    "Family",
    "GroupElement",
    "GroupSpec",
    "algebra_basis",
    "center_element",
    "exp_map",
    "haar_sample",
    "project_to_group",
    "Edge",
    "Loop",
    "Plaquette",
    "SlabGeometry",
    "TorusLattice",
    "enumerate_geometry",
    "rectangular_loop",
    "slab",
    "torus_distance",
    "derive_chain_seed",
    "Estimate",
    "bakry_emery_constant",
    "beta_threshold",
]
