"""Explicit global diffeomorphisms of R^n, built and numerically verified.

The five entry points:

- `palais_extend`: extend a diffeomorphism of a closed ball to all of R^n,
  identity outside a neighborhood of the ball and its image.
- `local_linearize`: deform a map fixing 0 into the identity near 0 without
  touching it away from 0.
- `glue_ball_maps`: realize prescribed diffeomorphisms on finitely many
  disjoint regions inside one global diffeomorphism, identity outside a
  given domain.
- `insert_inner_map`: surgically replace what a global map does on one region.
- `damped_translation` / flows: carry a ball along a path, exactly, with a
  compactly supported flow.

Everything composes through `SmoothMap` (batched evaluation, analytic
Jacobians, structural inverses) and everything claimed is checked by the
`verify` suites, deterministically per seed.
"""
from __future__ import annotations

from .errors import (
    AutomorphismError,
    CompositionError,
    ConditioningError,
    ContainmentError,
    DiffeoError,
    GeometryError,
    GluingError,
    LinearizationError,
    MarginError,
    NotADiffeomorphismError,
    NumericError,
    OrientationError,
    ParameterError,
    SamplingError,
    SchemaError,
)
from .flows import (
    DampedTranslationMap,
    FlowMap,
    TubeField,
    VectorField,
    damped_translation,
    integrate_flow,
    move_balls,
    transport_along_polyline,
)
from .glue import GlueResult, InsertionResult, glue_ball_maps, insert_inner_map
from .linalg import (
    LinearLogFactors,
    linear_factorize,
    skew_log_rotation,
    symmetric_log,
)
from .linearize import (
    DampedLinearDeformation,
    LinearizationResult,
    damped_linear_deform,
    local_linearize,
)
from .maps import (
    AffineMap,
    BallDiffeo,
    CompositeMap,
    ExtendByIdentityMap,
    IdentityMap,
    NewtonInverseMap,
    PiecewiseMap,
    PolyPerturbMap,
    RadialSqueezeMap,
    SmoothMap,
    TranslatedMap,
    TwistMap,
    builtin_families,
    compose,
    construct_builtin,
    extend_by_identity,
    glue_piecewise,
    newton_invert,
    radial_squeeze,
    rotation_map,
    shear_map,
)
from .palais import (
    BallAutomorphismExtension,
    NormalizedFamily,
    PalaisExtension,
    extend_ball_automorphism,
    normalize_balls,
    palais_extend,
)
from .profiles import (
    DampingWindow,
    TransitionProfile,
    invert_radial_profile,
    smooth_step,
    transition_profile,
)
from .regions import (
    All,
    Annulus,
    Ball,
    Box,
    Capsule,
    CloudNeighborhood,
    Complement,
    ImageOf,
    Region,
    Union,
    sample_region,
    sphere_points,
    stream,
)
from .scenario import Scenario, load_scenario, parse_scenario, run_scenario
from .serialize import load_map, map_from_tree, map_to_tree, save_map
from .verify import CheckResult, CheckSpec, VerificationReport, run_check, run_suite

__version__ = "0.1.0"
