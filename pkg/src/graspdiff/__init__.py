"""Whole-body grasp motion generation from object motion trajectories.

A conditional diffusion model over body + hand pose sequences, conditioned on
a rigid object's shape (basis-point-set encoding) and motion, with
contact-aware training losses, inference-time guidance (grasp stabilization,
hand-object contact, feet-floor contact) and a full evaluation-metric suite.
Everything runs on numpy; network gradients are accumulated by explicit
reverse-mode passes.
"""

from .body import (
    Identity,
    Skeleton,
    canonical_skeleton,
    forward_kinematics,
    matrix_to_rot6d,
    rot6d_to_matrix,
    skin_vertices,
)
from .errors import (
    DegenerateRotation,
    EmptyGeometry,
    GraspDiffError,
    GuidanceDiverged,
    ScenarioInfeasible,
    ShapeError,
    UnsignedOnly,
)

__version__ = "0.1.0"
