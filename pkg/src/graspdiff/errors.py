"""Exception types shared across the package."""


class GraspDiffError(Exception):
    """Base class for all package errors."""


class DegenerateRotation(GraspDiffError):
    """6D rotation input has (near-)parallel or (near-)zero column vectors."""


class EmptyGeometry(GraspDiffError):
    """Mesh or point set is empty where geometry is required."""


class UnsignedOnly(GraspDiffError):
    """Signed distance requested from a field that can only report unsigned distance."""


class ShapeError(GraspDiffError):
    """Array argument has the wrong shape."""


class GuidanceDiverged(GraspDiffError):
    """Guidance produced non-finite values.

    Carries the offending term and iteration/step for diagnostics.
    """

    def __init__(self, term: str, iteration: int, step: int | None = None):
        self.term = term
        self.iteration = iteration
        self.step = step
        loc = f"term={term}, iteration={iteration}"
        if step is not None:
            loc += f", step={step}"
        super().__init__(f"guidance produced non-finite values ({loc})")


class ScenarioInfeasible(GraspDiffError):
    """Inverse kinematics could not reach a scripted target."""
