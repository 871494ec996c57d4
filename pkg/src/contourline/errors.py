"""Exception hierarchy.

The CLI maps these onto exit codes: mesh validation errors exit 2,
unresolved degenerate geometry exits 3, invariant violations exit 4.
"""


class ContourlineError(Exception):
    """Base class for every error raised by this package."""


class MeshError(ContourlineError):
    """Input mesh failed validation."""


class OBJParseError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonManifoldError(MeshError):
    pass


class OrientationError(MeshError):
    pass


class DegenerateGeometry(ContourlineError):
    """A predicate hit an exact zero; the caller may perturb and retry."""


class DegenerateFacing(DegenerateGeometry):
    pass


class CoplanarFaces(DegenerateGeometry):
    pass


class ZeroOrientation(DegenerateGeometry):
    pass


class SharedEndpoint(DegenerateGeometry):
    pass


class GrazingHit(DegenerateGeometry):
    pass


class DegenerateDepthTie(DegenerateGeometry):
    pass


class BehindCamera(DegenerateGeometry):
    pass


class ZeroNormal(DegenerateGeometry):
    def __init__(self, vertex):
        self.vertex = vertex
        super().__init__(f"area-weighted normal vanishes at vertex {vertex}")


class DegenerateTangent(DegenerateGeometry):
    pass


class ZeroChord(DegenerateGeometry):
    pass


class InvariantViolation(ContourlineError):
    """Internal consistency check failed."""


class InconsistentQI(InvariantViolation):
    def __init__(self, segment, first, second):
        self.segment = segment
        self.values = (first, second)
        super().__init__(
            f"segment {segment}: propagation paths disagree ({first} vs {second})")


class UnresolvedVisibility(InvariantViolation):
    pass
