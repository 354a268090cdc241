"""Exception types shared across the toolkit."""


class VesselWSSError(Exception):
    """Base class for all toolkit errors."""


class ParseError(VesselWSSError):
    """Malformed or out-of-contract input file."""


class TopologyError(VesselWSSError):
    """Mesh connectivity violates the manifold/orientability contract."""


class DegenerateVertexError(VesselWSSError):
    """A vertex has no usable incident geometry (isolated or all-degenerate)."""


class EmptyMeshError(VesselWSSError):
    """Operation requires a non-empty mesh."""


class PointOutsideLumenError(VesselWSSError):
    """Seed point has non-positive clearance to the vessel surface."""


class NoPathFoundError(VesselWSSError):
    """Interior graph does not connect source and target."""


class TooFewPointsError(VesselWSSError):
    """A centerline branch has fewer points than the operation needs."""


class MissingRegionError(VesselWSSError):
    """A vertex carries a region label with no assigned flow vector."""


class AsymmetricTensorError(VesselWSSError):
    """Stress tensor samples are not symmetric within tolerance."""


class WindowOutOfRangeError(VesselWSSError):
    """Analysis window is not covered by the sampled time range."""


class OutOfDomainError(VesselWSSError):
    """Point to project lies too far from the source mesh."""


class DimensionMismatchError(VesselWSSError):
    """Field shape does not match the mesh it is evaluated on."""


class NonPositiveInputError(VesselWSSError):
    """Errors and mesh sizes must be strictly positive."""


class BadResolutionError(VesselWSSError):
    """Synthetic mesh resolution parameters below the supported minimum."""


class GeometryMismatchError(VesselWSSError):
    """Mesh geometry deviates from the analytic shape a generator assumes."""


class SelfIntersectionError(VesselWSSError):
    """Generated surface intersects itself (reported, never repaired)."""


class LengthMismatchError(VesselWSSError):
    """Field length differs from the mesh vertex count."""


class PipelineError(VesselWSSError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
