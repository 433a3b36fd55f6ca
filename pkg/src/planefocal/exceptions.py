"""Exception types shared across the library."""


class PlaneFocalError(Exception):
    """Base class for all library errors."""


class NonPositiveDepth(PlaneFocalError):
    """A point projected with non-positive depth (behind the camera)."""


class DegenerateConfiguration(PlaneFocalError):
    """Point configuration is degenerate (e.g. collinear DLT sample)."""


class EliminationFailed(PlaneFocalError):
    """Generator table does not have the expected structure."""


class IllConditioned(PlaneFocalError):
    """Sturm chain degenerated beyond recovery."""


class SingularC0(PlaneFocalError):
    """Constant coefficient matrix of the pencil is numerically singular."""


class UnexpectedRank(PlaneFocalError):
    """Leading pencil coefficient does not have the structural rank."""


class RankDeficiencyMismatch(PlaneFocalError):
    """Null-space extraction found an ambiguous (dim > 1) null space."""


class DegenerateMotion(PlaneFocalError):
    """Camera motion leaves the focal length unobservable (pure rotation)."""


class NoRealRoot(PlaneFocalError):
    """No real positive root found inside the admissible bracket."""


class RejectSample(PlaneFocalError):
    """Minimal sample cannot produce a model; RANSAC should resample."""


class DecompositionFailed(PlaneFocalError):
    """Homography decomposition failed (degenerate singular values)."""


class ParallelRays(PlaneFocalError):
    """Triangulation rays are (near) parallel."""


class CollinearPoints(PlaneFocalError):
    """P3P world points are collinear."""


class NoSolution(PlaneFocalError):
    """Solver produced no admissible solution."""


class ZeroBaseline(PlaneFocalError):
    """Relative translation is zero; no epipolar geometry exists."""


class InsufficientData(PlaneFocalError):
    """Not enough correspondences for the requested estimation."""


class NoModelFound(PlaneFocalError):
    """Robust estimation rejected every hypothesis."""


class GenerationFailed(PlaneFocalError):
    """Synthetic scene generation exhausted its retry budget."""


class ParseError(PlaneFocalError):
    """Dataset file could not be parsed."""


class SkippedRecord(PlaneFocalError):
    """Dataset record has too few triplet matches to evaluate."""
