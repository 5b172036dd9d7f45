"""Error taxonomy shared by every module.

The HTTP layer maps these onto status codes (validation 400, not-found 404,
conflict 409, illegal transition 422); the CLI maps them onto exit codes.
"""


class BladeQCError(Exception):
    """Base class for all bladeqc errors."""


class ValidationError(BladeQCError):
    """Malformed or out-of-contract input (bad wire data, bad parameters)."""


class GeometryError(ValidationError):
    """Degenerate, self-intersecting or out-of-frame geometry."""


class NotFoundError(BladeQCError):
    """Reference to an entity, label or id that does not exist."""


class ConflictError(BladeQCError):
    """Duplicate ingest, stale sequence number or repeated clue action."""


class TransitionError(BladeQCError):
    """Workflow action that is illegal in the image's current state."""
