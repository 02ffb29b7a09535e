"""Exception hierarchy shared across the package."""


class ArmTwinError(Exception):
    """Base class for every error raised by this package."""


class ModelError(ArmTwinError):
    """Model config could not be parsed or failed validation."""


class DegenerateHandError(ArmTwinError):
    """Hand landmarks are collinear or coincident; no basis exists."""


class InvalidStreamError(ArmTwinError):
    """Frame history violates stream preconditions (ordering, timestamps)."""


class ProtocolError(ArmTwinError):
    """Wire message failed to encode or decode."""


class UnknownMessageType(ProtocolError):
    """Envelope carried a message type this peer does not understand."""


class TrajectoryError(ArmTwinError):
    """Trajectory file is malformed, truncated or inconsistent."""


class TrajectoryVersionError(TrajectoryError):
    """Trajectory file was written by an incompatible format version."""


class ModelMismatchError(TrajectoryError):
    """Trajectory references a model hash the current setup does not provide."""


class SessionError(ArmTwinError):
    """Session misuse (bad control command, bad state transition)."""
