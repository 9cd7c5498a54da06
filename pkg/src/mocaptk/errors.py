"""Exception types shared across the toolkit."""


class MocapError(Exception):
    """Base class for all toolkit errors."""


# --- C3D parsing / catalog ---

class MalformedHeader(MocapError):
    """First block does not look like a C3D header."""


class UnsupportedEncoding(MocapError):
    """Processor type other than little-endian (Intel)."""


class TruncatedData(MocapError):
    """Byte stream ends before the header-promised data."""


class MissingMarker(MocapError):
    def __init__(self, names):
        self.names = list(names)
        super().__init__("markers not found: " + ", ".join(self.names))


class UnknownActor(MocapError):
    """A partition references an actor absent from the catalog."""


# --- preprocessing ---

class DegenerateHips(MocapError):
    """Hip markers coincide (or are vertically stacked); no facing direction."""


class UpsampleRequested(MocapError):
    """Target frame rate above the source frame rate."""


# --- differentiation engine ---

class ShapeMismatch(MocapError):
    """Operands have incompatible shapes for the requested operation."""


class NonScalarLoss(MocapError):
    """backward() called on a tensor with more than one element."""


class EmptySequence(MocapError):
    """A recurrent layer received a zero-length sequence."""


# --- models / training ---

class NoEnabledLoss(MocapError):
    """Classification ratio below 1 but no auxiliary decoder enabled."""


class AllWeightsZero(MocapError):
    """Every generator loss weight is zero."""


class NonFiniteGradient(MocapError):
    """A gradient contained NaN/Inf; the optimizer step was aborted."""


# --- analysis ---

class KTooLarge(MocapError):
    """More cluster centers requested than data points."""


# --- files / config ---

class ChecksumMismatch(MocapError):
    """Checkpoint was produced under a different configuration."""


class ConfigError(MocapError):
    """Invalid or unknown configuration content."""


class DataError(MocapError):
    """Input data files missing or unusable."""
