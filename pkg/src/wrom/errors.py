"""Exception types shared across the package."""


class WromError(Exception):
    """Base class for all package errors."""


class ConfigError(WromError):
    """Bad or incomplete experiment configuration."""


class OutOfDomain(WromError):
    """Coordinate lies outside the computational rectangle."""


class NonPositiveSpeed(WromError):
    """Wave speed field violates positivity."""


class UnderSampled(WromError):
    """Sample interval too coarse for the requested signal."""


class CFLViolation(WromError):
    """Time step exceeds the stability limit of the explicit scheme."""


class InstabilityDetected(WromError):
    """Non-finite values appeared during time stepping."""


class InsufficientRecordLength(WromError):
    """Recorded traces do not cover the convolution support."""


class RecordTooShort(WromError):
    """Record does not span the requested coarse time grid."""


class NonIntegerSubsampling(WromError):
    """Coarse step is not an integer multiple of the fine step."""


class IndexRange(WromError):
    """Block or window index out of range."""


class IndefinitePivot(WromError):
    """A Cholesky pivot block has a significantly negative eigenvalue."""


class GridTooLarge(WromError):
    """Grid exceeds the dense-eigendecomposition cap."""


class DegenerateSnapshots(WromError):
    """Snapshot Gram matrix lost rank under spectral truncation."""


class DimensionMismatch(WromError):
    """Operands disagree on (n, m) block conventions."""


class SingularNormalEquations(WromError):
    """Regularized normal equations could not be factorized."""


class InsufficientLength(WromError):
    """Trace too short for the requested correlation window."""


class DegenerateField(WromError):
    """Field is constant over the assessment region."""


class DivergenceError(WromError):
    """Objective increased across a full window despite damping escalation."""
