"""Exception types raised across the package."""


class NSGainError(Exception):
    """Base class for all package errors."""


class FieldValidationError(NSGainError, ValueError):
    """A spectral field violates a structural invariant (shape, symmetry, mean)."""


class HermitianError(FieldValidationError):
    """Coefficients do not describe a real field: u_hat(-k) != conj(u_hat(k))."""


class DealiasingError(NSGainError, ValueError):
    """Resolution is too small for the requested dealiasing fraction."""


class DegenerateFieldError(NSGainError, ValueError):
    """A ratio of norms is undefined because a norm vanishes."""


class BlowUpError(NSGainError, FloatingPointError):
    """The discrete system produced non-finite or runaway values."""

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"blow-up of the discrete system at t={time!r}")


class IntegratorFaultError(NSGainError, RuntimeError):
    """The discrete energy inequality was violated beyond its dt-scaled tolerance."""

    def __init__(self, time, margin, tolerance):
        self.time = time
        self.margin = margin
        self.tolerance = tolerance
        super().__init__(
            f"energy inequality violated at t={time:.6g}: margin {margin:.3e} < -{tolerance:.3e}"
        )


class InconsistencyError(NSGainError, RuntimeError):
    """Stored diagnostics contradict a bound that must hold if they are valid."""


class ConfigError(NSGainError, ValueError):
    """Invalid run configuration. ``field`` names the offending key path."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class MissingInputError(NSGainError, FileNotFoundError):
    """A verification suite needs artifacts that have not been produced yet."""


class CorruptArtifactError(NSGainError, ValueError):
    """A stored artifact cannot be parsed or fails its schema checks."""

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{path}: {reason}")
