"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """A config value is outside its allowed range or inconsistent."""


class DegenerateSignalError(ValueError):
    """A signal that must carry energy is identically zero."""


class DegenerateLinkError(ValueError):
    """The (estimated) link vector has zero norm; combining is undefined."""


class FormatError(ValueError):
    """A serialized container is corrupted, truncated, or of a wrong version."""


class ShapeError(ValueError):
    """Stored tensor shapes do not match the requested configuration."""


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss; carries the epoch/batch context."""
