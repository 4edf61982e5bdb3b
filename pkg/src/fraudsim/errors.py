"""Exception hierarchy shared by the package."""


class DimensionError(ValueError):
    """Inputs disagree on, or violate constraints of, the ambient dimension."""


class CapabilityError(ValueError):
    """The requested (dimension, method) combination is not supported."""


class BuildError(RuntimeError):
    """A landscape could not be constructed with the requested properties."""


class VerificationError(RuntimeError):
    """A post-build landscape check failed.

    ``witness`` holds the offending point (or shell point) when one exists.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class RegimeError(ValueError):
    """The requested analysis is undefined in this beta regime."""


class VerdictError(ValueError):
    """A path cannot support the requested verdict (e.g. it never approached the well)."""


class ConfigError(ValueError):
    """Experiment configuration failed validation.

    ``errors`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path}: {msg}" for path, msg in self.errors]
        super().__init__("invalid experiment config:\n  " + "\n  ".join(lines))
