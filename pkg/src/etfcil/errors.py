"""Exception types shared across the package.

Each error exposes a short machine-readable ``code`` (its class name); the
command line front end prints failures as ``ERROR <code>: message`` so shell
scripts can match on the code without parsing prose.
"""


class EtfcilError(Exception):
    """Base class for all package errors."""

    @property
    def code(self):
        return type(self).__name__


class ConfigError(EtfcilError):
    """Bad configuration, flags, or file input.  CLI exit code 1."""


class InvariantViolation(EtfcilError):
    """A runtime contract was broken.  CLI exit code 2."""


# frame construction
class DimensionTooSmall(ConfigError):
    pass


class DegenerateBasis(EtfcilError):
    pass


class IndexOutOfRange(EtfcilError):
    pass


# losses and features
class ZeroFeature(EtfcilError):
    pass


class LabelInactive(EtfcilError):
    pass


# networks
class ShapeMismatch(EtfcilError):
    pass


class StaleCache(EtfcilError):
    pass


class FrozenViolation(EtfcilError):
    pass


# prototypes and memory
class EmptyClass(EtfcilError):
    pass


class DegenerateMean(EtfcilError):
    pass


class UnknownClass(EtfcilError):
    pass


class DegenerateInterpolation(EtfcilError):
    pass


# streams and planning
class NotEnoughClasses(ConfigError):
    pass


# trainer
class MissingTeacher(EtfcilError):
    pass


# metrics
class EmptyList(EtfcilError):
    pass


class TooFewClasses(EtfcilError):
    pass


class DegenerateBetweenClass(EtfcilError):
    pass
