"""Exception hierarchy shared by every module of the package."""


class HotunerError(Exception):
    """Base class for all errors raised by hotuner."""


class NotHurwitz(HotunerError):
    pass


class SingularSystem(HotunerError):
    pass


class NotSymmetric(HotunerError):
    pass


class NotPD(HotunerError):
    pass


class DimensionMismatch(HotunerError, ValueError):
    pass


class NoAnalyticRate(HotunerError):
    pass


class GridTooCoarse(HotunerError):
    pass


class NonFiniteDerivative(HotunerError):
    def __init__(self, t: float, message: str = "right-hand side returned a non-finite value"):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


class ConfigError(HotunerError):
    pass


class UnknownScenario(ConfigError):
    pass


class BadOverrideKey(ConfigError):
    pass


class UnwritableOutput(HotunerError):
    pass


class MissingManifest(HotunerError):
    pass


class CorruptCsv(HotunerError):
    pass
