class SatrainError(Exception):
    """Base class for all engine errors."""


class ConfigError(SatrainError, ValueError):
    """Invalid parameter set or configuration file."""


class MeasurementError(SatrainError, ValueError):
    """Malformed or physically impossible measurement."""


class InversionError(SatrainError, ValueError):
    """Attenuation could not be mapped to a rain rate."""


class ForecastError(SatrainError, LookupError):
    """No isotherm forecast covers the requested time."""


class StaleForecastError(ForecastError):
    """The covering forecast is older than the staleness bound.

    The held value is still attached so callers can use it in degraded mode.
    """

    def __init__(self, message, value, age_s):
        super().__init__(message)
        self.value = value
        self.age_s = age_s


class DataError(SatrainError, ValueError):
    """Input data that cannot be processed (disjoint ranges, bad files)."""
