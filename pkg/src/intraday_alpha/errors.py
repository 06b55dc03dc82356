"""Exception hierarchy shared across the pipeline."""


class IntradayAlphaError(Exception):
    """Base class for every error raised by this package."""


class PanelError(IntradayAlphaError, ValueError):
    pass


class MalformedRow(PanelError):
    pass


class DuplicateObservation(PanelError):
    pass


class NonPositivePrice(PanelError):
    pass


class IndexOutOfRange(IntradayAlphaError, IndexError):
    pass


class MissingData(IntradayAlphaError, ValueError):
    pass


class CalendarTooShort(IntradayAlphaError, ValueError):
    pass


class InsufficientData(IntradayAlphaError, ValueError):
    pass


class EmptyUniverse(IntradayAlphaError, ValueError):
    pass


class EmptyTrainingSet(IntradayAlphaError, ValueError):
    pass


class NonFiniteLoss(IntradayAlphaError, ArithmeticError):
    pass


class ShapeMismatch(IntradayAlphaError, ValueError):
    pass


class NoValidSplit(IntradayAlphaError):
    pass


class NoTradableStocks(IntradayAlphaError, ValueError):
    pass


class SeriesTooShort(IntradayAlphaError, ValueError):
    pass


class ZeroVolatility(IntradayAlphaError, ZeroDivisionError):
    pass


class ZeroDownside(IntradayAlphaError, ZeroDivisionError):
    pass


class ConfigError(IntradayAlphaError, ValueError):
    """Invalid run configuration; reported before any computation starts."""
