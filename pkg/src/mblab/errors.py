"""Exception hierarchy for mblab."""


class MBLabError(Exception):
    """Base class for all engine errors."""


class RationalInput(MBLabError):
    pass


class FieldMismatch(MBLabError):
    """Quadratic numbers from different fields Q(sqrt d) were combined."""


class SecondInvariantUnavailable(MBLabError):
    pass


class ReductionUnavailable(MBLabError):
    pass


class ShiftTooLarge(MBLabError):
    pass


class DomainMismatch(MBLabError):
    pass


class StripOutOfRange(MBLabError):
    pass


class WindowOutOfRange(MBLabError):
    pass


class NotInGamma1(MBLabError):
    pass


class NotInGamma2(MBLabError):
    pass


class NoConvergence(MBLabError):
    pass


class GapConditionViolated(MBLabError):
    pass


class PremiseViolated(MBLabError):
    pass


class ConfigError(MBLabError):
    pass
