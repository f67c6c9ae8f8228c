"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class QuasiconvError(Exception):
    """Base class for every error raised by this package."""


class NondegeneracyViolation(QuasiconvError):
    """Some zero of f has |f'| below the nondegeneracy tolerance."""


class DegenerateEquilibrium(QuasiconvError):
    pass


class NoReturnPoint(QuasiconvError):
    """The level of a requested periodic orbit is never re-attained."""


class HitsEquilibrium(QuasiconvError):
    """The requested level passes through an equilibrium (it is a chain level)."""


class InsidePeriodicRegion(QuasiconvError):
    pass


class NotACenter(QuasiconvError):
    pass


class WrongLoopKind(QuasiconvError):
    pass


class NumericalFailure(QuasiconvError):
    """Base for failures that map to exit code 3 in the CLI."""


class QuadratureFailure(NumericalFailure):
    pass


class BlowUp(NumericalFailure):
    def __init__(self, t: float, sup: float):
        super().__init__(f"solution left the a-priori bound at t={t:.6g} (sup|u|={sup:.6g})")
        self.t = t
        self.sup = sup


class WindowTooSmall(QuasiconvError):
    pass


class InsufficientData(QuasiconvError):
    pass


class OutOfRange(QuasiconvError):
    pass


class NoSignChange(QuasiconvError):
    """Both ends of a bisection bracket produce the same outcome."""


class ConfigError(QuasiconvError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
