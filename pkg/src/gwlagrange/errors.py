"""Exception and warning types shared across the package."""


class GWError(Exception):
    """Base class for numerical failures raised by gwlagrange."""


class DomainError(GWError, ValueError):
    """Argument outside the domain of the function (e.g. ``t >= R``)."""


class BackendMismatchError(GWError, TypeError):
    pass


class NoApexError(GWError):
    """The mean function never reaches 1: the series is not in the starred class."""


class ConvergenceError(GWError):
    """An iteration, limit probe or self-check did not converge."""


class ApexPointError(GWError):
    """Derivative requested exactly at the apex, where it jumps."""


class TailTooLargeError(GWError):
    pass


class SizeCapError(GWError, ValueError):
    pass


class OffLatticeError(GWError, ZeroDivisionError):
    """Conditioning on a size ``n`` with ``A_n = 0``."""


class SlowConvergenceWarning(UserWarning):
    pass


class TailDominatesWarning(UserWarning):
    pass
