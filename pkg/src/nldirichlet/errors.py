"""Exception hierarchy shared by all modules."""


class NonlocalError(Exception):
    """Base class for every error raised by this package."""


class ZeroMoment(NonlocalError, ValueError):
    pass


class NegativeProfile(NonlocalError, ValueError):
    pass


class EmptySupport(NonlocalError, ValueError):
    pass


class OutOfDomain(NonlocalError, ValueError):
    pass


class LayerOverlap(NonlocalError, ValueError):
    pass


class QuadratureFailure(NonlocalError, RuntimeError):
    pass


class GridMismatch(NonlocalError, ValueError):
    pass


class MethodMismatch(NonlocalError, ValueError):
    pass


class SingularMatrix(NonlocalError, ArithmeticError):
    pass


class DegenerateFit(NonlocalError, ValueError):
    pass


class InvalidConfig(NonlocalError, ValueError):
    pass


class DegenerateDirection(NonlocalError, ValueError):
    pass


class OutsideLayer(NonlocalError, ValueError):
    pass
