"""Exception hierarchy shared by all modules."""


class UniregError(Exception):
    """Base class for library errors."""


class DimensionError(UniregError, ValueError):
    """Vectors or sets live in incompatible ambient dimensions."""


class PointNotInSet(UniregError, ValueError):
    pass


class PointNotInIntersection(PointNotInSet):
    pass


class NonRegularPoint(UniregError):
    """The point sits on a junction of union pieces; its Frechet cone is not
    in the exact catalog."""


class TrivialCone(UniregError, ValueError):
    pass


class AmbientDimensionTooLarge(UniregError):
    pass


class InsufficientData(UniregError):
    pass


class NonConvergence(UniregError):
    pass


class MethodArityError(UniregError, ValueError):
    pass


class ParseError(UniregError):
    pass


class ValidationError(UniregError):
    pass
