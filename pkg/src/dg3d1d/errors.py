"""Exception hierarchy shared by the solver modules."""


class Dg3d1dError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(Dg3d1dError, ValueError):
    pass


class MeshInvalidError(Dg3d1dError):
    pass


class OutOfDomainError(Dg3d1dError):
    pass


class GeometryError(Dg3d1dError):
    """A vessel cylinder is not strictly contained in the 3D box."""


class NetworkFormatError(Dg3d1dError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class NotSPDError(Dg3d1dError):
    pass


class ConvergenceError(Dg3d1dError):
    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class QuadratureError(Dg3d1dError):
    pass
