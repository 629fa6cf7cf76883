"""Exception types raised across the package."""


class WentzellError(Exception):
    """Base class for all package errors."""


class CoefficientDomainError(WentzellError, ValueError):
    """A boundary coefficient violates b > 0 or c >= 0."""


class ShapeMismatchError(WentzellError, ValueError):
    """Vectors do not match the mesh or each other."""


class NonlinearityError(WentzellError, ValueError):
    """A nonlinearity fails the admissibility audit (alpha(0) = 0, monotone)."""


class Delta2Error(WentzellError, ValueError):
    """The Delta_2 sampler cannot form ratios on the requested window."""


class UncoupledVectorError(WentzellError, ValueError):
    """An operation needs u_Gamma to be the trace of u_Omega."""


class WrongCertificateError(WentzellError, ValueError):
    """The requested certificate does not apply to this problem."""


class EigenSolveError(WentzellError, RuntimeError):
    """The eigensolver did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GroundStateError(WentzellError, ValueError):
    """The computed ground state is not strictly positive."""


class ConfigError(WentzellError, ValueError):
    """Invalid run configuration."""
