"""Exception types raised across the package."""


class SplitflowError(Exception):
    """Base class for all package errors."""


class InvalidSchemeError(SplitflowError, ValueError):
    """Stage coefficients do not define a consistent splitting scheme."""


class NeutralityError(SplitflowError, ValueError):
    """The Poisson right-hand side has a non-zero mean."""

    def __init__(self, residual, tol):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"neutrality violated: |rho_hat_0| = {residual:.3e} exceeds tolerance {tol:.3e}"
        )


class NonFiniteStateError(SplitflowError, FloatingPointError):
    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class ReferenceNotConvergedError(SplitflowError):
    """The Richardson self-check of a reference solution failed."""


class OracleNotConvergedError(SplitflowError):
    """RK4 step doubling changed the oracle result by more than the tolerance."""


class InsufficientDataError(SplitflowError, ValueError):
    pass


class ConfigError(SplitflowError, ValueError):
    pass
