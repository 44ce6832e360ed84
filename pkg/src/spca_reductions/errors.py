"""Exception and warning types shared across the package."""


class InvalidParameter(ValueError):
    """Raised when a structural precondition on the inputs fails."""


class NotPositiveSemidefinite(ValueError):
    """Raised by psd_sqrt when an eigenvalue falls below -tol."""

    def __init__(self, eigenvalue, tol):
        self.eigenvalue = float(eigenvalue)
        self.tol = float(tol)
        super().__init__(
            f"matrix is not PSD: eigenvalue {self.eigenvalue:.6g} < -{self.tol:.3g}"
        )


class BudgetExceeded(RuntimeError):
    """Raised when an enumeration or sweep would exceed its work budget."""


class HypothesisWarning(UserWarning):
    """An asymptotic hypothesis of a reduction does not hold for these parameters.

    The reduction still runs; only its distributional guarantee is in doubt.
    Promoted to InvalidParameter in strict mode.
    """


def soft_check(ok, message, strict=False):
    """Warn (or raise under ``strict``) when an asymptotic precondition fails."""
    import warnings

    if ok:
        return
    if strict:
        raise InvalidParameter(message)
    warnings.warn(message, HypothesisWarning, stacklevel=3)
