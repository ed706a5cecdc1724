"""Exception types shared across modules."""


class NumericalConvergenceError(RuntimeError):
    """An iterative numerical routine failed to reach its requested tolerance."""


class UncoupledScattererWarning(UserWarning):
    """A point scatterer sits on a nodal line of every mode in the band."""
