class ConvergenceError(RuntimeError):
    """A fixed point, root bracket or bisection did not converge."""


class DegenerateError(RuntimeError):
    """An oracle decision matrix is numerically singular at the bulk edge."""
