"""Shared exception types."""


class LatticeError(ValueError):
    """Invalid lattice-arithmetic input (dimension mismatch, rank deficiency, ...)."""


class BudgetExceeded(RuntimeError):
    """A configured point/vertex/iteration budget was exhausted.

    Distinct from a crash: callers (notably the CLI) report it as a bounded
    search that ran out of room, not as a failure of the analysis itself.
    """

    def __init__(self, what, limit):
        super().__init__(f"budget exceeded: {what} (limit {limit})")
        self.what = what
        self.limit = limit


class DisjointnessViolation(ValueError):
    """Two branches of the substitution produced the same point of one color.

    Signals that the input cluster is not a sub-cluster of a valid system
    (or that the digit sets themselves are corrupt).
    """

    def __init__(self, color, point, first, second):
        super().__init__(
            f"color {color}: point {point} produced twice "
            f"(branch {first} and branch {second})"
        )
        self.color = color
        self.point = point
        self.witnesses = (first, second)


class SpecFileError(ValueError):
    """A system spec file failed validation; carries every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
