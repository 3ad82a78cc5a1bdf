"""Exception hierarchy shared by every stage of the solver.

Each class carries the CLI exit code it maps to.
"""


class NSWError(Exception):
    exit_code = 4


class InputError(NSWError, ValueError):
    """Malformed or out-of-contract input (bad item id, bad parameters, schema violations)."""

    exit_code = 1


class CapacityError(NSWError):
    """Requested exhaustive computation exceeds the desk-scale limits."""

    exit_code = 3


class InfeasibleError(NSWError):
    """The configuration LP has no feasible point, so the optimal NSW is 0."""

    exit_code = 2


class InvariantError(NSWError, RuntimeError):
    """An internal invariant was breached; indicates a bug or numerical breakdown."""

    exit_code = 4
