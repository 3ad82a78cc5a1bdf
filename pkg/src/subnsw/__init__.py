"""Weighted Nash social welfare under monotone submodular valuations.

Configuration LP relaxation, marked/unmarked assignment graph, randomized
iterative rounding, and exhaustive oracles for checking all of it at small
scale.
"""
from .errors import CapacityError, InfeasibleError, InputError, InvariantError, NSWError
from .instance import Agent, Instance, make_instance

__version__ = "0.1.0"

__all__ = ["Agent", "Instance", "make_instance", "NSWError", "InputError", "CapacityError",
           "InfeasibleError", "InvariantError", "__version__"]
