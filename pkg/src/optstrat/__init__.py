"""Learning optimal strategies of parametric (mixed-integer) convex programs."""

__version__ = "0.1.0"
