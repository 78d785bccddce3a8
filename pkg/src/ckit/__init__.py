"""ckit: catalyzed first-order solvers with a verified convergence testbed."""

__version__ = "0.1.0"
