"""Online convex optimization under bandit feedback.

A second-order learner driven by single-evaluation gradient estimates
(ONSEG), its first-order estimated-gradient counterpart (OGDEG), the
full-information baselines ONS and OGD, and a benchmark harness for online
regression, classification, and portfolio selection.
"""

from .backend import active_backend, available_backends

__version__ = "0.1.0"

__all__ = ["active_backend", "available_backends", "__version__"]
