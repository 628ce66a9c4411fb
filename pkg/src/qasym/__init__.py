"""Numerical toolkit for local asymptotic quantum estimation.

Finite-dimensional parametric state models, SLD Fisher analysis, D-invariant
extensions, the asymptotic representation (generalized Holevo) bound, quantum
Gaussian shift calculus, finite-n convergence diagnostics and estimator risk
experiments.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, QasymError, ValidationError

__all__ = ["ConvergenceError", "QasymError", "ValidationError", "__version__"]
