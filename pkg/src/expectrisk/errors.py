"""Exception and warning types shared across the package."""

from __future__ import annotations


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular system, NaN, divergence)."""


class SingularSystemError(NumericalError):
    """The Newton system could not be factorized even after jitter.

    Usually means the kernel matrix is rank deficient and the ridge
    parameter is too small; increase ``lam``.
    """


class ConvergenceError(NumericalError):
    """An iteration reached its cap without meeting the stopping rule.

    Carries the last iterate so callers can still inspect or persist it.
    """

    def __init__(self, message, report=None, weights=None):
        super().__init__(message)
        self.report = report
        self.weights = weights


class NanEncounteredError(NumericalError):
    """NaN showed up during a finite-difference sweep."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class RateClampWarning(UserWarning):
    """A per-step risk budget beta*dt exceeded 1 and was clamped."""
