"""
Run trace models.

A RunTrace is what every iterative method in the package returns: one record
per traced iteration plus the full step-norm sequence used by the O(1/r)
step-size diagnostic.
"""

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

TRACE_COLUMNS = ("r", "step_norm", "surrogate_gap", "sampled_obj")


@dataclass
class TraceRecord:
    """Diagnostics recorded at iteration r."""

    r: int
    step_norm: float  # ||x^r - x^{r-1}||
    surrogate_gap: float  # fhat^r(x^r) - f^r(x^r), NaN when not tracked
    sampled_obj: float  # g(x^{r-1}, xi^r)
    aggregate_value: float = float("nan")  # fhat^r(x^r)
    aggregate_at_previous: float = float("nan")  # fhat^r(x^{r-1})

    def to_dict(self) -> dict:
        """Convert to dictionary representation (CSV columns only)."""
        return {
            "r": self.r,
            "step_norm": self.step_norm,
            "surrogate_gap": self.surrogate_gap,
            "sampled_obj": self.sampled_obj,
        }

    @classmethod
    def from_row(cls, row: dict) -> "TraceRecord":
        """Create a TraceRecord from a parsed CSV row."""
        return cls(
            r=int(row["r"]),
            step_norm=float(row["step_norm"]),
            surrogate_gap=float(row["surrogate_gap"]),
            sampled_obj=float(row["sampled_obj"]),
        )


@dataclass
class RunTrace:
    """
    Per-iteration history of an iterative run.

    Attributes:
        records: Records for the traced iterations, in order
        step_norms: ||x^r - x^{r-1}|| for every r = 1..n (index r - 1)
        final: The last iterate
        iterates: Every iterate x^1..x^n when requested by the caller
        stopped_early: Whether the step-norm stopping rule fired
    """

    records: list[TraceRecord] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)
    final: Any = None
    iterates: Optional[list[Any]] = None
    stopped_early: bool = False

    @property
    def n_iterations(self) -> int:
        return len(self.step_norms)

    def column(self, name: str) -> np.ndarray:
        """Values of one record field across traced iterations."""
        return np.array([getattr(rec, name) for rec in self.records], dtype=float)

    def record_at(self, r: int) -> TraceRecord:
        """Return the record for iteration r."""
        for rec in self.records:
            if rec.r == r:
                return rec
        raise KeyError(f"iteration {r} was not traced")
