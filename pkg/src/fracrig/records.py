"""Small result records shared across the package.

Every numeric result that leaves a module carries enough context to be
reproduced: series values carry their truncation level and a bound on the
discarded tail, Monte Carlo estimates carry sample count, standard error
and the seed that produced them, and bound checks carry both endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SeriesValue:
    """Value of a convergent series plus a bound on the truncation error.

    ``value`` is the partial sum over ``n_terms`` terms, possibly corrected
    by an analytic estimate of the discarded tail; in either case the exact
    sum lies within ``tail_bound`` of ``value``.
    """

    value: float
    n_terms: int
    tail_bound: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with its standard error.

    ``std_error`` is the sample standard deviation of the per-replicate
    values divided by sqrt(n); ``seed``/``stream_id`` identify the random
    stream so the estimate can be reproduced bit for bit.
    """

    mean: float
    std_error: float
    n: int
    seed: int
    stream_id: int = 0

    def __float__(self) -> float:
        return self.mean

    def interval(self, width: float = 3.0) -> tuple[float, float]:
        return (self.mean - width * self.std_error,
                self.mean + width * self.std_error)


@dataclass(frozen=True)
class BoundEntry:
    """One two-sided bound check: lower <= value <= upper within tol.

    ``tol`` absorbs the honest numerical slack: series tail bounds for
    deterministic entries, 3 standard errors plus any reported bias budget
    for stochastic ones.  ``informational`` entries are reported but do not
    count toward an overall pass.
    """

    name: str
    value: float
    lower: float
    upper: float
    tol: float = 0.0
    std_error: float = 0.0
    informational: bool = False
    inputs: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (self.lower - self.tol) <= self.value <= (self.upper + self.tol)

    @property
    def margin(self) -> float:
        """Distance to the nearest endpoint; negative when outside."""
        return min(self.value - self.lower, self.upper - self.value)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lower": self.lower,
            "value": self.value,
            "se": self.std_error,
            "upper": self.upper,
            "tol": self.tol,
            "pass": self.passed,
            "margin": self.margin,
            "informational": self.informational,
            "inputs": dict(self.inputs),
        }


@dataclass(frozen=True)
class BoundsReport:
    """A batch of bound checks with an overall verdict."""

    entries: tuple[BoundEntry, ...]

    @property
    def overall_pass(self) -> bool:
        return all(e.passed for e in self.entries if not e.informational)

    def entry(self, name: str) -> BoundEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)
