"""Measure values: exact dyadic rationals or Monte-Carlo estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional


@dataclass(frozen=True)
class MeasureValue:
    """Either an exact rational measure or an estimate with a standard error.

    At least one of `exact` / `estimate` is present.  Exact values come from
    rank computations and never touch floating point.
    """

    exact: Optional[Fraction] = None
    estimate: Optional[float] = None
    stderr: Optional[float] = None
    samples: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.exact is None and self.estimate is None:
            raise ValueError("measure needs an exact value or an estimate")
        if self.exact is not None and not 0 <= self.exact <= 1:
            raise ValueError(f"exact measure {self.exact} outside [0, 1]")

    @classmethod
    def of_exact(cls, value: Fraction | int, **meta) -> "MeasureValue":
        return cls(exact=Fraction(value), meta=meta)

    @classmethod
    def of_estimate(cls, mean: float, stderr: float, samples: int, **meta) -> "MeasureValue":
        return cls(estimate=float(mean), stderr=float(stderr), samples=samples, meta=meta)

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def as_float(self) -> float:
        return float(self.exact) if self.exact is not None else float(self.estimate)

    def to_json(self) -> dict:
        out: dict = {}
        if self.exact is not None:
            out["exact"] = format_fraction(self.exact)
            out["value"] = float(self.exact)
        if self.estimate is not None:
            out["estimate"] = self.estimate
            out["stderr"] = self.stderr
            out["samples"] = self.samples
        if self.meta:
            out["meta"] = dict(sorted(self.meta.items()))
        return out


def format_fraction(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)
