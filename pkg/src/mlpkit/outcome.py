"""Solve outcome shared by the LP, bilevel, and k-level layers."""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import Point
from .rat import Rat

INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ATTAINED = "attained"
FINITE = "finite"  # finite value; attainment per the `attainment` field


@dataclass
class SolveOutcome:
    status: str
    value: Rat = None
    witness: Point = None
    attainment: str = None  # 'attained' | 'not-attained' | 'unknown'
    certificate: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status not in (INFEASIBLE,)

    def describe(self) -> str:
        from .rat import format_rat

        if self.status == INFEASIBLE:
            return "INFEASIBLE"
        if self.status == UNBOUNDED:
            return "UNBOUNDED"
        if self.status == ATTAINED:
            return f"VALUE {format_rat(self.value)}"
        tag = {"not-attained": " (not attained)", "attained": ""}.get(self.attainment, " (attainment unknown)")
        return f"VALUE {format_rat(self.value)}{tag}"
