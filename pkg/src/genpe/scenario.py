"""Scenario description shared by the built-in corpus and the file loader."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .criteria import CriterionConfig
from .errors import BadParameters
from .signal import MatrixSignal
from .truncation import TruncationFunction

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SimulationSpec:
    x0: tuple[tuple[float, ...], ...]
    T: float
    method: str = "auto"
    step: float | None = None
    weak_tests: int = 20

    def as_dict(self) -> dict:
        return {
            "x0": [list(x) for x in self.x0],
            "T": self.T,
            "method": self.method,
            "step": self.step,
            "weak_tests": self.weak_tests,
        }


@dataclass(frozen=True)
class OutputSpec:
    report: str = "report.json"
    series: str = "series"


@dataclass(frozen=True)
class Scenario:
    name: str
    signal: MatrixSignal
    signal_spec: dict
    omega: TruncationFunction
    criteria: tuple[CriterionConfig, ...]
    simulation: SimulationSpec
    output: OutputSpec = OutputSpec()
    description: str = ""
    oracles: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not self.omega.S < self.simulation.T:
            raise BadParameters(f"S={self.omega.S} must be below the simulation horizon {self.simulation.T}")
        for x in self.simulation.x0:
            if len(x) != self.signal.dimension:
                raise BadParameters(f"x0 {list(x)} does not match dimension {self.signal.dimension}")

    def with_threads(self, threads: int) -> "Scenario":
        return replace(self, criteria=tuple(replace(c, threads=threads) for c in self.criteria))

    def summary(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "signal": dict(self.signal_spec),
            "truncation": self.omega.as_dict(),
            "simulation": self.simulation.as_dict(),
        }
