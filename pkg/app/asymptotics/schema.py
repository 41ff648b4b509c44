from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config.main import SEED
from app.series.schema import BilateralCoeffs

Topology = Literal["uniform", "strong", "weak"]
TraceVerdict = Literal["converges", "diverges", "inconclusive"]
Verdict = Literal[
    "converges_uniform",
    "converges_strong_only",
    "converges_weak_only",
    "diverges",
    "inconclusive",
]


class DiagnosticSettings(BaseModel):
    # None means 4 * max(n_grid)
    window: Optional[int] = Field(default=None, ge=1)
    tol: float = 1e-6
    min_decay_rate: float = 0.4
    slack: float = 1e-9
    seed: int = SEED
    weak_probe_count: int = Field(default=16, ge=1)
    random_probe_count: int = Field(default=8, ge=0)
    random_probe_degree: int = Field(default=63, ge=0)
    symbol_tol: float = 1e-6
    diag_range: list[int] = Field(default_factory=lambda: list(range(-8, 9)))
    extract_grid: list[int] = Field(default_factory=lambda: [2**k for k in range(6, 17)])


class TestVectorFamily(BaseModel):
    """unit vectors in the coefficient norm, one label each"""
    model_config = ConfigDict(frozen=True)
    __test__ = False

    vectors: list[list[complex]]
    labels: list[str]

    @model_validator(mode="after")
    def check_unit_vectors(self) -> "TestVectorFamily":
        if len(self.vectors) != len(self.labels):
            raise ValueError("every test vector needs a label")
        for label, vector in zip(self.labels, self.vectors):
            if abs(np.linalg.norm(np.asarray(vector, dtype=complex)) - 1.0) > 1e-12:
                raise ValueError(f"test vector '{label}' is not unit normalized")
        return self


class TopologyTrace(BaseModel):
    topology: Topology
    distances: list[float]
    fitted_rate: Optional[float] = None
    verdict: TraceVerdict


class DiagonalEstimate(BaseModel):
    """limit of one (anti-)diagonal of the step sequence"""
    diagonal: int
    n_grid: list[int]
    values: list[complex]
    extrapolated: Optional[complex] = None
    cauchy_gap: float
    converged: bool


class SymbolExtraction(BaseModel):
    symbol: BilateralCoeffs
    diagonals: list[DiagonalEstimate]

    @property
    def all_converged(self) -> bool:
        return all(d.converged for d in self.diagonals)


class ConvergenceReport(BaseModel):
    operator: str
    kind: Literal["toeplitz", "hankel"]
    window: int
    n_grid: list[int]
    candidate: str
    traces: list[TopologyTrace]
    verdict: Verdict
    symbol_estimate: Optional[BilateralCoeffs] = None
    # n values behind symbol_estimate and diagonals, not n_grid
    extraction_grid: list[int] = Field(default_factory=list)
    diagonals: list[DiagonalEstimate] = Field(default_factory=list)

    def trace(self, topology: Topology) -> TopologyTrace:
        for trace in self.traces:
            if trace.topology == topology:
                return trace
        raise KeyError(topology)
