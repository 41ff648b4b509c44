from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from app.asymptotics.schema import ConvergenceReport, DiagnosticSettings
from app.config.main import DEFAULT_WINDOW, EXACT_WINDOW, SEED, TOLERANCE
from app.essential.schema import ProbeSettings
from app.harness.constants import SCHEMA_VERSION
from app.series.schema import SymbolSpec

ExactMode = Literal["auto", "force", "off"]


class RunConfig(BaseModel):
    """Everything a run depends on; the seed fixes every randomized probe."""
    window: int = Field(default=DEFAULT_WINDOW, ge=1)
    exact_window: int = Field(default=EXACT_WINDOW, ge=1)
    tolerance: float = TOLERANCE
    seed: int = SEED
    # force: a case without a rational path is skipped, so its suite fails
    exact_mode: ExactMode = "auto"
    n_grid: list[int] = Field(default_factory=lambda: [8, 16, 32, 64])
    expression: Optional[dict[str, Any]] = None
    symbols: dict[str, SymbolSpec] = Field(default_factory=dict)
    diagnostics: DiagnosticSettings = Field(default_factory=DiagnosticSettings)
    compactness: ProbeSettings = Field(default_factory=ProbeSettings)
    out: Optional[str] = None
    csv: Optional[str] = None


class SuiteCase(BaseModel):
    label: str
    inputs: dict[str, Any] = Field(default_factory=dict)
    window: int
    residual: Optional[float] = None
    exact_window: Optional[int] = None
    exact_path_used: bool = False
    exact_residual_zero: Optional[bool] = None
    oracle_gap: Optional[float] = None
    skipped: bool = False
    passed: bool
    notes: list[str] = Field(default_factory=list)


class SuiteResult(BaseModel):
    suite: str
    tolerance: float
    cases: list[SuiteCase]
    passed: bool


class VerificationReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    seed: int
    window: int
    exact_window: int
    suites: list[SuiteResult]
    passed: bool


class ScenarioReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    scenario: str
    seed: int
    classification: list[dict[str, Any]] = Field(default_factory=list)
    convergence: list[ConvergenceReport] = Field(default_factory=list)
    probes: dict[str, Any] = Field(default_factory=dict)
    expectations: dict[str, bool] = Field(default_factory=dict)
    passed: bool
