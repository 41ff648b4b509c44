from enum import Enum
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

CompactnessVerdict = Literal["compact_like", "noncompact_like", "inconclusive"]
Provenance = Literal["theorem", "numeric", "unknown"]


class DefectKind(str, Enum):
    left_commutator = "left_commutator"          # S T - T S
    star_commutator = "star_commutator"          # S* T - T S*
    hankel_defect = "hankel_defect"              # T - S T S
    hankel_defect_star = "hankel_defect_star"    # T - S* T S*
    toeplitz_defect = "toeplitz_defect"          # S* T S - T


class ProbeSettings(BaseModel):
    window: int = Field(default=512, ge=4)
    # None means the geometric grid N/64, N/32, ..., N/4
    cut_grid: Optional[list[int]] = None
    tol: float = 1e-3
    compact_rate: float = 0.8
    plateau_rate: float = 0.6
    sigma_rate: float = 0.5
    slack: float = 1e-9


class CompactnessEstimate(BaseModel):
    operator: str
    window: int
    cut_grid: list[int]
    tail_norms: list[float]
    tail_rate: Optional[float] = None
    sigma_tail: list[float]
    sigma_rate: Optional[float] = None
    extrapolated_ess_norm: float
    fit_quality: float
    tol: float
    verdict: CompactnessVerdict


class ClassificationEntry(BaseModel):
    value: Optional[bool] = None
    provenance: Provenance
    detail: str = ""


class ClassificationRecord(BaseModel):
    """serialized with the upper-case property names (UAT, SAT, ...)"""
    model_config = ConfigDict(populate_by_name=True)

    symbol: str
    operator: Literal["volterra", "sg"]
    uat: ClassificationEntry = Field(alias="UAT")
    sat: ClassificationEntry = Field(alias="SAT")
    wat: ClassificationEntry = Field(alias="WAT")
    uah: ClassificationEntry = Field(alias="UAH")
    ess_toep: ClassificationEntry = Field(alias="essToep")
    ess_hank: ClassificationEntry = Field(alias="essHank")
    probes: dict[str, Any] = Field(default_factory=dict)
    anomalies: list[str] = Field(default_factory=list)


class ProductCheck(BaseModel):
    label: str
    defect: DefectKind
    estimate: CompactnessEstimate


class ProductStructureReport(BaseModel):
    symbols: dict[str, str]
    window: int
    checks: list[ProductCheck]


class HankelLowerBound(BaseModel):
    """norms of the hankel defect of S_g on e_n against |a_k0|"""
    symbol: str
    window: int
    k0: int
    bound: float
    n_values: list[int]
    norms: list[float]
    min_norm: float


class LemmaCheck(BaseModel):
    first: DefectKind
    second: DefectKind
    first_verdict: CompactnessVerdict
    second_verdict: CompactnessVerdict
    agree: bool


class LemmaEquivalenceReport(BaseModel):
    operator: str
    window: int
    checks: list[LemmaCheck]

