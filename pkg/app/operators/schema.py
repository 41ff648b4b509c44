from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.sections.schema import OperatorRule
from app.series.schema import Scalar, SymbolSpec
from app.series.service import REGISTRY

OperatorName = Literal[
    "identity",
    "shift",
    "backshift",
    "projection",
    "flip",
    "delta0",
    "volterra",
    "sg",
    "mult",
    "toeplitz",
    "hankel",
    "moment_hankel",
]

Structure = Literal["diagonal", "strictly_lower", "lower", "upper", "toeplitz", "hankel", "finite_rank"]


class Atom(BaseModel):
    """point mass w at t; checked to lie in [0, 1) with w > 0 when the rule is built"""
    model_config = ConfigDict(frozen=True)

    t: Scalar
    w: Scalar = 1


class OperatorDescriptor(BaseModel):
    """{"op": name, "symbol": ..., "n": ..., "b": ..., "measure": ...}"""
    model_config = ConfigDict(frozen=True)

    op: OperatorName
    symbol: Optional[SymbolSpec] = None
    n: int = 1
    b: Optional[dict[int, Scalar]] = None
    measure: Union[Literal["lebesgue"], list[Atom]] = "lebesgue"

    @field_validator("symbol", mode="before")
    @classmethod
    def resolve_registry_name(cls, value: Any) -> Any:
        if isinstance(value, str):
            if value not in REGISTRY:
                raise ValueError(f"unknown registry symbol '{value}', expected one of {sorted(REGISTRY)}")
            return REGISTRY[value]
        return value


class OperatorCatalogEntry(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    rule: OperatorRule
    provenance: str
    structure: Structure
    symbol_dependencies: list[SymbolSpec] = Field(default_factory=list)


class ApplyResult(BaseModel):
    operator: str
    window: int
    image: list[complex]
    norm: float
