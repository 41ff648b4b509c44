from typing import Any, Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.series.schema import Scalar

# vectorized entry rule: integer index arrays (broadcastable) -> complex array
EntryFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
# scalar exact rule: (m, l) -> sympy number
ExactEntryFn = Callable[[int, int], Any]


class OperatorRule(BaseModel):
    """Entry rule of an infinite matrix in the monomial basis.

    Bandwidth metadata is a claim about the infinite matrix, ``None`` meaning
    unbounded: entry(m, l) == 0 whenever l > m + upper_bandwidth,
    m > l + lower_bandwidth, l > col_support or m > row_support.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entry: EntryFn
    exact_entry: Optional[ExactEntryFn] = None
    upper_bandwidth: Optional[int] = None
    lower_bandwidth: Optional[int] = None
    col_support: Optional[int] = None
    row_support: Optional[int] = None
    description: str = ""


class FiniteSection(BaseModel):
    """Upper-left corner of an operator matrix with its exactness certificate.

    ``exact[m, l]`` is True where the entry provably equals the infinite
    matrix entry. The mask is closed under decreasing row index (or column
    index when ``window_axis == "cols"``).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray
    exact: np.ndarray
    upper_bandwidth: Optional[int] = None
    lower_bandwidth: Optional[int] = None
    col_support: Optional[int] = None
    row_support: Optional[int] = None
    description: str = ""
    window_axis: Literal["rows", "cols"] = "rows"

    @field_validator("entries")
    @classmethod
    def freeze_entries(cls, value: np.ndarray) -> np.ndarray:
        value = np.array(value, dtype=complex, copy=True)
        if value.ndim != 2:
            raise ValueError(f"section entries must be 2-D, got shape {value.shape}")
        value.setflags(write=False)
        return value

    @field_validator("exact")
    @classmethod
    def freeze_mask(cls, value: np.ndarray) -> np.ndarray:
        value = np.array(value, dtype=bool, copy=True)
        value.setflags(write=False)
        return value

    @model_validator(mode="after")
    def check_shapes(self) -> "FiniteSection":
        if self.entries.shape != self.exact.shape:
            raise ValueError(
                f"exact mask shape {self.exact.shape} does not match entries {self.entries.shape}"
            )
        return self

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def fully_exact(self) -> bool:
        return bool(self.exact.all())


class Product(BaseModel):
    """factors[0] @ factors[1] @ ...; ``cutoff`` bounds unbounded inner sums"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    factors: list["Expr"] = Field(min_length=1)
    cutoff: Optional[int] = None


class Sum(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    terms: list["Expr"] = Field(min_length=1)


class Scaled(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    factor: Scalar
    expr: "Expr"


class Adjoint(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    expr: "Expr"


Expr = Union[OperatorRule, FiniteSection, Product, Sum, Scaled, Adjoint]

Product.model_rebuild()
Sum.model_rebuild()
Scaled.model_rebuild()
Adjoint.model_rebuild()


class SectionSummary(BaseModel):
    """what `op build` and `ess defect` print for a section"""
    description: str
    rows: int
    cols: int
    fully_exact: bool
    uncertified: int
    op_norm: float
    entries: list[list[complex]]
    exact_entries: Optional[list[list[str]]] = None
    oracle_gap: Optional[float] = None
