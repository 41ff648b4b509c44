from typing import Annotated, Literal, Union
from pydantic import BaseModel, ConfigDict, Field, field_validator

# int, float, complex, or a sympy-parsable string such as "1/3" or "1/2 + I"
Scalar = Union[int, float, complex, str]


class TaylorCoeffs(BaseModel):
    """Taylor coefficients a_0..a_N of an analytic symbol; the tail is zero"""
    model_config = ConfigDict(frozen=True)

    coeffs: list[complex]

    @field_validator("coeffs")
    @classmethod
    def check_not_empty(cls, value: list[complex]) -> list[complex]:
        if not value:
            raise ValueError("TaylorCoeffs needs at least the constant term")
        return value

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def restrict(self, order: int) -> "TaylorCoeffs":
        if order < 0 or order > self.order:
            raise ValueError(f"cannot restrict order {self.order} to {order}")
        return TaylorCoeffs(coeffs=self.coeffs[: order + 1])


class BilateralCoeffs(BaseModel):
    """Finitely supported Fourier coefficients b(k), k in [-K, K]"""
    model_config = ConfigDict(frozen=True)

    coeffs: dict[int, Scalar] = Field(default_factory=dict)

    @property
    def band(self) -> int:
        return max((abs(k) for k in self.coeffs), default=0)

    @property
    def negative_band(self) -> int:
        """largest j with b(-j) present, 0 when b is analytic"""
        return max((-k for k in self.coeffs if k < 0), default=0)

    @property
    def positive_band(self) -> int:
        return max((k for k in self.coeffs if k > 0), default=0)


class ExplicitSymbol(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["explicit"] = "explicit"
    coeffs: list[Scalar]


class MonomialSymbol(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["monomial"] = "monomial"
    n: int = Field(ge=0)


class CesaroSymbol(BaseModel):
    """g(z) = -log(1 - z)"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["neg_log_one_minus_z"] = "neg_log_one_minus_z"


class LogAlphaSymbol(BaseModel):
    """g(z) = -log(alpha - z), principal branch"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["neg_log_alpha_minus_z"] = "neg_log_alpha_minus_z"
    alpha: complex


class RotatedCesaroSymbol(BaseModel):
    """g(z) = -log(1 - z/alpha); same derivative as -log(alpha - z), no constant"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["rotated_cesaro"] = "rotated_cesaro"
    alpha: complex


class TrigPolynomialSymbol(BaseModel):
    """analytic part of a trigonometric polynomial"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["trig_polynomial"] = "trig_polynomial"
    coeffs: BilateralCoeffs


class CombinationTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    weight: Scalar
    symbol: "SymbolSpec"


class LinearCombinationSymbol(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["linear_combination"] = "linear_combination"
    terms: list[CombinationTerm]


SymbolSpec = Annotated[
    Union[
        ExplicitSymbol,
        MonomialSymbol,
        CesaroSymbol,
        LogAlphaSymbol,
        RotatedCesaroSymbol,
        TrigPolynomialSymbol,
        LinearCombinationSymbol,
    ],
    Field(discriminator="kind"),
]

CombinationTerm.model_rebuild()
LinearCombinationSymbol.model_rebuild()


# registry facts, never computed
IN_VMOA = "in_VMOA"
IN_BMOA_ONLY = "in_BMOA_only"
IN_HINFTY = "in_Hinfty"
IN_QA = "in_QA"
