import cmath
import logging
import math
import threading
from fractions import Fraction
from typing import Any

import numpy as np
import sympy
from pydantic import TypeAdapter

from app.exceptions import InvalidInputError, IrrationalSymbolError
from app.series.schema import (
    IN_BMOA_ONLY,
    IN_HINFTY,
    IN_QA,
    IN_VMOA,
    BilateralCoeffs,
    CesaroSymbol,
    CombinationTerm,
    ExplicitSymbol,
    LinearCombinationSymbol,
    LogAlphaSymbol,
    MonomialSymbol,
    RotatedCesaroSymbol,
    Scalar,
    SymbolSpec,
    TaylorCoeffs,
    TrigPolynomialSymbol,
)

logger = logging.getLogger(__name__)

_symbol_adapter = TypeAdapter(SymbolSpec)

UNIT_CIRCLE_TOL = 1e-12


def parse_symbol(data: Any) -> SymbolSpec:
    """validate a JSON-like document into a SymbolSpec"""
    return _symbol_adapter.validate_python(data)


# scalars

def to_exact(value: Any) -> sympy.Expr:
    """exact (Gaussian) rational value of a scalar, or IrrationalSymbolError"""
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, sympy.Basic):
        expr = value
    elif isinstance(value, int):
        expr = sympy.Integer(value)
    elif isinstance(value, Fraction):
        expr = sympy.Rational(value.numerator, value.denominator)
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise IrrationalSymbolError(f"non-finite scalar {value}")
        expr = sympy.Rational(value)
    elif isinstance(value, complex):
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise IrrationalSymbolError(f"non-finite scalar {value}")
        expr = sympy.Rational(value.real) + sympy.I * sympy.Rational(value.imag)
    elif isinstance(value, str):
        try:
            expr = sympy.sympify(value, rational=True)
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise InvalidInputError(f"cannot parse scalar '{value}'") from exc
    else:
        raise InvalidInputError(f"unsupported scalar {value!r}")

    real, imag = sympy.expand(expr).as_real_imag()
    if not (real.is_Rational and imag.is_Rational):
        raise IrrationalSymbolError(f"scalar {value!r} is not a Gaussian rational")
    return real + sympy.I * imag


def to_complex(value: Any) -> complex:
    if isinstance(value, str):
        try:
            return complex(sympy.sympify(value))
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise InvalidInputError(f"cannot parse scalar '{value}'") from exc
    return complex(value)


def _check_alpha(alpha: complex, allow_cut: bool) -> None:
    if abs(abs(alpha) - 1.0) > UNIT_CIRCLE_TOL:
        raise InvalidInputError(f"alpha={alpha} is not on the unit circle")
    # the disk alpha - D meets the negative real axis exactly when Re(alpha) < 0
    if not allow_cut and alpha.real < -UNIT_CIRCLE_TOL:
        raise InvalidInputError(
            f"alpha={alpha}: alpha - z crosses the principal log cut for z in the disk"
        )


# coefficient emission

def _float_coeffs(symbol: SymbolSpec, order: int) -> np.ndarray:
    out = np.zeros(order + 1, dtype=complex)
    k = np.arange(1, order + 1)

    if isinstance(symbol, MonomialSymbol):
        if symbol.n <= order:
            out[symbol.n] = 1.0
    elif isinstance(symbol, ExplicitSymbol):
        values = [to_complex(c) for c in symbol.coeffs[: order + 1]]
        out[: len(values)] = values
    elif isinstance(symbol, CesaroSymbol):
        out[1:] = 1.0 / k
    elif isinstance(symbol, LogAlphaSymbol):
        alpha = complex(symbol.alpha)
        _check_alpha(alpha, allow_cut=False)
        out[0] = -cmath.log(alpha)
        out[1:] = 1.0 / (k * np.power(alpha, k))
    elif isinstance(symbol, RotatedCesaroSymbol):
        alpha = complex(symbol.alpha)
        _check_alpha(alpha, allow_cut=True)
        out[1:] = 1.0 / (k * np.power(alpha, k))
    elif isinstance(symbol, TrigPolynomialSymbol):
        for index, value in symbol.coeffs.coeffs.items():
            if 0 <= index <= order:
                out[index] = to_complex(value)
    elif isinstance(symbol, LinearCombinationSymbol):
        for term in symbol.terms:
            out += to_complex(term.weight) * _float_coeffs(term.symbol, order)
    else:
        raise InvalidInputError(f"unknown symbol kind {symbol!r}")
    return out


def coeffs_of(symbol: SymbolSpec, order: int) -> TaylorCoeffs:
    """Taylor coefficients of g through degree `order`"""
    if order < 0:
        raise InvalidInputError(f"order must be >= 0, got {order}")
    return TaylorCoeffs(coeffs=_float_coeffs(symbol, order).tolist())


def exact_coeffs_of(symbol: SymbolSpec, order: int) -> list[sympy.Expr]:
    """exact Gaussian-rational Taylor coefficients; IrrationalSymbolError otherwise"""
    if order < 0:
        raise InvalidInputError(f"order must be >= 0, got {order}")
    zero = sympy.Integer(0)
    out = [zero] * (order + 1)

    if isinstance(symbol, MonomialSymbol):
        if symbol.n <= order:
            out[symbol.n] = sympy.Integer(1)
    elif isinstance(symbol, ExplicitSymbol):
        for index, value in enumerate(symbol.coeffs[: order + 1]):
            out[index] = to_exact(value)
    elif isinstance(symbol, CesaroSymbol):
        out[1:] = [sympy.Rational(1, j) for j in range(1, order + 1)]
    elif isinstance(symbol, (LogAlphaSymbol, RotatedCesaroSymbol)):
        alpha = to_exact(symbol.alpha)
        real, imag = alpha.as_real_imag()
        if real**2 + imag**2 != 1:
            raise IrrationalSymbolError(f"alpha={symbol.alpha} is not an exact unimodular rational")
        if isinstance(symbol, LogAlphaSymbol):
            _check_alpha(complex(symbol.alpha), allow_cut=False)
            if alpha != 1:
                raise IrrationalSymbolError(f"-log({symbol.alpha}) is not rational")
        # 1/alpha = conj(alpha) on the unit circle
        inverse = sympy.conjugate(alpha)
        power = sympy.Integer(1)
        for j in range(1, order + 1):
            power = sympy.expand(power * inverse)
            out[j] = power / j
    elif isinstance(symbol, TrigPolynomialSymbol):
        for index, value in symbol.coeffs.coeffs.items():
            if 0 <= index <= order:
                out[index] = to_exact(value)
    elif isinstance(symbol, LinearCombinationSymbol):
        for term in symbol.terms:
            weight = to_exact(term.weight)
            part = exact_coeffs_of(term.symbol, order)
            out = [sympy.expand(a + weight * b) for a, b in zip(out, part)]
    else:
        raise InvalidInputError(f"unknown symbol kind {symbol!r}")
    return out


def has_exact_coeffs(symbol: SymbolSpec) -> bool:
    try:
        exact_coeffs_of(symbol, 4)
    except IrrationalSymbolError:
        return False
    return True


class CoefficientStream:
    """Cached, growing coefficient emission for one symbol.

    Coefficient emission is prefix stable, so a longer cache can always
    answer a shorter request.
    """

    def __init__(self, symbol: SymbolSpec):
        self.symbol = symbol
        self._floats = np.zeros(0, dtype=complex)
        self._exact: list[sympy.Expr] = []
        self._lock = threading.Lock()

    def take(self, count: int) -> np.ndarray:
        with self._lock:
            if count > len(self._floats):
                size = max(count, 2 * len(self._floats), 16)
                self._floats = _float_coeffs(self.symbol, size - 1)
                self._floats.setflags(write=False)
            return self._floats

    def exact(self, count: int) -> list[sympy.Expr]:
        with self._lock:
            if count > len(self._exact):
                size = max(count, 2 * len(self._exact), 16)
                self._exact = exact_coeffs_of(self.symbol, size - 1)
            return self._exact


# bilateral symbols

def reflect(b: BilateralCoeffs) -> BilateralCoeffs:
    """coefficients of b~(z) = b(conj z): k -> -k"""
    return BilateralCoeffs(coeffs={-k: v for k, v in b.coeffs.items()})


def conjugate_scalar(value: Scalar) -> Scalar:
    if isinstance(value, str):
        return str(sympy.conjugate(sympy.sympify(value, rational=True)))
    return value.conjugate() if isinstance(value, complex) else value


def conjugate_reflect(b: BilateralCoeffs) -> BilateralCoeffs:
    """symbol of the adjoint Toeplitz operator"""
    return BilateralCoeffs(coeffs={-k: conjugate_scalar(v) for k, v in b.coeffs.items()})


def convolve(b: BilateralCoeffs, q: BilateralCoeffs) -> BilateralCoeffs:
    """coefficients of the product symbol b*q"""
    try:
        left = {k: to_exact(v) for k, v in b.coeffs.items()}
        right = {k: to_exact(v) for k, v in q.coeffs.items()}
        exact = True
    except IrrationalSymbolError:
        left = {k: to_complex(v) for k, v in b.coeffs.items()}
        right = {k: to_complex(v) for k, v in q.coeffs.items()}
        exact = False

    product: dict[int, Any] = {}
    for i, u in left.items():
        for j, v in right.items():
            product[i + j] = product.get(i + j, 0) + u * v
    if exact:
        return BilateralCoeffs(coeffs={k: str(sympy.expand(v)) for k, v in product.items() if v != 0})
    return BilateralCoeffs(coeffs={k: complex(v) for k, v in product.items() if v != 0})


# derived symbols

def hankel_defect_symbol(symbol: SymbolSpec, order: int) -> ExplicitSymbol:
    """explicit h with h' = (1 - z^2) g', truncated at `order`, h(0) = 0"""
    try:
        g = exact_coeffs_of(symbol, order)
        h = [sympy.Integer(0)] * (order + 1)
        for m in range(1, order + 1):
            h[m] = g[m] - (sympy.Rational(m - 2, m) * g[m - 2] if m >= 2 else 0)
        return ExplicitSymbol(coeffs=[str(sympy.expand(c)) for c in h])
    except IrrationalSymbolError:
        g = _float_coeffs(symbol, order)
        h = np.zeros(order + 1, dtype=complex)
        m = np.arange(2, order + 1)
        h[1:] = g[1:]
        h[2:] -= (m - 2) / m * g[: order - 1]
        return ExplicitSymbol(coeffs=h.tolist())


# registry

def _is_polynomial(symbol: SymbolSpec) -> bool:
    if isinstance(symbol, (MonomialSymbol, ExplicitSymbol, TrigPolynomialSymbol)):
        return True
    if isinstance(symbol, LinearCombinationSymbol):
        return all(_is_polynomial(term.symbol) for term in symbol.terms)
    return False


def _is_log_family(symbol: SymbolSpec) -> bool:
    return isinstance(symbol, (CesaroSymbol, LogAlphaSymbol, RotatedCesaroSymbol))


def class_flags(symbol: SymbolSpec) -> frozenset[str] | None:
    """function-class facts certified for the built-in families, else None"""
    if _is_polynomial(symbol):
        return frozenset({IN_VMOA, IN_HINFTY, IN_QA})
    if _is_log_family(symbol):
        return frozenset({IN_BMOA_ONLY})
    if isinstance(symbol, LinearCombinationSymbol):
        rest = [t for t in symbol.terms if not _is_polynomial(t.symbol)]
        if len(rest) == 1 and _is_log_family(rest[0].symbol) and to_complex(rest[0].weight) != 0:
            return frozenset({IN_BMOA_ONLY})
    return None


def describe_symbol(symbol: SymbolSpec) -> str:
    if isinstance(symbol, MonomialSymbol):
        return "1" if symbol.n == 0 else ("z" if symbol.n == 1 else f"z^{symbol.n}")
    if isinstance(symbol, CesaroSymbol):
        return "-log(1-z)"
    if isinstance(symbol, LogAlphaSymbol):
        return f"-log({symbol.alpha}-z)"
    if isinstance(symbol, RotatedCesaroSymbol):
        return f"-log(1-z/{symbol.alpha})"
    if isinstance(symbol, ExplicitSymbol):
        terms = [f"({c})z^{k}" for k, c in enumerate(symbol.coeffs) if to_complex(c) != 0]
        return " + ".join(terms) if terms else "0"
    if isinstance(symbol, TrigPolynomialSymbol):
        return f"P+ trig{dict(sorted(symbol.coeffs.coeffs.items()))}"
    if isinstance(symbol, LinearCombinationSymbol):
        return " + ".join(f"({t.weight})[{describe_symbol(t.symbol)}]" for t in symbol.terms)
    return repr(symbol)


def linear_combination(*terms: tuple[Scalar, SymbolSpec]) -> LinearCombinationSymbol:
    return LinearCombinationSymbol(terms=[CombinationTerm(weight=w, symbol=s) for w, s in terms])


REGISTRY: dict[str, SymbolSpec] = {
    "z": MonomialSymbol(n=1),
    "z2": MonomialSymbol(n=2),
    "cesaro": CesaroSymbol(),
    "one_plus_half_z": ExplicitSymbol(coeffs=["1", "1/2"]),
    "log_alpha_i": LogAlphaSymbol(alpha=1j),
    "rotated_cesaro_i": RotatedCesaroSymbol(alpha=1j),
    "rotated_cesaro_minus_one": RotatedCesaroSymbol(alpha=-1),
}

# symbols with rational coefficients, used by the exact identity suites
RATIONAL_REGISTRY = ("z", "z2", "cesaro", "one_plus_half_z")


def registry_symbol(name: str) -> SymbolSpec:
    if name not in REGISTRY:
        raise InvalidInputError(f"unknown registry symbol '{name}'", details=sorted(REGISTRY))
    return REGISTRY[name]
