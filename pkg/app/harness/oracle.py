import logging

import numpy as np
import sympy
from sympy import QQ_I
from sympy.polys.matrices import DomainMatrix

from app.exceptions import InvalidInputError, IrrationalSymbolError, UncertifiableWindowError
from app.sections.schema import Expr, FiniteSection, OperatorRule, Product, Scaled, Sum
from app.sections.service import describe, kmax, push_adjoint
from app.series.schema import (
    CesaroSymbol,
    ExplicitSymbol,
    LinearCombinationSymbol,
    MonomialSymbol,
    RotatedCesaroSymbol,
    SymbolSpec,
    TrigPolynomialSymbol,
)
from app.series.service import exact_coeffs_of, to_exact

logger = logging.getLogger(__name__)


class RationalOracle:
    """Exact sections over the Gaussian rationals QQ_I.

    Every rule in the expression needs an ``exact_entry`` with rational
    (or rational times i) values; anything else raises IrrationalSymbolError
    and the caller stays on the float path.
    """

    domain = QQ_I

    def rule_matrix(self, rule: OperatorRule, rows: int, cols: int) -> DomainMatrix:
        if rule.exact_entry is None:
            raise IrrationalSymbolError(f"[{rule.description}] has no exact entry rule")
        dod: dict[int, dict[int, object]] = {}
        for m in range(rows):
            # skip entries the bandwidth metadata proves to be zero
            first, last = 0, cols - 1
            if rule.upper_bandwidth is not None:
                last = min(last, m + rule.upper_bandwidth)
            if rule.col_support is not None:
                last = min(last, rule.col_support)
            if rule.lower_bandwidth is not None:
                first = max(first, m - rule.lower_bandwidth)
            if rule.row_support is not None and m > rule.row_support:
                continue
            row = {}
            for l in range(first, last + 1):
                value = sympy.expand(rule.exact_entry(m, l))
                if value != 0:
                    row[l] = self.domain.from_sympy(value)
            if row:
                dod[m] = row
        return DomainMatrix.from_dod(dod, (rows, cols), self.domain)

    def evaluate(self, expr: Expr, rows: int, cols: int) -> DomainMatrix:
        """exact rows x cols section; inner sums must be fully bounded"""
        if rows < 1 or cols < 1:
            raise InvalidInputError(f"oracle window must be at least 1x1, got {rows}x{cols}")
        expr = push_adjoint(expr)
        if isinstance(expr, OperatorRule):
            return self.rule_matrix(expr, rows, cols)
        if isinstance(expr, FiniteSection):
            raise IrrationalSymbolError("float sections cannot enter the rational oracle")
        if isinstance(expr, Sum):
            total = self.evaluate(expr.terms[0], rows, cols)
            for term in expr.terms[1:]:
                total = total + self.evaluate(term, rows, cols)
            return total
        if isinstance(expr, Scaled):
            factor = self.domain.from_sympy(sympy.expand(to_exact(expr.factor)))
            return self.evaluate(expr.expr, rows, cols).mul(factor)
        if isinstance(expr, Product):
            return self._product(list(expr.factors), rows, cols)
        raise InvalidInputError(f"unknown expression node {type(expr).__name__}")

    def _product(self, factors: list[Expr], rows: int, cols: int) -> DomainMatrix:
        if len(factors) == 1:
            return self.evaluate(factors[0], rows, cols)
        last = kmax(factors[0], np.arange(rows))
        if last is None:
            raise UncertifiableWindowError(f"unbounded inner sum for [{describe(factors[0])}]")
        inner = max(int(last.max()) + 1, 1)
        left = self.evaluate(factors[0], rows, inner)
        right = self._product(factors[1:], inner, cols)
        return left * right

    def to_numpy(self, matrix: DomainMatrix) -> np.ndarray:
        return np.array(
            [[complex(self.domain.to_sympy(e)) for e in row] for row in matrix.to_list()],
            dtype=complex,
        ).reshape(matrix.shape)


def symbol_expression(symbol: SymbolSpec, z: sympy.Symbol) -> sympy.Expr:
    """closed form of an exactly representable symbol"""
    if isinstance(symbol, MonomialSymbol):
        return z**symbol.n
    if isinstance(symbol, CesaroSymbol):
        return -sympy.log(1 - z)
    if isinstance(symbol, RotatedCesaroSymbol):
        alpha = to_exact(symbol.alpha)
        return -sympy.log(1 - z / alpha)
    if isinstance(symbol, (ExplicitSymbol, TrigPolynomialSymbol)):
        coeffs = exact_coeffs_of(symbol, 64)
        return sum((c * z**k for k, c in enumerate(coeffs)), sympy.Integer(0))
    if isinstance(symbol, LinearCombinationSymbol):
        return sum(
            (to_exact(t.weight) * symbol_expression(t.symbol, z) for t in symbol.terms),
            sympy.Integer(0),
        )
    raise IrrationalSymbolError(f"no exact closed form for {symbol!r}")


def _taylor(expr: sympy.Expr, z: sympy.Symbol, rows: int) -> list[sympy.Expr]:
    series = sympy.series(expr, z, 0, rows).removeO()
    poly = sympy.Poly(sympy.expand(series), z)
    return [sympy.expand(poly.coeff_monomial(z**m)) for m in range(rows)]


def integral_matrix(symbol: SymbolSpec, kind: str, rows: int, cols: int) -> sympy.Matrix:
    """V_g or S_g section from the integral definitions, column by column"""
    z, u = sympy.symbols("z u")
    g = symbol_expression(symbol, u)
    columns = []
    for l in range(cols):
        if kind == "volterra":
            integrand = u**l * sympy.diff(g, u)
        elif kind == "sg":
            integrand = sympy.diff(u**l, u) * g
        else:
            raise InvalidInputError(f"unknown integral operator '{kind}'")
        if integrand == 0:
            columns.append([sympy.Integer(0)] * rows)
            continue
        antiderivative = sympy.integrate(sympy.series(integrand, u, 0, rows).removeO(), (u, 0, z))
        columns.append(_taylor(antiderivative, z, rows))
    logger.debug(f"symbolic {kind} section {rows}x{cols}")
    return sympy.Matrix(rows, cols, lambda m, l: columns[l][m])


def integrated_sat_coefficient(l: int, n: int) -> sympy.Rational:
    """coefficient of z^l in f - S*^n V_{z^n} f for f = z^l, by integration"""
    z, u = sympy.symbols("z u")
    image = sympy.integrate(u**l * sympy.diff(u**n, u), (u, 0, z))
    shifted = sympy.expand(image / z**n)
    return sympy.Integer(1) - sympy.Poly(shifted, z).coeff_monomial(z**l)
