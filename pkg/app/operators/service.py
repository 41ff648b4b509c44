import logging
from typing import Any, Union

import numpy as np
import scipy.linalg
import sympy
from pydantic import ValidationError

from app.exceptions import InvalidInputError
from app.operators.schema import Atom, OperatorCatalogEntry, OperatorDescriptor
from app.sections.schema import Adjoint, Expr, FiniteSection, OperatorRule, Product, Scaled, Sum
from app.series.schema import BilateralCoeffs, SymbolSpec
from app.series.service import (
    REGISTRY,
    CoefficientStream,
    describe_symbol,
    to_complex,
    to_exact,
)

logger = logging.getLogger(__name__)

ZERO = sympy.Integer(0)
ONE = sympy.Integer(1)


def _check_n(n: int) -> None:
    if n < 0:
        raise InvalidInputError(f"n must be >= 0, got {n}")


def _indicator(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask, dtype=complex)


# elementary operators

def identity() -> OperatorRule:
    return OperatorRule(
        entry=lambda m, l: _indicator(m == l),
        exact_entry=lambda m, l: ONE if m == l else ZERO,
        upper_bandwidth=0,
        lower_bandwidth=0,
        description="I",
    )


def shift_pow(n: int = 1) -> OperatorRule:
    """S^n: e_l -> e_{l+n}"""
    _check_n(n)
    return OperatorRule(
        entry=lambda m, l: _indicator(m == l + n),
        exact_entry=lambda m, l: ONE if m == l + n else ZERO,
        upper_bandwidth=-n,
        lower_bandwidth=n,
        description="S" if n == 1 else f"S^{n}",
    )


def backshift_pow(n: int = 1) -> OperatorRule:
    """S*^n: e_{l+n} -> e_l, e_l -> 0 for l < n"""
    _check_n(n)
    return OperatorRule(
        entry=lambda m, l: _indicator(l == m + n),
        exact_entry=lambda m, l: ONE if l == m + n else ZERO,
        upper_bandwidth=n,
        lower_bandwidth=-n,
        description="S*" if n == 1 else f"S*^{n}",
    )


def projection(n: int) -> OperatorRule:
    """P_n onto span(e_0..e_n)"""
    _check_n(n)
    return OperatorRule(
        entry=lambda m, l: _indicator((m == l) & (l <= n)),
        exact_entry=lambda m, l: ONE if m == l <= n else ZERO,
        upper_bandwidth=0,
        lower_bandwidth=0,
        col_support=n,
        row_support=n,
        description=f"P_{n}",
    )


def flip(n: int) -> OperatorRule:
    """J_n e_i = e_{n-i} for i <= n, zero on the rest"""
    _check_n(n)
    return OperatorRule(
        entry=lambda m, l: _indicator((m + l == n) & (l <= n)),
        exact_entry=lambda m, l: ONE if m + l == n else ZERO,
        upper_bandwidth=n,
        lower_bandwidth=n,
        col_support=n,
        row_support=n,
        description=f"J_{n}",
    )


def delta0() -> OperatorRule:
    """f -> f(0)"""
    return OperatorRule(
        entry=lambda m, l: _indicator((m == 0) & (l == 0)),
        exact_entry=lambda m, l: ONE if m == 0 and l == 0 else ZERO,
        upper_bandwidth=0,
        lower_bandwidth=0,
        col_support=0,
        row_support=0,
        description="delta0",
    )


# symbol-driven operators

def _coefficients(stream: CoefficientStream, d: np.ndarray) -> np.ndarray:
    """g_d for every d >= 0 in the array, 0 elsewhere"""
    d = np.asarray(d)
    top = max(int(d.max(initial=0)), 0)
    table = stream.take(top + 1)
    return np.where(d >= 0, table[np.clip(d, 0, top)], 0)


def volterra(g: SymbolSpec) -> OperatorRule:
    """V_g f = int_0^z f g': entry(m, l) = ((m - l)/m) g_{m-l} for m > l"""
    stream = CoefficientStream(g)

    def entry(m: np.ndarray, l: np.ndarray) -> np.ndarray:
        m, l = np.broadcast_arrays(m, l)
        d = m - l
        weight = np.where(d > 0, d / np.maximum(m, 1), 0.0)
        return weight * _coefficients(stream, d)

    def exact_entry(m: int, l: int):
        if m <= l:
            return ZERO
        return sympy.Rational(m - l, m) * stream.exact(m - l + 1)[m - l]

    return OperatorRule(
        entry=entry,
        exact_entry=exact_entry,
        upper_bandwidth=-1,
        description=f"V_g, g = {describe_symbol(g)}",
    )


def sg(g: SymbolSpec) -> OperatorRule:
    """S_g f = int_0^z f' g: entry(m, l) = (l/m) g_{m-l} for m >= l >= 1"""
    stream = CoefficientStream(g)

    def entry(m: np.ndarray, l: np.ndarray) -> np.ndarray:
        m, l = np.broadcast_arrays(m, l)
        d = m - l
        weight = np.where((d >= 0) & (l >= 1), l / np.maximum(m, 1), 0.0)
        return weight * _coefficients(stream, d)

    def exact_entry(m: int, l: int):
        if l < 1 or m < l:
            return ZERO
        return sympy.Rational(l, m) * stream.exact(m - l + 1)[m - l]

    return OperatorRule(
        entry=entry,
        exact_entry=exact_entry,
        upper_bandwidth=0,
        description=f"S_g, g = {describe_symbol(g)}",
    )


def mult(g: SymbolSpec) -> OperatorRule:
    """M_g: lower triangular Toeplitz, entry(m, l) = g_{m-l}"""
    stream = CoefficientStream(g)

    def entry(m: np.ndarray, l: np.ndarray) -> np.ndarray:
        m, l = np.broadcast_arrays(m, l)
        return _coefficients(stream, m - l).astype(complex)

    def exact_entry(m: int, l: int):
        if m < l:
            return ZERO
        return stream.exact(m - l + 1)[m - l]

    return OperatorRule(
        entry=entry,
        exact_entry=exact_entry,
        upper_bandwidth=0,
        description=f"M_g, g = {describe_symbol(g)}",
    )


def _bilateral_table(b: BilateralCoeffs) -> tuple[np.ndarray, int]:
    band = b.band
    table = np.zeros(2 * band + 1, dtype=complex)
    for k, value in b.coeffs.items():
        table[k + band] = to_complex(value)
    return table, band


def toeplitz(b: BilateralCoeffs) -> OperatorRule:
    """T_b: entry(m, l) = b(m - l)"""
    table, band = _bilateral_table(b)
    support = [k for k, v in b.coeffs.items() if to_complex(v) != 0]

    def entry(m: np.ndarray, l: np.ndarray) -> np.ndarray:
        d = np.asarray(m - l)
        inside = np.abs(d) <= band
        return np.where(inside, table[np.clip(d + band, 0, 2 * band)], 0)

    def exact_entry(m: int, l: int):
        value = b.coeffs.get(m - l)
        return ZERO if value is None else to_exact(value)

    return OperatorRule(
        entry=entry,
        exact_entry=exact_entry,
        upper_bandwidth=-min(support) if support else 0,
        lower_bandwidth=max(support) if support else 0,
        description=f"T_b, b = {dict(sorted(b.coeffs.items()))}",
    )


def hankel(b: BilateralCoeffs) -> OperatorRule:
    """H_b: entry(m, l) = b(-(m + l + 1)), nonzero only for m + l + 1 <= negative band"""
    table, band = _bilateral_table(b)
    reach = b.negative_band - 1

    def entry(m: np.ndarray, l: np.ndarray) -> np.ndarray:
        k = -(np.asarray(m + l) + 1)
        inside = k >= -band
        return np.where(inside, table[np.clip(k + band, 0, 2 * band)], 0)

    def exact_entry(m: int, l: int):
        value = b.coeffs.get(-(m + l + 1))
        return ZERO if value is None else to_exact(value)

    return OperatorRule(
        entry=entry,
        exact_entry=exact_entry,
        upper_bandwidth=reach,
        lower_bandwidth=reach,
        col_support=reach,
        row_support=reach,
        description=f"H_b, b = {dict(sorted(b.coeffs.items()))}",
    )


def moment_hankel(measure: Union[str, list[Atom]] = "lebesgue") -> OperatorRule:
    """H_mu: entry(m, l) = mu_{m+l}, the moments of a measure on [0, 1)"""
    if measure == "lebesgue":
        return OperatorRule(
            entry=lambda m, l: 1.0 / (np.asarray(m + l) + 1.0) + 0j,
            exact_entry=lambda m, l: sympy.Rational(1, m + l + 1),
            description="Hilbert matrix",
        )

    if isinstance(measure, str) or not measure:
        raise InvalidInputError("measure must be 'lebesgue' or a non-empty list of atoms")
    points, weights = [], []
    for atom in measure:
        t, w = to_complex(atom.t), to_complex(atom.w)
        if t.imag != 0 or not 0 <= t.real < 1:
            raise InvalidInputError(f"atom t={atom.t} is not in [0, 1)")
        if w.imag != 0 or w.real <= 0:
            raise InvalidInputError(f"atom weight w={atom.w} is not positive")
        points.append(t.real)
        weights.append(w.real)
    points_arr, weights_arr = np.array(points), np.array(weights)

    def entry(m: np.ndarray, l: np.ndarray) -> np.ndarray:
        moments = np.power.outer(points_arr, np.asarray(m + l))
        return np.tensordot(weights_arr, moments, axes=1) + 0j

    def exact_entry(m: int, l: int):
        return sum((to_exact(a.w) * to_exact(a.t) ** (m + l) for a in measure), ZERO)

    return OperatorRule(
        entry=entry,
        exact_entry=exact_entry,
        description=f"H_mu, atoms = {[(a.t, a.w) for a in measure]}",
    )


# descriptors and expressions

def build_rule(descriptor: OperatorDescriptor) -> OperatorRule:
    op = descriptor.op
    if op in ("volterra", "sg", "mult") and descriptor.symbol is None:
        raise InvalidInputError(f"operator '{op}' needs a symbol")
    if op in ("toeplitz", "hankel") and descriptor.b is None:
        raise InvalidInputError(f"operator '{op}' needs bilateral coefficients 'b'")

    if op == "identity":
        return identity()
    if op == "shift":
        return shift_pow(descriptor.n)
    if op == "backshift":
        return backshift_pow(descriptor.n)
    if op == "projection":
        return projection(descriptor.n)
    if op == "flip":
        return flip(descriptor.n)
    if op == "delta0":
        return delta0()
    if op == "volterra":
        return volterra(descriptor.symbol)
    if op == "sg":
        return sg(descriptor.symbol)
    if op == "mult":
        return mult(descriptor.symbol)
    if op == "toeplitz":
        return toeplitz(BilateralCoeffs(coeffs=descriptor.b))
    if op == "hankel":
        return hankel(BilateralCoeffs(coeffs=descriptor.b))
    return moment_hankel(descriptor.measure)


def parse_expression(data: Any) -> Expr:
    """JSON operator expression -> expression tree"""
    if not isinstance(data, dict):
        raise InvalidInputError(f"operator expression must be a JSON object, got {type(data).__name__}")

    if "compose" in data:
        factors = data["compose"]
        if not isinstance(factors, list) or not factors:
            raise InvalidInputError("'compose' needs a non-empty list")
        return Product(factors=[parse_expression(f) for f in factors], cutoff=data.get("cutoff"))
    if "add" in data:
        terms = data["add"]
        if not isinstance(terms, list) or not terms:
            raise InvalidInputError("'add' needs a non-empty list")
        return Sum(terms=[parse_expression(t) for t in terms])
    if "scale" in data:
        pair = data["scale"]
        if not isinstance(pair, list) or len(pair) != 2:
            raise InvalidInputError("'scale' needs [factor, expression]")
        return Scaled(factor=pair[0], expr=parse_expression(pair[1]))
    if "adjoint" in data:
        return Adjoint(expr=parse_expression(data["adjoint"]))
    if "op" in data:
        try:
            descriptor = OperatorDescriptor.model_validate(data)
        except ValidationError as exc:
            raise InvalidInputError("invalid operator descriptor", details=exc.errors()) from exc
        return build_rule(descriptor)
    raise InvalidInputError(f"unrecognized operator expression keys {sorted(data)}")


# catalog

def catalog() -> list[OperatorCatalogEntry]:
    """the built-in operators with a representative symbol each"""
    cesaro = REGISTRY["cesaro"]
    b = BilateralCoeffs(coeffs={-2: "1/3", -1: 1, 0: 2, 1: "1/2"})
    return [
        OperatorCatalogEntry(name="identity", rule=identity(), provenance="I e_l = e_l", structure="diagonal"),
        OperatorCatalogEntry(name="shift", rule=shift_pow(1), provenance="Sf(z) = z f(z)", structure="strictly_lower"),
        OperatorCatalogEntry(name="backshift", rule=backshift_pow(1), provenance="S*f(z) = (f(z) - f(0))/z", structure="upper"),
        OperatorCatalogEntry(name="projection", rule=projection(4), provenance="P_n f = sum_{k<=n} a_k z^k", structure="diagonal"),
        OperatorCatalogEntry(name="flip", rule=flip(4), provenance="J_n e_i = e_{n-i}", structure="finite_rank"),
        OperatorCatalogEntry(name="delta0", rule=delta0(), provenance="delta0 f = f(0)", structure="finite_rank"),
        OperatorCatalogEntry(
            name="volterra", rule=volterra(cesaro), provenance="V_g f(z) = int_0^z f(u) g'(u) du",
            structure="strictly_lower", symbol_dependencies=[cesaro],
        ),
        OperatorCatalogEntry(
            name="sg", rule=sg(cesaro), provenance="S_g f(z) = int_0^z f'(u) g(u) du",
            structure="lower", symbol_dependencies=[cesaro],
        ),
        OperatorCatalogEntry(
            name="mult", rule=mult(cesaro), provenance="M_g = S_g + V_g + g(0) delta0",
            structure="lower", symbol_dependencies=[cesaro],
        ),
        OperatorCatalogEntry(name="toeplitz", rule=toeplitz(b), provenance="T_b = P_+ M_b", structure="toeplitz"),
        OperatorCatalogEntry(name="hankel", rule=hankel(b), provenance="H_b = P_- M_b", structure="hankel"),
        OperatorCatalogEntry(
            name="moment_hankel", rule=moment_hankel("lebesgue"),
            provenance="H_mu f(z) = int_0^1 f(t)/(1 - tz) dmu(t)", structure="hankel",
        ),
    ]


def is_positive_section(section: FiniteSection, tol: float = 1e-12) -> bool:
    """Hermitian and positive semidefinite up to tol relative to the spectral radius"""
    if section.rows != section.cols:
        return False
    matrix = np.asarray(section.entries)
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    if not np.allclose(matrix, matrix.conj().T, atol=tol * scale, rtol=0.0):
        return False
    eigenvalues = scipy.linalg.eigvalsh(matrix)
    return bool(eigenvalues.min() >= -tol * max(1.0, float(np.abs(eigenvalues).max())))
