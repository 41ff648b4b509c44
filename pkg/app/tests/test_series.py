import numpy as np
import pytest
import sympy
from pydantic import ValidationError

from app.exceptions import InvalidInputError, IrrationalSymbolError
from app.series.schema import (
    IN_BMOA_ONLY,
    IN_VMOA,
    BilateralCoeffs,
    CesaroSymbol,
    ExplicitSymbol,
    LogAlphaSymbol,
    MonomialSymbol,
    RotatedCesaroSymbol,
    TaylorCoeffs,
    TrigPolynomialSymbol,
)
from app.series.service import (
    REGISTRY,
    CoefficientStream,
    class_flags,
    coeffs_of,
    conjugate_reflect,
    convolve,
    exact_coeffs_of,
    has_exact_coeffs,
    hankel_defect_symbol,
    linear_combination,
    parse_symbol,
    reflect,
    to_exact,
)

cesaro = CesaroSymbol()


def test_cesaro_coefficients():
    coeffs = coeffs_of(cesaro, 5).coeffs
    assert coeffs[0] == 0
    assert np.allclose(coeffs[1:], [1, 1 / 2, 1 / 3, 1 / 4, 1 / 5])
    assert exact_coeffs_of(cesaro, 3) == [0, 1, sympy.Rational(1, 2), sympy.Rational(1, 3)]


def test_emission_is_prefix_stable():
    short = coeffs_of(REGISTRY["log_alpha_i"], 10).coeffs
    long = coeffs_of(REGISTRY["log_alpha_i"], 40).coeffs
    assert np.allclose(short, long[:11], rtol=0, atol=1e-15)


def test_log_alpha_constant_term():
    # -log(i) = -i pi/2 on the principal branch
    coeffs = coeffs_of(LogAlphaSymbol(alpha=1j), 3).coeffs
    assert abs(coeffs[0] - (-0.5j * np.pi)) < 1e-15
    # a_1 = 1/alpha = -i
    assert abs(coeffs[1] + 1j) < 1e-15


def test_log_alpha_rejects_cut_crossing():
    with pytest.raises(InvalidInputError):
        coeffs_of(LogAlphaSymbol(alpha=-1), 4)
    with pytest.raises(InvalidInputError):
        coeffs_of(LogAlphaSymbol(alpha=0.5), 4)


def test_rotated_cesaro_allows_every_unimodular_alpha():
    coeffs = exact_coeffs_of(RotatedCesaroSymbol(alpha=-1), 3)
    assert coeffs == [0, -1, sympy.Rational(1, 2), sympy.Rational(-1, 3)]
    assert has_exact_coeffs(RotatedCesaroSymbol(alpha=1j))


def test_log_alpha_i_is_irrational():
    assert not has_exact_coeffs(REGISTRY["log_alpha_i"])
    with pytest.raises(IrrationalSymbolError):
        exact_coeffs_of(REGISTRY["log_alpha_i"], 2)


def test_to_exact():
    assert to_exact("1/3") == sympy.Rational(1, 3)
    assert to_exact(0.5) == sympy.Rational(1, 2)
    assert to_exact("1/2 + I") == sympy.Rational(1, 2) + sympy.I
    with pytest.raises(IrrationalSymbolError):
        to_exact("sqrt(2)")


def test_parse_symbol_discriminates_on_kind():
    symbol = parse_symbol({"kind": "explicit", "coeffs": ["1", "1/2"]})
    assert isinstance(symbol, ExplicitSymbol)
    assert isinstance(parse_symbol({"kind": "monomial", "n": 3}), MonomialSymbol)
    with pytest.raises(ValidationError):
        parse_symbol({"kind": "bessel"})
    with pytest.raises(ValidationError):
        parse_symbol({"kind": "monomial", "n": -1})


def test_linear_combination():
    g = linear_combination((2, MonomialSymbol(n=1)), ("1/2", cesaro))
    assert exact_coeffs_of(g, 2) == [0, sympy.Rational(5, 2), sympy.Rational(1, 4)]
    assert class_flags(g) == frozenset({IN_BMOA_ONLY})


def test_trig_polynomial_keeps_analytic_part():
    g = TrigPolynomialSymbol(coeffs=BilateralCoeffs(coeffs={-1: 5, 0: 1, 2: "1/3"}))
    assert exact_coeffs_of(g, 3) == [1, 0, sympy.Rational(1, 3), 0]


def test_taylor_restrict():
    t = TaylorCoeffs(coeffs=[1, 2, 3])
    assert t.restrict(1).coeffs == [1, 2]
    with pytest.raises(ValueError):
        t.restrict(5)


def test_bilateral_helpers():
    b = BilateralCoeffs(coeffs={-2: 1, 1: "1/2 + I"})
    assert b.band == 2 and b.negative_band == 2 and b.positive_band == 1
    assert reflect(b).coeffs == {2: 1, -1: "1/2 + I"}
    assert sympy.sympify(conjugate_reflect(b).coeffs[-1]) == sympy.Rational(1, 2) - sympy.I


def test_convolve_is_exact_for_rationals():
    b = BilateralCoeffs(coeffs={-1: 1, 0: 1})
    q = BilateralCoeffs(coeffs={1: "1/2"})
    assert {k: sympy.sympify(v) for k, v in convolve(b, q).coeffs.items()} == {
        0: sympy.Rational(1, 2),
        1: sympy.Rational(1, 2),
    }


def test_hankel_defect_symbol_of_cesaro():
    # h' = (1 - z^2) / (1 - z) = 1 + z
    h = hankel_defect_symbol(cesaro, 6)
    assert [sympy.sympify(c) for c in h.coeffs] == [0, 1, sympy.Rational(1, 2), 0, 0, 0, 0]


def test_class_flags():
    assert IN_VMOA in class_flags(REGISTRY["one_plus_half_z"])
    assert class_flags(cesaro) == frozenset({IN_BMOA_ONLY})


def test_coefficient_stream_grows_and_is_read_only():
    stream = CoefficientStream(cesaro)
    first = stream.take(4)
    assert len(first) >= 4
    longer = stream.take(100)
    assert len(longer) >= 100
    assert np.array_equal(first[:4], longer[:4])
    with pytest.raises(ValueError):
        longer[0] = 1
    assert stream.exact(3)[2] == sympy.Rational(1, 2)


def test_reflections_are_involutions():
    b = BilateralCoeffs(coeffs={-2: 1, 0: "3/4", 1: "1/2 + I", 3: 2j})
    assert reflect(reflect(b)) == b
    twice = conjugate_reflect(conjugate_reflect(b)).coeffs
    assert set(twice) == set(b.coeffs)
    assert all(sympy.sympify(twice[k]) == sympy.sympify(v) for k, v in b.coeffs.items())


def test_linear_combination_is_linear():
    order = 24
    weight = 0.25 - 1.5j
    g = linear_combination((weight, REGISTRY["log_alpha_i"]), (3, cesaro))
    expected = weight * np.asarray(coeffs_of(REGISTRY["log_alpha_i"], order).coeffs) + 3 * np.asarray(
        coeffs_of(cesaro, order).coeffs
    )
    assert np.allclose(coeffs_of(g, order).coeffs, expected, rtol=1e-13, atol=1e-15)
    rational = [REGISTRY[name] for name in ("z", "z2", "cesaro", "one_plus_half_z")]
    for u, v in zip(rational, rational[1:]):
        total = exact_coeffs_of(linear_combination(("2/3", u), (-1, v)), order)
        parts = zip(exact_coeffs_of(u, order), exact_coeffs_of(v, order))
        assert total == [sympy.Rational(2, 3) * x - y for x, y in parts]
