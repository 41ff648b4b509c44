import numpy as np
import pytest
import sympy

from app.exceptions import ShapeMismatchError, UncertifiableWindowError
from app.operators.service import (
    backshift_pow,
    hankel,
    identity,
    moment_hankel,
    mult,
    sg,
    shift_pow,
    toeplitz,
    volterra,
)
from app.sections.schema import Adjoint, FiniteSection, Product, Scaled, Sum
from app.sections.service import (
    add,
    adjoint_rule,
    apply,
    bandwidths,
    columns_from,
    compose,
    evaluate,
    kmax,
    materialize,
    op_norm,
    singular_values,
    summarize,
    write_csv,
)
from app.series.schema import BilateralCoeffs, CesaroSymbol, MonomialSymbol
from app.series.service import conjugate_reflect

Vg = volterra(CesaroSymbol())
b = BilateralCoeffs(coeffs={-1: 2, 0: 1, 2: "1/2"})


def test_materialize_shift():
    section = materialize(shift_pow(1), 4, 4)
    assert np.array_equal(section.entries, np.eye(4, k=-1))
    assert section.fully_exact


def test_sections_are_read_only():
    section = materialize(identity(), 3, 3)
    with pytest.raises(ValueError):
        section.entries[0, 0] = 2
    with pytest.raises(ValueError):
        FiniteSection(entries=np.zeros((2, 2)), exact=np.ones((3, 3), dtype=bool))


def test_kmax_follows_bandwidths():
    m = np.arange(4)
    assert np.array_equal(kmax(backshift_pow(2), m), m + 2)
    assert np.array_equal(kmax(Vg, m), m - 1)
    assert kmax(moment_hankel(), m) is None


def test_banded_products_are_fully_certified():
    section = evaluate(Product(factors=[backshift_pow(1), Vg, shift_pow(1)]), 16, 16)
    assert section.fully_exact
    # S* V_g S (m, l) = V_g(m + 1, l + 1) = 1/(m + 1) below the diagonal
    assert abs(section.entries[3, 1] - 1 / 4) < 1e-15


def test_commutator_identity_on_the_float_path():
    # S^n V_g - V_g S^n = V_{z^n} V_g
    n = 3
    lhs = Sum(terms=[
        Product(factors=[shift_pow(n), Vg]),
        Scaled(factor=-1, expr=Product(factors=[Vg, shift_pow(n)])),
    ])
    rhs = Product(factors=[volterra(MonomialSymbol(n=n)), Vg])
    left, right = evaluate(lhs, 32, 32), evaluate(rhs, 32, 32)
    assert left.fully_exact and right.fully_exact
    assert np.abs(left.entries - right.entries).max() < 1e-14


def test_unbounded_inner_sum_needs_a_cutoff():
    with pytest.raises(UncertifiableWindowError):
        compose(moment_hankel(), identity(), rows=8, cols=8)
    section = compose(moment_hankel(), identity(), rows=8, cols=8, cutoff=16)
    assert not section.exact.any()
    assert abs(section.entries[0, 0] - 1.0) < 1e-15


def test_adjoint_is_pushed_to_the_leaves():
    product = Product(factors=[toeplitz(b), shift_pow(1)])
    direct = evaluate(product, 8, 8)
    adjoint = evaluate(Adjoint(expr=product), 8, 8)
    assert adjoint.fully_exact
    assert np.allclose(adjoint.entries, direct.entries.conj().T, atol=1e-15)


def test_sum_of_differently_shaped_sections():
    with pytest.raises(ShapeMismatchError):
        add(materialize(identity(), 3, 3), materialize(identity(), 4, 4))


def test_a_section_can_enter_an_expression():
    section = materialize(mult(MonomialSymbol(n=1)), 10, 10)
    assert np.array_equal(evaluate(section, 4, 4).entries, np.eye(4, k=-1))
    with pytest.raises(ShapeMismatchError):
        evaluate(section, 12, 12)


def test_norms():
    assert abs(op_norm(materialize(shift_pow(1), 16, 16)) - 1.0) < 1e-12
    # above the dense limit the norm comes from power iteration
    assert abs(op_norm(materialize(identity(), 600, 600)) - 1.0) < 1e-9
    sigma = singular_values(materialize(identity(), 5, 5))
    assert np.allclose(sigma, 1.0)
    assert op_norm(materialize(toeplitz(BilateralCoeffs()), 4, 4)) == 0.0


def test_columns_from_and_apply():
    section = materialize(identity(), 6, 6)
    tail = columns_from(section, 3)
    assert np.array_equal(apply(tail, [1, 1, 1, 1]), [0, 0, 0, 1, 0, 0])
    with pytest.raises(ShapeMismatchError):
        apply(section, np.ones(7))


def test_summarize_and_csv(tmp_path):
    section = materialize(shift_pow(1), 3, 3)
    summary = summarize(section)
    assert summary.rows == 3 and summary.fully_exact and summary.uncertified == 0
    path = write_csv(section, tmp_path / "shift.csv")
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert table.shape == (9, 4)
    # row m=1, l=0 carries the single nonzero of the first column
    assert table[3].tolist() == [1.0, 0.0, 1.0, 0.0]


BANDED = [shift_pow(1), backshift_pow(2), Vg, sg(CesaroSymbol()), toeplitz(b), hankel(b)]


@pytest.mark.parametrize("seed", range(8))
def test_product_bandwidths_bound_the_nonzero_pattern(seed):
    rng = np.random.default_rng(seed)
    factors = [BANDED[i] for i in rng.integers(len(BANDED), size=rng.integers(2, 5))]
    product = Product(factors=factors)
    upper, support = bandwidths(product)
    entries = evaluate(product, 24, 24).entries
    assert not np.triu(entries, upper + 1).any()
    if support is not None:
        assert not entries[:, support + 1:].any()


@pytest.mark.parametrize(
    "left, right",
    [(Vg, toeplitz(b)), (backshift_pow(2), Vg), (toeplitz(b), sg(CesaroSymbol())), (hankel(b), shift_pow(1))],
)
def test_certified_entries_match_a_wide_inner_sum(left, right):
    M = 20
    section = evaluate(Product(factors=[left, right]), M, M)
    wide = materialize(left, M, 4 * M).entries @ materialize(right, 4 * M, M).entries
    assert section.exact.any()
    assert np.allclose(section.entries[section.exact], wide[section.exact], atol=1e-13)


@pytest.mark.parametrize("n", [64, 120])
def test_op_norm_is_submultiplicative(n):
    for left, right in [(Vg, toeplitz(b)), (sg(CesaroSymbol()), Vg), (toeplitz(b), backshift_pow(2))]:
        product = evaluate(Product(factors=[left, right]), n, n)
        bound = op_norm(materialize(left, n, 4 * n)) * op_norm(materialize(right, 4 * n, n))
        assert op_norm(product) <= bound * (1 + 1e-12)


def test_toeplitz_adjoint_has_the_conjugate_reflected_symbol():
    c = BilateralCoeffs(coeffs={-1: "2 + I", 0: 1, 2: "I/2"})
    direct = adjoint_rule(toeplitz(c))
    reflected = toeplitz(conjugate_reflect(c))
    assert np.allclose(materialize(direct, 10, 10).entries, materialize(reflected, 10, 10).entries, atol=0)
    for m, l in [(0, 1), (1, 0), (0, 2), (3, 1), (4, 4)]:
        assert sympy.simplify(direct.exact_entry(m, l) - reflected.exact_entry(m, l)) == 0
