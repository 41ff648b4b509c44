import numpy as np
import pytest

from app.essential.schema import DefectKind, ProbeSettings
from app.essential.service import EssentialService, aitken_limit, defect_expression, geometric_cut_grid
from app.exceptions import InvalidInputError, UncertifiableWindowError
from app.harness.constants import (
    CESARO_HANKEL_DEFECT_RATE,
    CESARO_HANKEL_DEFECT_TAILS,
    CESARO_TAIL_AT_128,
    LOG_ALPHA_I_HANKEL_TAIL_AT_128,
    matches_recorded,
)
from app.operators.service import moment_hankel, sg, shift_pow, volterra
from app.sections.service import evaluate
from app.series.schema import CesaroSymbol, ExplicitSymbol, MonomialSymbol, RotatedCesaroSymbol
from app.series.service import REGISTRY

cesaro = CesaroSymbol()
one_plus_half_z = ExplicitSymbol(coeffs=["1", "1/2"])

service = EssentialService()


def test_geometric_cut_grid():
    assert geometric_cut_grid(512) == [8, 16, 32, 64, 128]


def test_aitken_limit_of_a_geometric_sequence():
    limit, quality = aitken_limit([1.5, 1.25, 1.125, 1.0625])
    assert abs(limit - 1.0) < 1e-12
    assert quality == 1.0


def test_defect_of_the_shift_vanishes():
    for kind in (DefectKind.left_commutator, DefectKind.toeplitz_defect):
        section = service.defect(shift_pow(1), kind, 16)
        assert section.fully_exact
        assert not section.entries.any()


def test_hankel_defect_of_volterra():
    # V_g - S V_g S = V_h - V_z V_g S with h = z + z^2/2 for the Cesaro symbol
    section = service.defect(volterra(cesaro), DefectKind.hankel_defect, 12)
    assert abs(section.entries[1, 0] - 1.0) < 1e-15
    assert abs(section.entries[2, 0] - 0.5) < 1e-15


def test_defect_needs_a_certified_window():
    with pytest.raises(UncertifiableWindowError):
        service.defect(moment_hankel(), DefectKind.left_commutator, 8)


def test_volterra_of_z_is_compact_like():
    estimate = service.compactness_probe(volterra(MonomialSymbol(n=1)))
    # ||V_z (I - P_{n-1})|| = 1/(n + 1)
    assert np.allclose(estimate.tail_norms, [1 / (n + 1) for n in estimate.cut_grid], rtol=1e-9)
    assert estimate.verdict == "compact_like"


def test_cesaro_volterra_is_not_compact():
    estimate = service.compactness_probe(volterra(cesaro))
    assert estimate.cut_grid[-1] == 128
    assert matches_recorded(estimate.tail_norms[-1], CESARO_TAIL_AT_128)
    assert estimate.verdict == "noncompact_like"


def test_window_must_hold_the_cut_grid():
    with pytest.raises(InvalidInputError):
        service.compactness_probe(volterra(cesaro), window=64, cut_grid=[8, 32])


def test_hankel_defect_of_cesaro_volterra_is_compact_like():
    estimate = service.estimate_defect(volterra(cesaro), DefectKind.hankel_defect)
    assert estimate.cut_grid == [8, 16, 32, 64, 128]
    # the tails decay like 1/n and stay above the 1e-3 tolerance at n = 128
    for tail, recorded in zip(estimate.tail_norms, CESARO_HANKEL_DEFECT_TAILS):
        assert matches_recorded(tail, recorded)
    assert estimate.tail_norms[-1] > service.settings.tol
    assert abs(estimate.tail_rate - CESARO_HANKEL_DEFECT_RATE) < 0.01
    # the verdict rests on the rate, which clears the cutoff by about 0.1
    assert estimate.tail_rate <= -service.settings.compact_rate - 0.05
    assert estimate.verdict == "compact_like"


def test_hankel_defect_for_alpha_i_matches_the_recorded_tail():
    estimate = service.estimate_defect(volterra(REGISTRY["log_alpha_i"]), DefectKind.hankel_defect)
    assert matches_recorded(estimate.tail_norms[-1], LOG_ALPHA_I_HANKEL_TAIL_AT_128)
    assert estimate.verdict == "noncompact_like"


@pytest.mark.parametrize("name", sorted(REGISTRY))
@pytest.mark.parametrize("which", ["volterra", "sg"])
def test_left_commutator_is_compact_like_for_every_registry_symbol(name, which):
    g = REGISTRY[name]
    T = volterra(g) if which == "volterra" else sg(g)
    estimate = service.estimate_defect(T, DefectKind.left_commutator)
    assert estimate.verdict == "compact_like"
    assert estimate.tail_norms[-1] < service.settings.tol or estimate.tail_rate <= -0.8


def test_hankel_lower_bound_for_sg():
    bound = service.hankel_lower_bound(one_plus_half_z, window=64)
    assert bound.k0 == 0 and bound.bound == 1.0
    assert bound.min_norm >= bound.bound
    with pytest.raises(InvalidInputError):
        service.hankel_lower_bound(ExplicitSymbol(coeffs=[0]), window=64)


def test_lemma_equivalence_for_volterra_of_z():
    report = EssentialService(ProbeSettings(window=256)).lemma_equivalence(volterra(MonomialSymbol(n=1)))
    assert all(check.agree for check in report.checks)


def test_classify_polynomial_volterra_from_theorems():
    record = service.classify(MonomialSymbol(n=1), "volterra", check_theorems=False)
    assert record.uat.value is True and record.uat.provenance == "theorem"
    assert record.ess_hank.value is True
    assert record.sat.value and record.wat.value and record.uah.value and record.ess_toep.value


def test_classify_cesaro_volterra():
    record = service.classify(cesaro, "volterra")
    assert record.uat.value is False
    assert record.ess_hank.provenance == "numeric" and record.ess_hank.value is True
    assert not record.anomalies
    dumped = record.model_dump(by_alias=True)
    assert {"UAT", "SAT", "WAT", "UAH", "essToep", "essHank"} <= set(dumped)


def test_classify_sg_is_never_essentially_hankel():
    record = service.classify(one_plus_half_z, "sg", check_theorems=False)
    assert record.ess_hank.value is False
    assert record.uat.value is True
    assert "hankel_lower_bound" in record.probes


def test_rotated_cesaro_at_minus_one_is_essentially_hankel():
    record = service.classify(RotatedCesaroSymbol(alpha=-1), "volterra", check_theorems=False)
    assert record.ess_hank.value is True


def test_classify_rejects_unknown_operators():
    with pytest.raises(InvalidInputError):
        service.classify(cesaro, "toeplitz")


def test_product_structure_check_runs_every_product():
    report = EssentialService(ProbeSettings(window=128)).product_structure_check(
        MonomialSymbol(n=1), MonomialSymbol(n=2), one_plus_half_z
    )
    assert [check.label for check in report.checks] == ["V_g V_k", "V_k V_g", "V_g V_h"]
    assert all(check.estimate.verdict == "compact_like" for check in report.checks)


def test_product_structure_with_noncompact_factors():
    # V_g is not compact for g = -log(1-z), yet every product defect is
    report = service.product_structure_check(cesaro, cesaro, REGISTRY["log_alpha_i"])
    for check in report.checks:
        assert check.estimate.verdict == "compact_like", check.label
        assert check.estimate.tail_rate <= -0.9, check.label


def test_defect_expression_matches_its_definition():
    T = volterra(cesaro)
    direct = evaluate(defect_expression(T, DefectKind.toeplitz_defect), 10, 10)
    V = np.asarray(evaluate(T, 12, 12).entries)
    # S* T S - T reads T(m + 1, l + 1) - T(m, l)
    assert np.allclose(direct.entries, V[1:11, 1:11] - V[:10, :10], atol=1e-15)
