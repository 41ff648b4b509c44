import csv
import json

import pytest
import sympy

from app.exceptions import InvalidInputError, IrrationalSymbolError
from app.harness.constants import SCENARIO_MANIFEST, SUITE_MANIFEST
from app.harness.io import dumps, load_document, parse_n_grid, write_traces_csv
from app.harness.oracle import RationalOracle, integral_matrix, integrated_sat_coefficient
from app.harness.options import build_config
from app.harness.schema import RunConfig
from app.harness.service import HarnessService, section_report
from app.harness.suites import SUITES, check_identity, printed_sat_coefficient
from app.main import main
from app.operators.service import backshift_pow, identity, shift_pow, volterra
from app.sections.schema import Product
from app.series.schema import CesaroSymbol
from app.series.service import REGISTRY

cesaro = CesaroSymbol()
small = RunConfig(window=16, exact_window=8)


def test_registries_match_the_manifests():
    assert tuple(SUITES) == SUITE_MANIFEST
    assert len(SCENARIO_MANIFEST) == 6


def test_oracle_builds_exact_products():
    oracle = RationalOracle()
    section = oracle.evaluate(Product(factors=[backshift_pow(1), volterra(cesaro), shift_pow(1)]), 5, 5)
    matrix = section.to_Matrix()
    assert matrix[3, 1] == sympy.Rational(1, 4)
    assert matrix[1, 3] == 0


def test_oracle_rejects_irrational_symbols():
    with pytest.raises(IrrationalSymbolError):
        RationalOracle().evaluate(volterra(REGISTRY["log_alpha_i"]), 4, 4)


def test_integral_definitions_of_volterra():
    symbolic = integral_matrix(cesaro, "volterra", 4, 4)
    assert symbolic[3, 0] == sympy.Rational(1, 3)
    assert symbolic[2, 1] == sympy.Rational(1, 2)
    assert symbolic[1, 1] == 0


def test_sat_coefficient_by_integration():
    assert integrated_sat_coefficient(2, 3) == sympy.Rational(2, 5)
    # the (l+1)/(n+l+1) variant disagrees at l = 0
    assert printed_sat_coefficient(0, 3) != integrated_sat_coefficient(0, 3)


def test_check_identity_uses_both_paths():
    case = check_identity("S* S = I", {}, Product(factors=[backshift_pow(1), shift_pow(1)]), identity(), small)
    assert case.passed and case.exact_path_used and case.exact_residual_zero
    assert case.residual == 0.0


def test_check_identity_detects_a_false_identity():
    case = check_identity("S S* = I", {}, Product(factors=[shift_pow(1), backshift_pow(1)]), identity(), small)
    assert not case.passed
    assert case.exact_residual_zero is False


def test_forced_exact_mode_skips_irrational_cases():
    config = small.model_copy(update={"exact_mode": "force"})
    Vg = volterra(REGISTRY["log_alpha_i"])
    case = check_identity("V_g = V_g", {}, Vg, Vg, config)
    assert case.skipped and not case.passed


@pytest.mark.parametrize("name", SUITE_MANIFEST)
def test_suite_passes(name):
    result = HarnessService(small).run_suite(name)
    assert result.passed, [case.label for case in result.cases if not case.passed]
    assert result.cases


def test_toeplitz_product_suite_is_seeded():
    first = HarnessService(small).run_suite("toeplitz_product")
    second = HarnessService(small).run_suite("toeplitz_product")
    assert dumps(first) == dumps(second)


def test_unknown_suite():
    with pytest.raises(InvalidInputError):
        HarnessService(small).run_suite("no_such_suite")


@pytest.mark.parametrize("name", SCENARIO_MANIFEST)
def test_scenario_meets_its_expectations(name):
    report = HarnessService(RunConfig()).run_scenario(name)
    assert report.passed, report.expectations


def test_parse_n_grid():
    assert parse_n_grid("8:64:x2") == [8, 16, 32, 64]
    assert parse_n_grid("0:10:5") == [0, 5, 10]
    for bad in ("8:64", "a:b:c", "64:8:2", "0:8:x2", "1:8:0"):
        with pytest.raises(InvalidInputError):
            parse_n_grid(bad)


def test_load_document(tmp_path):
    assert load_document('{"op": "shift"}') == {"op": "shift"}
    path = tmp_path / "expr.json"
    path.write_text('{"op": "identity"}')
    assert load_document(f"@{path}") == {"op": "identity"}
    with pytest.raises(InvalidInputError):
        load_document("{not json")
    with pytest.raises(InvalidInputError):
        load_document(f"@{tmp_path / 'missing.json'}")


def test_build_config_flags_override_the_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"window": 32, "seed": 5}))
    config = build_config(str(path), window=8, n_grid="4:16:x2", seed=None, exact=False)
    assert config.window == 8 and config.seed == 5
    assert config.n_grid == [4, 8, 16]
    assert config.exact_mode == "off"
    assert build_config(None, seed=9).diagnostics.seed == 9


def test_section_report_adds_exact_entries():
    summary = section_report(volterra(cesaro), RunConfig(window=4, exact_window=8))
    assert summary.exact_entries[2][1] == "1/2"
    assert summary.oracle_gap < 1e-15


def test_traces_csv(tmp_path):
    report = HarnessService(RunConfig()).run_scenario("volterra-classical")
    path = write_traces_csv(report.convergence, tmp_path / "traces.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "kind,topology,n,distance"
    assert len(lines) == 1 + 3 * len(report.convergence[0].n_grid)


def test_cli_lists_scenarios(capsys):
    assert main(["scenario", "list"]) == 0
    assert capsys.readouterr().out.split() == list(SCENARIO_MANIFEST)


def test_cli_builds_a_section(capsys):
    assert main(["op", "build", '{"op": "shift"}', "--window", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rows"] == 3 and report["fully_exact"]
    assert report["exact_entries"][1][0] == "1"


def test_cli_verify_writes_the_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["verify", "hankel_step_zero", "--window", "16", "--out", str(out)]) == 0
    written = out.read_text()
    assert written == capsys.readouterr().out
    assert json.loads(written)["passed"] is True


def test_cli_reports_input_errors(capsys):
    assert main(["op", "build", '{"op": "volterra"}']) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "InvalidInputError"


def test_cli_reports_validation_errors(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"window": 0}))
    assert main(["verify", "commutator", "--config", str(path)]) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "Validation Error"


def test_cli_classifies_a_registry_symbol(capsys):
    assert main(["ess", "classify", "z", "--skip-checks", "--window", "64"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["UAT"]["value"] is True
    assert record["essHank"]["provenance"] == "theorem"


def test_full_verification_is_deterministic_at_the_default_window():
    first = HarnessService(RunConfig()).run_all()
    second = HarnessService(RunConfig()).run_all()
    assert first.window == 64
    assert first.passed, [(s.suite, c.label) for s in first.suites for c in s.cases if not c.passed]
    assert dumps(first) == dumps(second)


def test_tol_reaches_every_tolerance():
    def nested_tols(config):
        return {name: value.tol for name, value in config if hasattr(value, "tol")}

    config = build_config(None, tol=1e-4)
    assert config.tolerance == 1e-4
    assert nested_tols(config) == {"diagnostics": 1e-4, "compactness": 1e-4}
    assert nested_tols(build_config(None)) == {"diagnostics": 1e-6, "compactness": 1e-3}


def test_cli_builds_the_expression_from_the_config(tmp_path, capsys):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"window": 3, "expression": {"op": "shift"}}))
    assert main(["op", "build", "--config", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["rows"] == 3
    assert main(["op", "build"]) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "InvalidInputError"


def test_cli_verify_writes_the_cases_csv(tmp_path, capsys):
    path = tmp_path / "cases.csv"
    assert main(["verify", "hankel_step_zero", "--window", "16", "--csv", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    with path.open(newline="") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["suite", "label", "window", "residual", "exact_window", "exact_residual_zero",
                             "oracle_gap", "skipped", "passed"]
    assert [row["label"] for row in rows] == [case["label"] for case in report["suites"][0]["cases"]]
    assert all(row["suite"] == "hankel_step_zero" and row["passed"] == "True" for row in rows)
