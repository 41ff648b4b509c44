"""Named end-to-end scenarios: a classification record, convergence reports
and probe data for one operator family, plus the expectations it should meet."""
import logging
from typing import Callable

from app.asymptotics.service import monomials
from app.essential.service import EssentialService
from app.harness.constants import LOG_ALPHA_I_HANKEL_TAIL_AT_128, SCENARIO_MANIFEST, matches_recorded
from app.harness.schema import RunConfig, ScenarioReport
from app.operators.service import is_positive_section, moment_hankel, mult, sg, toeplitz, volterra
from app.sections.service import materialize, op_norm
from app.series.schema import BilateralCoeffs, RotatedCesaroSymbol
from app.series.service import REGISTRY

logger = logging.getLogger(__name__)

ZERO_LIMIT = toeplitz(BilateralCoeffs())


def _services(config: RunConfig) -> EssentialService:
    diagnostics = config.diagnostics.model_copy(update={"seed": config.seed})
    return EssentialService(config.compactness, diagnostics)


def _report(name: str, config: RunConfig, expectations: dict[str, bool], **fields) -> ScenarioReport:
    failed = [key for key, ok in expectations.items() if not ok]
    if failed:
        logger.warning(f"scenario {name}: unmet expectations {failed}")
    return ScenarioReport(scenario=name, seed=config.seed, expectations=expectations,
                          passed=not failed, **fields)


def cesaro_volterra(config: RunConfig) -> ScenarioReport:
    g = REGISTRY["cesaro"]
    service = _services(config)
    record = service.classify(g, "volterra")
    T = volterra(g)
    toeplitz_report = service.asymptotics.diagnose_toeplitz(T, monomials(8), config.n_grid, ZERO_LIMIT)
    hankel_report = service.asymptotics.diagnose_hankel(T, monomials(8), config.n_grid)
    expectations = {
        "SAT": record.sat.value is True,
        "UAT is false": record.uat.value is False,
        "essToep": record.ess_toep.value is True,
        "essHank compact_like": record.ess_hank.value is True,
        "strong only": toeplitz_report.verdict == "converges_strong_only",
        "UAH": hankel_report.verdict == "converges_uniform",
        "no anomalies": not record.anomalies,
    }
    return _report("cesaro-volterra", config, expectations,
                   classification=[record.model_dump(mode="json", by_alias=True)],
                   convergence=[toeplitz_report, hankel_report])


def sg_polynomial(config: RunConfig) -> ScenarioReport:
    g = REGISTRY["one_plus_half_z"]
    service = _services(config)
    record = service.classify(g, "sg")
    T = sg(g)
    toeplitz_report = service.asymptotics.diagnose_toeplitz(T, monomials(8), config.n_grid, mult(g))
    hankel_report = service.asymptotics.diagnose_hankel(T, monomials(8), config.n_grid)
    bound = record.probes["hankel_lower_bound"]
    expectations = {
        "SAT": record.sat.value is True,
        "UAT": record.uat.value is True,
        "essHank is false": record.ess_hank.value is False,
        "lower bound |a_0| = 1": bound["bound"] == 1.0 and bound["min_norm"] >= bound["bound"],
        "uniform convergence to M_g": toeplitz_report.verdict == "converges_uniform",
        "UAH": hankel_report.verdict == "converges_uniform",
    }
    return _report("sg-polynomial", config, expectations,
                   classification=[record.model_dump(mode="json", by_alias=True)],
                   convergence=[toeplitz_report, hankel_report])


def hilbert_matrix(config: RunConfig) -> ScenarioReport:
    service = _services(config)
    H = moment_hankel("lebesgue")
    hankel_report = service.asymptotics.diagnose_hankel(H, monomials(8), config.n_grid)
    sizes = [8, 16, 32, 64]
    positive = {str(n): is_positive_section(materialize(H, n, n)) for n in sizes}
    norms = {str(n): op_norm(materialize(H, n, n)) for n in sizes}
    values = list(norms.values())
    expectations = {
        "sections positive": all(positive.values()),
        "norms increasing below pi": all(a < b for a, b in zip(values, values[1:])) and values[-1] < 3.1416,
        "anti-diagonals vanish": hankel_report.symbol_estimate is not None
        and not hankel_report.symbol_estimate.coeffs,
    }
    return _report("hilbert-matrix", config, expectations,
                   convergence=[hankel_report],
                   probes={"positive": positive, "norms": norms})


def volterra_classical(config: RunConfig) -> ScenarioReport:
    g = REGISTRY["z"]
    service = _services(config)
    record = service.classify(g, "volterra")
    toeplitz_report = service.asymptotics.diagnose_toeplitz(volterra(g), monomials(8), config.n_grid, ZERO_LIMIT)
    expectations = {
        "UAT": record.uat.value is True,
        "essHank": record.ess_hank.value is True,
        "uniform convergence to 0": toeplitz_report.verdict == "converges_uniform",
        "no anomalies": not record.anomalies,
    }
    return _report("volterra-classical", config, expectations,
                   classification=[record.model_dump(mode="json", by_alias=True)],
                   convergence=[toeplitz_report])


def log_alpha_volterra(config: RunConfig) -> ScenarioReport:
    g = REGISTRY["log_alpha_i"]
    service = _services(config)
    record = service.classify(g, "volterra")
    probe = record.probes.get("hankel_defect", {})
    expectations = {
        "UAT is false": record.uat.value is False,
        "essHank is false": record.ess_hank.value is False,
    }
    if probe.get("window") == 512 and probe.get("cut_grid", [None])[-1] == 128:
        expectations["tail matches recorded value"] = matches_recorded(
            probe["tail_norms"][-1], LOG_ALPHA_I_HANKEL_TAIL_AT_128
        )
    return _report("log-alpha-volterra", config, expectations,
                   classification=[record.model_dump(mode="json", by_alias=True)])


def rotated_cesaro(config: RunConfig) -> ScenarioReport:
    """-log(1 - z/alpha) is essentially Hankel only for alpha = 1 or -1"""
    service = _services(config)
    records, expectations = [], {}
    for label, alpha in (("1", 1), ("-1", -1), ("i", 1j), ("-i", -1j)):
        record = service.classify(RotatedCesaroSymbol(alpha=alpha), "volterra", check_theorems=False)
        records.append(record.model_dump(mode="json", by_alias=True))
        expectations[f"alpha={label}"] = record.ess_hank.value is (label in ("1", "-1"))
    return _report("rotated-cesaro", config, expectations, classification=records)


SCENARIOS: dict[str, Callable[[RunConfig], ScenarioReport]] = {
    "cesaro-volterra": cesaro_volterra,
    "sg-polynomial": sg_polynomial,
    "hilbert-matrix": hilbert_matrix,
    "volterra-classical": volterra_classical,
    "log-alpha-volterra": log_alpha_volterra,
    "rotated-cesaro": rotated_cesaro,
}

if tuple(SCENARIOS) != SCENARIO_MANIFEST:
    raise RuntimeError(f"scenario registry {sorted(SCENARIOS)} does not match the manifest")
