import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from app.config.main import WORKERS
from app.exceptions import InvalidInputError, IrrationalSymbolError, UncertifiableWindowError
from app.harness.io import write_cases_csv, write_json, write_traces_csv
from app.harness.scenarios import SCENARIOS
from app.harness.schema import RunConfig, ScenarioReport, SuiteResult, VerificationReport
from app.harness.suites import SUITES, oracle
from app.sections.schema import Expr, SectionSummary
from app.sections.service import evaluate, summarize

logger = logging.getLogger(__name__)


class HarnessService:
    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()

    def run_suite(self, name: str) -> SuiteResult:
        if name not in SUITES:
            raise InvalidInputError(f"unknown suite '{name}'", details={"suites": list(SUITES)})
        thunks = SUITES[name](self.config)
        # cases come back in registry order whatever the worker count
        with ThreadPoolExecutor(max_workers=WORKERS) as pool:
            cases = list(pool.map(lambda thunk: thunk(), thunks))

        skipped = [case.label for case in cases if case.skipped]
        if skipped:
            logger.warning(f"suite {name}: skipped {skipped}")
        passed = bool(cases) and all(case.passed and not case.skipped for case in cases)
        logger.info(f"suite {name}: {sum(c.passed for c in cases)}/{len(cases)} cases passed")
        return SuiteResult(suite=name, tolerance=self.config.tolerance, cases=cases, passed=passed)

    def run_all(self, names: Optional[list[str]] = None) -> VerificationReport:
        results = [self.run_suite(name) for name in (names or list(SUITES))]
        report = VerificationReport(
            seed=self.config.seed,
            window=self.config.window,
            exact_window=self.config.exact_window,
            suites=results,
            passed=all(result.passed for result in results),
        )
        logger.info(f"verification {'passed' if report.passed else 'failed'}")
        return report

    def run_scenario(self, name: str) -> ScenarioReport:
        if name not in SCENARIOS:
            raise InvalidInputError(f"unknown scenario '{name}'", details={"scenarios": list(SCENARIOS)})
        logger.info(f"running scenario {name}")
        report = SCENARIOS[name](self.config)
        logger.info(f"scenario {name}: {'passed' if report.passed else 'failed'}")
        return report

    def write(self, report: VerificationReport | ScenarioReport) -> Optional[Path]:
        if self.config.csv:
            if isinstance(report, VerificationReport):
                write_cases_csv(report.suites, self.config.csv)
            elif report.convergence:
                write_traces_csv(report.convergence, self.config.csv)
            else:
                logger.warning(f"scenario {report.scenario} has no convergence traces; no CSV written")
        if self.config.out:
            return write_json(report, self.config.out)
        return None


def section_report(expr: Expr, config: RunConfig) -> SectionSummary:
    """float section at config.window, plus the exact section when the rational path applies"""
    section = evaluate(expr, config.window, config.window)
    summary = summarize(section)
    if config.exact_mode == "off" or (config.exact_mode == "auto" and config.window > config.exact_window):
        return summary
    try:
        exact = oracle.evaluate(expr, config.window, config.window)
    except (IrrationalSymbolError, UncertifiableWindowError) as exc:
        if config.exact_mode == "force":
            raise
        logger.info(f"float section only: {exc.detail}")
        return summary
    reference = oracle.to_numpy(exact)
    gap = float(np.abs(section.entries - reference)[section.exact].max(initial=0.0))
    return summary.model_copy(update={
        "exact_entries": [[str(oracle.domain.to_sympy(e)) for e in row] for row in exact.to_list()],
        "oracle_gap": gap,
    })
