from typing import Optional

import click

from app.asymptotics.schema import ConvergenceReport
from app.asymptotics.service import AsymptoticsService, monomials, random_polynomials
from app.exceptions import InvalidInputError
from app.harness.io import dumps, load_document, write_json, write_traces_csv
from app.harness.options import run_options
from app.operators.service import parse_expression
from app.sections.schema import OperatorRule

router = click.Group("asym", help="Toeplitz and Hankel step diagnostics.")


def _rule(document: str) -> OperatorRule:
    expr = parse_expression(load_document(document))
    if not isinstance(expr, OperatorRule):
        raise InvalidInputError("step diagnostics need a single operator, not a composite expression")
    return expr


def _diagnose(kind: str, expression: str, candidate: Optional[str], family: str, count: int, config) -> None:
    T = _rule(expression)
    limit = _rule(candidate) if candidate else None
    settings = config.diagnostics
    vectors = (
        monomials(count) if family == "monomials"
        else random_polynomials(count, settings.random_probe_degree, config.seed)
    )
    service = AsymptoticsService(settings)
    if kind == "toeplitz":
        report: ConvergenceReport = service.diagnose_toeplitz(T, vectors, config.n_grid, limit)
    else:
        report = service.diagnose_hankel(T, vectors, config.n_grid, limit)
    if config.csv:
        write_traces_csv([report], config.csv)
    if config.out:
        write_json(report, config.out)
    click.echo(dumps(report), nl=False)


def diagnostic_command(kind: str) -> click.Command:
    @router.command(kind, help=f"Diagnose the {kind} steps of EXPRESSION along --n-grid.")
    @click.argument("expression")
    @click.option("--candidate", help="limit operator; extracted from the diagonals when omitted")
    @click.option("--family", type=click.Choice(["monomials", "random"]), default="monomials")
    @click.option("--count", type=click.IntRange(min=1), default=8, help="number of test vectors")
    @run_options
    def command(expression: str, candidate: Optional[str], family: str, count: int, config):
        _diagnose(kind, expression, candidate, family, count, config)

    return command


toeplitz_command = diagnostic_command("toeplitz")
hankel_command = diagnostic_command("hankel")
