from typing import Optional

import click
import numpy as np

from app.exceptions import InvalidInputError
from app.harness.io import dumps, load_document, write_json
from app.harness.options import run_options
from app.harness.schema import RunConfig
from app.harness.service import section_report
from app.operators.schema import ApplyResult
from app.operators.service import parse_expression
from app.sections.service import apply, evaluate, write_csv
from app.series.service import coeffs_of, parse_symbol, registry_symbol, to_complex

router = click.Group("op", help="Build and apply operator sections.")


def _expression(text: Optional[str], config: RunConfig):
    """the EXPRESSION argument, or the expression stored in --config"""
    if text is not None:
        return parse_expression(load_document(text))
    if config.expression is None:
        raise InvalidInputError("give an EXPRESSION or a --config with an 'expression' field")
    return parse_expression(config.expression)


@router.command("build")
@click.argument("expression", required=False)
@run_options
def build(expression: Optional[str], config):
    """Print the window x window section of EXPRESSION (JSON or @file)."""
    expr = _expression(expression, config)
    summary = section_report(expr, config)
    if config.csv:
        write_csv(evaluate(expr, config.window, config.window), config.csv)
    if config.out:
        write_json(summary, config.out)
    click.echo(dumps(summary), nl=False)


@router.command("apply")
@click.argument("expression")
@click.argument("vector")
@run_options
def apply_operator(expression: str, vector: str, config):
    """Apply EXPRESSION to VECTOR: a JSON coefficient list, a symbol document or a registry name."""
    expr = parse_expression(load_document(expression))
    section = evaluate(expr, config.window, config.window)
    if vector.startswith(("[", "@", "{")):
        document = load_document(vector)
    else:
        document = registry_symbol(vector)
    if isinstance(document, list):
        f = np.array([to_complex(c) for c in document], dtype=complex)
    else:
        f = np.asarray(coeffs_of(parse_symbol(document), config.window - 1).coeffs, dtype=complex)
    image = apply(section, f)
    result = ApplyResult(
        operator=section.description,
        window=config.window,
        image=image.tolist(),
        norm=float(np.linalg.norm(image)),
    )
    if config.out:
        write_json(result, config.out)
    click.echo(dumps(result), nl=False)
