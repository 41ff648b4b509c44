import click

from app.essential.schema import DefectKind
from app.essential.service import EssentialService, defect_expression
from app.harness.io import dumps, load_document, write_json
from app.harness.options import run_options
from app.harness.schema import RunConfig
from app.harness.service import section_report
from app.operators.service import parse_expression
from app.series.service import parse_symbol, registry_symbol

router = click.Group("ess", help="Essential Toeplitz / Hankel defects and classification.")

KIND = click.option("--kind", type=click.Choice([k.value for k in DefectKind]),
                    default=DefectKind.hankel_defect.value, show_default=True)


def _service(config: RunConfig) -> EssentialService:
    """probes run at --window when given, otherwise at compactness.window from the config"""
    settings = config.compactness
    if "window" in config.model_fields_set:
        settings = settings.model_copy(update={"window": config.window})
    diagnostics = config.diagnostics.model_copy(update={"seed": config.seed})
    return EssentialService(settings, diagnostics)


def _symbol(text: str):
    return parse_symbol(load_document(text)) if text.startswith(("{", "@")) else registry_symbol(text)


def _emit(model, config: RunConfig) -> None:
    if config.out:
        write_json(model, config.out)
    click.echo(dumps(model), nl=False)


@router.command("defect")
@click.argument("expression")
@KIND
@run_options
def defect(expression: str, kind: str, config):
    """Print the section of a defect of EXPRESSION."""
    expr = defect_expression(parse_expression(load_document(expression)), DefectKind(kind))
    _emit(section_report(expr, config), config)


@router.command("probe")
@click.argument("expression")
@KIND
@run_options
def probe(expression: str, kind: str, config):
    """Compactness probe of a defect of EXPRESSION."""
    service = _service(config)
    _emit(service.estimate_defect(parse_expression(load_document(expression)), DefectKind(kind)), config)


@router.command("classify")
@click.argument("symbol")
@click.option("--which", type=click.Choice(["volterra", "sg"]), default="volterra", show_default=True)
@click.option("--skip-checks", is_flag=True, help="do not probe theorem-derived fields")
@run_options
def classify(symbol: str, which: str, skip_checks: bool, config):
    """Classify V_g or S_g for SYMBOL (registry name, JSON or @file)."""
    record = _service(config).classify(_symbol(symbol), which, check_theorems=not skip_checks)
    _emit(record, config)


@router.command("lemma")
@click.argument("expression")
@run_options
def lemma(expression: str, config):
    """Compare the S and S* formulations of both defects of EXPRESSION."""
    _emit(_service(config).lemma_equivalence(parse_expression(load_document(expression))), config)


@router.command("products")
@click.argument("g")
@click.argument("h")
@click.argument("k")
@run_options
def products(g: str, h: str, k: str, config):
    """Defect probes of V_g V_k, V_k V_g and V_g V_h."""
    _emit(_service(config).product_structure_check(_symbol(g), _symbol(h), _symbol(k)), config)
