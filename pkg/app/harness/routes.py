import click

from app.harness.io import dumps
from app.harness.options import run_options
from app.harness.scenarios import SCENARIOS
from app.harness.service import HarnessService
from app.harness.suites import SUITES


@click.command("verify")
@click.argument("suite", type=click.Choice([*SUITES, "all"]))
@run_options
@click.pass_context
def verify(ctx: click.Context, suite: str, config):
    """Run one suite, or all of them; exits 1 unless every suite passes."""
    service = HarnessService(config)
    report = service.run_all(None if suite == "all" else [suite])
    service.write(report)
    click.echo(dumps(report), nl=False)
    if not report.passed:
        ctx.exit(1)


@click.command("scenario")
@click.argument("name", type=click.Choice([*SCENARIOS, "list"]))
@run_options
@click.pass_context
def scenario(ctx: click.Context, name: str, config):
    """Run a scenario by name, or list the available ones."""
    if name == "list":
        for key in SCENARIOS:
            click.echo(key)
        return
    service = HarnessService(config)
    report = service.run_scenario(name)
    service.write(report)
    click.echo(dumps(report), nl=False)
    if not report.passed:
        ctx.exit(1)


commands = [verify, scenario]
