"""Shared click options and the RunConfig they build."""
import functools
from typing import Any, Callable, Optional

import click

from app.harness.io import load_document, parse_n_grid
from app.harness.schema import RunConfig

RUN_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 help="JSON RunConfig; flags override its fields"),
    click.option("--window", type=click.IntRange(min=1), help="section size N"),
    click.option("--n-grid", "n_grid", help="a:b:step or a:b:xk"),
    click.option("--tol", type=float, help="identity tolerance"),
    click.option("--seed", type=int, help="seed for every randomized probe"),
    click.option("--out", type=click.Path(dir_okay=False), help="write the JSON report here"),
    click.option("--csv", type=click.Path(dir_okay=False), help="write a CSV dump here"),
    click.option("--exact/--no-exact", default=None, help="force or disable the rational path"),
]


def run_options(command: Callable) -> Callable:
    """adds the shared flags and hands the command a ready RunConfig as `config`"""

    @functools.wraps(command)
    def wrapper(*args, config_path, window, n_grid, tol, seed, out, csv, exact, **kwargs):
        config = build_config(config_path, window=window, n_grid=n_grid, tol=tol,
                              seed=seed, out=out, csv=csv, exact=exact)
        return command(*args, config=config, **kwargs)

    for option in reversed(RUN_OPTIONS):
        wrapper = option(wrapper)
    return wrapper


def build_config(config_path: Optional[str] = None, **flags: Any) -> RunConfig:
    data = load_document(f"@{config_path}") if config_path else {}
    overrides = {
        "window": flags.get("window"),
        "n_grid": parse_n_grid(flags["n_grid"]) if flags.get("n_grid") else None,
        "tolerance": flags.get("tol"),
        "seed": flags.get("seed"),
        "out": flags.get("out"),
        "csv": flags.get("csv"),
    }
    if flags.get("exact") is not None:
        overrides["exact_mode"] = "force" if flags["exact"] else "off"
    data.update({key: value for key, value in overrides.items() if value is not None})
    config = RunConfig.model_validate(data)
    diagnostics, compactness = {}, {}
    if overrides["seed"] is not None:
        diagnostics["seed"] = config.seed
    # one --tol drives identity residuals, step verdicts and compactness tails
    if overrides["tolerance"] is not None:
        diagnostics["tol"] = compactness["tol"] = config.tolerance
    if diagnostics or compactness:
        config = config.model_copy(update={
            "diagnostics": config.diagnostics.model_copy(update=diagnostics),
            "compactness": config.compactness.model_copy(update=compactness),
        })
    return config
