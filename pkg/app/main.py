import json
import logging
import sys

import click
from pydantic import ValidationError

from app.config.main import LOG_LEVEL
from app.exceptions import LabException

# setting up logging
logging.basicConfig(level=LOG_LEVEL, stream=sys.stderr)
logger = logging.getLogger(__name__)


@click.group(help="Finite-section laboratory for operators on the Hardy space H^2.")
def cli():
    pass


# Include modular routers
from app.operators.routes import router as operators_router
from app.asymptotics.routes import router as asymptotics_router
from app.essential.routes import router as essential_router
from app.harness.routes import commands as harness_commands

cli.add_command(operators_router)
cli.add_command(asymptotics_router)
cli.add_command(essential_router)
for command in harness_commands:
    cli.add_command(command)


def _fail(status_code: int, content: dict) -> int:
    click.echo(json.dumps(content, default=str), err=True)
    return status_code


# Global exception handlers
def main(argv: list[str] | None = None) -> int:
    try:
        result = cli.main(args=argv, prog_name="hardy-lab", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        logger.error("Aborted")
        return 1
    except ValidationError as exc:
        logger.error(f"Validation error: {exc.errors(include_url=False)}")
        return _fail(2, {
            "error": "Validation Error",
            "message": "Invalid input data",
            "details": exc.errors(include_url=False),
        })
    except LabException as exc:
        logger.error(f"{type(exc).__name__}: {exc.detail}")
        content = {"error": type(exc).__name__, "message": exc.detail}
        if exc.details is not None:
            content["details"] = exc.details
        return _fail(exc.status_code, content)
    except Exception as exc:
        logger.exception(f"Unexpected error: {str(exc)}")
        return _fail(1, {"error": "Internal Error", "message": "An unexpected error occurred"})
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
