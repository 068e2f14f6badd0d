"""`ddnn` command line: train, evaluate, predict and inspect deep dictionary networks."""
import time
from typing import Any, Dict

import click
from click.core import ParameterSource

from src.data_access.models.spec_model import ActivationKind, CoderKind, NormalizationMode, SolverKind, Variant
from src.presentation.commands import COMMANDS
from src.presentation.schemas.run_config import MetricsFormat, build_run_config, parse_config_file
from src.shared.config import settings
from src.shared.exceptions import DDNNError
from src.shared.logging import get_logger, new_run_id, setup_logging
from src.shared.monitoring import COMMAND_COUNT, COMMAND_DURATION, write_metrics

logger = get_logger(__name__)

# explicit flags override the config file, which overrides settings
_EXPLICIT = (ParameterSource.COMMANDLINE, ParameterSource.ENVIRONMENT)
# parameters that never go through RunConfig
_CLI_ONLY = {"config_file"}


def _choice(enum) -> click.Choice:
    return click.Choice([member.value for member in enum])


def _merge(ctx: click.Context, options: Dict[str, Any]) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    if options.get("config_file"):
        values.update(parse_config_file(options["config_file"]))
    for name, value in options.items():
        if name in _CLI_ONLY or value is None:
            continue
        if ctx.get_parameter_source(name) in _EXPLICIT or name not in values:
            values[name] = value
    return values


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--train", "command", flag_value="train", help="Train a network and save it to --model.")
@click.option("--eval", "command", flag_value="eval", help="Report accuracy of --model on labeled --data.")
@click.option("--predict", "command", flag_value="predict", help="Write one predicted label per sample.")
@click.option("--inspect", "command", flag_value="inspect", help="Describe a saved model.")
@click.option("--config", "config_file", type=click.Path(dir_okay=False), help="Flat 'key = value' file; flags win.")
@click.option("--data", type=click.Path(dir_okay=False), help="Dataset: .csv, otherwise IDX images.")
@click.option("--labels", type=click.Path(dir_okay=False), help="IDX labels file.")
@click.option("--label-column", "label_column", help=f"CSV label column [{settings.label_column}].")
@click.option("--model", type=click.Path(dir_okay=False), help="Model file.")
@click.option("--out", type=click.Path(dir_okay=False), help="Prediction output file [stdout].")
@click.option("--scores", type=click.Path(dir_okay=False), help="Write the class score matrix as CSV.")
@click.option("--variant", type=_choice(Variant), help=f"Network variant [{settings.variant}].")
@click.option("--atoms", help="Comma-separated atoms per layer [d,d/2,d/4].")
@click.option("--activation", type=_choice(ActivationKind), help=f"Activation [{settings.activation}].")
@click.option("--mu", type=float, help=f"Final-layer label weight [{settings.mu}].")
@click.option("--eta", type=float, help=f"Mutual incoherence weight [{settings.eta}].")
@click.option("--lambda", "lam", type=float, help=f"Logistic weight, ddnn_binary [{settings.lam}].")
@click.option("--sigma", type=float, help=f"Inversion noise level [{settings.noise_sigma}].")
@click.option("--delta", type=float, help=f"Clamp margin before inversion [{settings.clamp_margin}].")
@click.option("--sparsity", type=int, help=f"Nonzeros per code for omp [{settings.sparsity}].")
@click.option("--solver", type=_choice(SolverKind), help=f"Dictionary update [{settings.solver}].")
@click.option("--coder", type=_choice(CoderKind), help=f"Training code step [{settings.coder}].")
@click.option("--test-coder", "test_coder", type=_choice(CoderKind), help="Test-time code step [ridge_ls].")
@click.option("--iters", type=int, help=f"Maximum alternations per layer [{settings.max_iters}].")
@click.option("--tol", type=float, help=f"Relative objective change that stops a layer [{settings.tol}].")
@click.option("--ridge", type=float, help=f"Ridge weight of every least-squares solve [{settings.ridge}].")
@click.option("--seed", type=int, help=f"Seed of every random stream [{settings.seed}].")
@click.option("--normalize", type=_choice(NormalizationMode), help=f"Input normalization [{settings.normalization}].")
@click.option("--format", "format", type=_choice(MetricsFormat), help=f"Metrics output [{settings.metrics_format}].")
@click.option("--metrics-file", "metrics_file", type=click.Path(dir_okay=False), help="Prometheus textfile to write.")
@click.option("--log-level", "log_level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.pass_context
def main(ctx: click.Context, **options: Any) -> None:
    """Deep dictionary networks: exactly one of --train, --eval, --predict, --inspect."""
    if options["command"] is None:
        raise click.UsageError("one of --train, --eval, --predict, --inspect is required")

    run_id = new_run_id()
    setup_logging(level=options.get("log_level"))
    command = options["command"]
    start = time.perf_counter()
    status = 1
    metrics_file = options.get("metrics_file")
    try:
        config = build_run_config(_merge(ctx, options))
        metrics_file = config.metrics_file
        setup_logging(level=config.log_level)
        logger.info(f"Starting {command} (run {run_id})")
        status = COMMANDS[config.command](config)
    except DDNNError as e:
        logger.debug(f"{command} failed", exc_info=True)
        click.echo(f"error: {e}", err=True)
    except Exception as e:
        logger.debug(f"{command} failed unexpectedly", exc_info=True)
        click.echo(f"error: unexpected failure: {e}", err=True)
    finally:
        COMMAND_COUNT.labels(command=command, status="ok" if status == 0 else "error").inc()
        COMMAND_DURATION.labels(command=command).observe(time.perf_counter() - start)

    if metrics_file:
        try:
            write_metrics(metrics_file)
        except OSError as e:
            click.echo(f"error: cannot write metrics to {metrics_file}: {e.strerror or e}", err=True)
            status = 1
    ctx.exit(status)


if __name__ == "__main__":
    main()
