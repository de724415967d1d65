"""
Helpers shared by every command module: option sets, config layering,
JSON/CSV output, run recording and error-to-exit-code mapping
"""
import logging
from datetime import datetime
from functools import wraps

import click

from ehpolicy.config import Config, ExperimentDefaults, load_experiment_config
from ehpolicy.db import SessionLocal, init_db
from ehpolicy.errors import EhPolicyError
from ehpolicy.models import RunStatus
from ehpolicy.services.arrivals import arrivals_from_spec
from ehpolicy.services.runs import create_run
from ehpolicy.services.sim import SimConfig
from ehpolicy.services.utility import utility_from_spec
from ehpolicy.utils import dumps, to_jsonable, write_csv

logger = logging.getLogger(__name__)


def shared_options(f):
    """--seed, --deterministic and --emit-csv, accepted before or after the subcommand"""
    f = click.option('--emit-csv', 'emit_csv', type=click.Path(dir_okay=False), default=None,
                     help='Write plot-ready rows to this CSV file')(f)
    f = click.option('--deterministic', is_flag=True, default=False,
                     help='Suppress the timestamp so output is byte-identical')(f)
    f = click.option('--seed', type=int, default=None, help='Base RNG seed')(f)
    return f


def utility_option(f):
    return click.option('--utility', default=None, help="Utility spec, e.g. log_awgn or exp_sat:beta=2")(f)


def arrivals_option(f):
    f = click.option('--battery', type=float, default=None, help='Battery capacity B')(f)
    return click.option('--arrivals', default=None,
                        help="Arrival spec, e.g. bernoulli:p=0.5, constant:e=2, uniform:lo=0,hi=10")(f)


def sim_options(f):
    f = click.option('--initial-battery', 'initial_battery', type=float, default=None,
                     help='Starting battery level (default: full)')(f)
    f = click.option('--warmup', type=int, default=None, help='Slots discarded before averaging')(f)
    f = click.option('--trials', type=int, default=None, help='Independent trials')(f)
    return click.option('--horizon', type=int, default=None, help='Slots per trial')(f)


def reports_errors(f):
    """Map ehpolicy errors to a one-line stderr diagnostic and their exit code"""
    @wraps(f)
    def decorated(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except EhPolicyError as e:
            logger.debug("command failed", exc_info=True)
            ctx = click.get_current_context()
            if recording(ctx):
                record_failure(ctx, e)
            click.echo(f"error: {e}", err=True)
            ctx.exit(e.exit_code)
    return decorated


def experiment_config(**local):
    """Layer defaults, --config file, EHPOLICY_* env, group flags and command flags"""
    ctx = click.get_current_context()
    state = ctx.find_root().obj or {}
    overrides = dict(state.get('overrides', {}))
    overrides.update({k: v for k, v in local.items() if v is not None and v is not False})
    return load_experiment_config(state.get('config_path'), overrides)


def resolve_utility(cfg):
    return utility_from_spec(cfg['UTILITY'])


def resolve_arrivals(cfg):
    return arrivals_from_spec(cfg['ARRIVALS'], float(cfg['BATTERY']))


def resolve_sim_config(cfg) -> SimConfig:
    initial = cfg['INITIAL_BATTERY']
    return SimConfig(
        horizon_n=int(cfg['HORIZON']),
        trials=int(cfg['TRIALS']),
        seed=int(cfg['SEED']),
        initial_battery=None if initial is None else float(initial),
        warmup=int(cfg['WARMUP']),
    )


def emit(command: str, cfg, payload: dict, csv_header=None, csv_rows=None) -> None:
    """Print the JSON payload, write the optional CSV and record the run"""
    payload = dict(payload)
    if not cfg['DETERMINISTIC']:
        payload['timestamp'] = datetime.now().isoformat(timespec='seconds')
    click.echo(dumps(payload))

    if cfg['EMIT_CSV'] and csv_header is not None:
        write_csv(cfg['EMIT_CSV'], csv_header, csv_rows or [])
        logger.info("wrote %s", cfg['EMIT_CSV'])

    if recording(click.get_current_context()):
        record(command, cfg, payload)


def recording(ctx) -> bool:
    state = ctx.find_root().obj or {}
    return bool(state.get('record') or Config.RECORD_RUNS)


def record(command: str, cfg, payload: dict, status: str = RunStatus.OK) -> None:
    """Store a run under its experiment keys only"""
    parameters = {k: cfg[k] for k in sorted(cfg) if hasattr(ExperimentDefaults, k)}
    seed = cfg.get('SEED')
    init_db()
    db = SessionLocal()
    try:
        run = create_run(db, command, to_jsonable(parameters), to_jsonable(payload),
                         seed=None if seed is None else int(seed), status=status)
        logger.info("recorded run %s (%s)", run.id, status)
    finally:
        db.close()


def record_failure(ctx, error: EhPolicyError) -> None:
    """Store a failed command with its flags and the error text"""
    cfg = {k.upper(): v for k, v in ctx.params.items() if v is not None}
    try:
        record(ctx.info_name, cfg, {"error": str(error), "exit_code": error.exit_code}, status=RunStatus.FAILED)
    except EhPolicyError as e:
        logger.warning("could not record failed run: %s", e)
