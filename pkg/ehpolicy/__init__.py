import click

from ehpolicy.config import Config
from ehpolicy.utils import configure_logging

__version__ = '0.1.0'


def create_cli():
    @click.group(context_settings={'help_option_names': ['-h', '--help']})
    @click.version_option(__version__, prog_name='eh-policy')
    @click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None,
                  help='JSON or TOML file mirroring the long flag names')
    @click.option('--seed', type=int, default=None, help='Base RNG seed')
    @click.option('--deterministic', is_flag=True, default=False, help='Suppress timestamps in output')
    @click.option('--emit-csv', 'emit_csv', type=click.Path(dir_okay=False), default=None,
                  help='Write plot-ready rows to this CSV file')
    @click.option('--record', is_flag=True, default=False, help='Store the run in the results ledger')
    @click.option('-v', '--verbose', count=True, help='-v for INFO, -vv for DEBUG on stderr')
    @click.pass_context
    def cli(ctx, config_path, seed, deterministic, emit_csv, record, verbose):
        """Power-control policies for finite-battery energy-harvesting transmitters"""
        configure_logging({0: Config.LOG_LEVEL, 1: 'INFO'}.get(verbose, 'DEBUG'))
        overrides = {'seed': seed, 'emit_csv': emit_csv, 'deterministic': deterministic or None}
        ctx.obj = {
            'config_path': config_path,
            'overrides': {k: v for k, v in overrides.items() if v is not None},
            'record': record,
        }

    # Register command modules
    from ehpolicy.commands import analysis, experiment, history, policy
    for module in (policy, analysis, experiment, history):
        for command in module.commands:
            cli.add_command(command)

    return cli
