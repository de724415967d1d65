from uuid import UUID

import click

from ehpolicy.commands.common import reports_errors
from ehpolicy.db import SessionLocal, init_db
from ehpolicy.errors import ConfigError
from ehpolicy.services import delete_run, get_all_runs, run_summary
from ehpolicy.utils import dumps


@click.command()
@click.option('--command', 'command', default=None, help='Only runs of this subcommand')
@click.option('--limit', type=int, default=20, show_default=True)
@click.option('--delete', 'delete_id', type=click.UUID, default=None, help='Delete the run with this id')
@reports_errors
def history(command, limit, delete_id: UUID):
    """List recorded runs, newest first, or delete one"""
    init_db()
    db = SessionLocal()
    try:
        if delete_id is not None:
            if not delete_run(db, delete_id):
                raise ConfigError(f"No recorded run {delete_id}")
            click.echo(dumps({"deleted": str(delete_id)}))
            return
        runs = get_all_runs(db, limit=limit, command=command)
        click.echo(dumps({"runs": [run_summary(r) for r in runs]}))
    finally:
        db.close()


commands = [history]
