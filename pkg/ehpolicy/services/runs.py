"""
Experiment run ledger services
"""
import json
from typing import Optional
from uuid import UUID

from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from ehpolicy.errors import ConfigError
from ehpolicy.models import ExperimentRun, RunStatus


def get_run_by_id(db: Session, run_id: UUID) -> Optional[ExperimentRun]:
    """Get run by UUID"""
    return db.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()


def get_all_runs(db: Session, skip: int = 0, limit: int = 100,
                 command: Optional[str] = None) -> list[ExperimentRun]:
    """Get recorded runs, newest first, optionally for one command"""
    query = db.query(ExperimentRun)
    if command:
        query = query.filter(ExperimentRun.command == command)
    return query.order_by(ExperimentRun.created_at.desc()).offset(skip).limit(limit).all()


def create_run(db: Session, command: str, parameters: dict, result: Optional[dict] = None,
               seed: Optional[int] = None, status: str = RunStatus.OK) -> ExperimentRun:
    """Record a command invocation"""
    try:
        run = ExperimentRun(
            command=command,
            parameters=json.dumps(parameters, sort_keys=True, default=str),
            result=json.dumps(result, sort_keys=True) if result is not None else None,
            seed=seed,
            status=status,
        )
        db.add(run)
        db.commit()
        db.refresh(run)
        return run
    except SQLAlchemyError as e:
        db.rollback()
        raise ConfigError(f"Failed to record run: {e}") from e


def delete_run(db: Session, run_id: UUID) -> bool:
    """Delete run by UUID"""
    run = get_run_by_id(db, run_id)
    if not run:
        return False

    db.delete(run)
    db.commit()
    return True


def run_summary(run: ExperimentRun) -> dict:
    """Plain-dict view of a run for JSON output"""
    return {
        "id": str(run.id),
        "command": run.command,
        "seed": run.seed,
        "status": run.status,
        "created_at": run.created_at.isoformat(),
        "parameters": json.loads(run.parameters),
        "result": json.loads(run.result) if run.result else None,
    }
