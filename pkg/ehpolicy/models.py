"""
Database models for the experiment run ledger
"""
from datetime import datetime
import uuid

from sqlalchemy import BigInteger, Column, DateTime, String, Text, Uuid

from ehpolicy.db import Base


class RunStatus:
    OK = 'ok'
    FAILED = 'failed'


class ExperimentRun(Base):
    """One recorded command invocation and its JSON payload"""
    __tablename__ = 'experiment_runs'

    id = Column(Uuid(as_uuid=True), primary_key=True, default=uuid.uuid4)
    command = Column(String(50), nullable=False, index=True)
    parameters = Column(Text, nullable=False)  # JSON of the resolved experiment config
    result = Column(Text, nullable=True)  # JSON payload written to stdout
    seed = Column(BigInteger, nullable=True)
    status = Column(String(20), nullable=False, default=RunStatus.OK)

    created_at = Column(DateTime, default=datetime.now, nullable=False)

    def __repr__(self):
        return f'<ExperimentRun {self.command} {self.id}>'
