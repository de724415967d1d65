from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from ehpolicy.config import Config

engine = create_engine(Config.DATABASE_URL)

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


def init_db(bind=None):
    """Create the run-ledger tables if they are missing"""
    from ehpolicy import models  # noqa: F401  registers mappers
    Base.metadata.create_all(bind=bind or engine)
