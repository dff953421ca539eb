"""
Workspace Database Configuration and Session Management
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Generator, Union

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from .models import Base

REGISTRY_NAME = "registry.db"


def registry_url(workspace: Union[str, Path]) -> str:
    """SQLite URL of a workspace's run registry."""
    return f"sqlite:///{Path(workspace) / REGISTRY_NAME}"


def make_engine(workspace: Union[str, Path]) -> Engine:
    return create_engine(registry_url(workspace), connect_args={"check_same_thread": False})


def init_db(engine: Engine) -> None:
    """Initialize database tables."""
    Base.metadata.create_all(bind=engine)


def make_session_factory(workspace: Union[str, Path]) -> sessionmaker:
    """Create the registry tables if needed and return a bound session factory."""
    engine = make_engine(workspace)
    init_db(engine)
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)


@contextmanager
def session_scope(factory: sessionmaker) -> Generator[Session, None, None]:
    """Session that commits on success and rolls back on error."""
    db = factory()
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
