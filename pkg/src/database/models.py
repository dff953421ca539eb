"""
Workspace Registry Models
"""

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship
from sqlalchemy.sql import func

Base = declarative_base()


class Run(Base):
    """One toolkit command execution and its manifest."""
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    manifest_hash = Column(String, index=True, nullable=False)
    command = Column(String, nullable=False)  # "ingest", "estimate", "diagnose", ...
    seed = Column(Integer, nullable=True)
    toolkit_version = Column(String, nullable=False)
    manifest = Column(Text, nullable=False)  # JSON manifest
    created_at = Column(DateTime, server_default=func.now())

    # Relationships
    inputs = relationship("InputFile", back_populates="run", cascade="all, delete-orphan")
    fits = relationship("FitRecord", back_populates="run", cascade="all, delete-orphan")
    outputs = relationship("OutputRecord", back_populates="run", cascade="all, delete-orphan")


class InputFile(Base):
    """Input file hashed into a run manifest."""
    __tablename__ = "input_files"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    kind = Column(String, nullable=False)  # "panel", "adjacency", "features", "spec", ...
    path = Column(String, nullable=False)
    sha256 = Column(String, nullable=False)

    run = relationship("Run", back_populates="inputs")


class FitRecord(Base):
    """A completed model fit."""
    __tablename__ = "fits"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    model_name = Column(String, index=True, nullable=False)
    estimator = Column(String, nullable=False)
    dependent = Column(String, nullable=False)
    spec_yaml = Column(Text, nullable=False)
    nobs = Column(Integer, nullable=False)
    loglik = Column(Float, nullable=True)
    aic = Column(Float, nullable=True)
    bic = Column(Float, nullable=True)
    payload = Column(Text, nullable=False)  # JSON coefficient table and statistics
    residual_path = Column(String, nullable=True)  # .npy N×T residual matrix
    created_at = Column(DateTime, server_default=func.now())

    run = relationship("Run", back_populates="fits")


class OutputRecord(Base):
    """An emitted table or curve file."""
    __tablename__ = "outputs"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    kind = Column(String, nullable=False)
    path = Column(String, nullable=False)
    sha256 = Column(String, nullable=False)

    run = relationship("Run", back_populates="outputs")
