"""Database models: cached estimates and the experiment run registry."""
import enum
from datetime import datetime

from sqlalchemy import Column, DateTime, Enum, Float, Integer, String, Text

from nearcrit.database import Base


# =============================================================================
# ENUMS
# =============================================================================

class EstimateKind(str, enum.Enum):
    """Quantity a cached estimate refers to."""
    L = "L"
    THETA = "theta"
    ARM = "arm"
    CROSSING = "crossing"


class RunStatus(str, enum.Enum):
    """Outcome of an experiment run."""
    PASSED = "passed"
    FAILED = "failed"
    PARTIAL = "partial"


# =============================================================================
# ESTIMATE MODEL
# =============================================================================

class EstimateRecord(Base):
    """One Monte Carlo estimate, keyed by kind and parameter p."""
    __tablename__ = "estimates"

    id = Column(Integer, primary_key=True)
    kind = Column(Enum(EstimateKind), nullable=False, index=True)
    p = Column(Float, nullable=False)
    n = Column(Float, nullable=True)
    estimate = Column(Float, nullable=False)
    std_err = Column(Float, default=0.0)
    n_samples = Column(Integer, default=0)
    seed = Column(String(32), nullable=False)  # 64-bit seeds overflow SQLite INTEGER
    metadata_json = Column(Text, default="{}")

    created_at = Column(DateTime, default=datetime.utcnow)


# =============================================================================
# EXPERIMENT RUN MODEL
# =============================================================================

class ExperimentRun(Base):
    """A finished (or budget-stopped) experiment run."""
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True)
    name = Column(String(64), nullable=False, index=True)
    config_hash = Column(String(12), nullable=False, index=True)
    seed = Column(String(32), nullable=False)
    status = Column(Enum(RunStatus), nullable=False)

    csv_path = Column(String(512), nullable=True)
    summary_path = Column(String(512), nullable=True)
    xlsx_path = Column(String(512), nullable=True)

    started_at = Column(DateTime, default=datetime.utcnow)
    finished_at = Column(DateTime, nullable=True)
    duration_s = Column(Float, nullable=True)
