"""
Experiment runner.

A run merges the suite defaults with the user's parameters, executes the suite
under a wall-clock budget, and writes a CSV of rows plus a summary JSON (and
an XLSX workbook on request). Every run is recorded in the registry.
"""
import asyncio
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from nearcrit import messages
from nearcrit.errors import ExperimentError
from nearcrit.models import RunStatus
from nearcrit.services.cache import record_run
from nearcrit.services.export import config_hash, reproducibility_header, write_csv, write_json, write_xlsx

logger = logging.getLogger(__name__)


# =============================================================================
# BUDGET
# =============================================================================

class BudgetExceeded(Exception):
    """Raised inside a suite when its wall-clock budget is spent."""


class Budget:
    """Wall-clock allowance in seconds; None means unlimited."""

    def __init__(self, seconds: Optional[float]) -> None:
        self.seconds = seconds
        self.started = time.monotonic()

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def exhausted(self) -> bool:
        return self.seconds is not None and self.elapsed >= self.seconds

    def spend(self) -> None:
        """Call before each unit of work."""
        if self.exhausted():
            raise BudgetExceeded()


# =============================================================================
# RESULTS
# =============================================================================

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteContext:
    """What a suite sees: merged parameters, seed, worker count, budget and the result being built."""
    params: Dict[str, Any]
    seed: int
    threads: Optional[int]
    budget: Budget
    rows: List[dict] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name, bool(passed), detail))
        if not passed:
            logger.warning(f"Check failed: {name} ({detail})")
        return bool(passed)

    def seed_for(self, index: int) -> int:
        """Distinct master seed for the index-th grid point."""
        return (self.seed + 7919 * (index + 1)) & ((1 << 64) - 1)


@dataclass(frozen=True)
class Suite:
    name: str
    fn: Callable[[SuiteContext], None]
    defaults: Dict[str, Any]
    description: str


SUITES: Dict[str, Suite] = {}


def suite(name: str, **defaults: Any):
    """Register a suite function under ``name`` with its default parameters."""
    def register(fn: Callable[[SuiteContext], None]) -> Callable[[SuiteContext], None]:
        doc = (fn.__doc__ or "").strip()
        SUITES[name] = Suite(name, fn, defaults, doc.splitlines()[0] if doc else name)
        return fn

    return register


# =============================================================================
# CONFIG AND RUN
# =============================================================================

@dataclass
class ExperimentConfig:
    """
    One experiment invocation.

    ``params`` override the suite defaults; unknown keys are rejected.
    ``budget`` is a wall-clock limit in seconds.
    """
    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out: Path = Path(".")
    budget: Optional[float] = None
    xlsx: bool = False

    def __post_init__(self) -> None:
        self.out = Path(self.out)
        if self.name not in SUITES:
            raise ExperimentError(
                messages.UNKNOWN_SUITE.format(name=self.name, available=", ".join(sorted(SUITES)))
            )
        unknown = set(self.params) - set(SUITES[self.name].defaults)
        if unknown:
            raise ExperimentError(f"Unknown parameters for {self.name}: {', '.join(sorted(unknown))}")

    def effective_params(self) -> Dict[str, Any]:
        merged = dict(SUITES[self.name].defaults)
        merged.update(self.params)
        return merged

    def identity(self) -> Dict[str, Any]:
        return {"name": self.name, "params": self.effective_params(), "seed": int(self.seed)}

    @property
    def config_hash(self) -> str:
        return config_hash(self.identity())


@dataclass
class RunOutcome:
    name: str
    status: RunStatus
    config_hash: str
    csv_path: Path
    summary_path: Path
    xlsx_path: Optional[Path]
    rows: List[dict]
    checks: List[Check]
    extra: Dict[str, Any]
    elapsed: float


def _status(ctx: SuiteContext, partial: bool) -> RunStatus:
    if partial:
        return RunStatus.PARTIAL
    if any(not c.passed for c in ctx.checks):
        return RunStatus.FAILED
    return RunStatus.PASSED


def run(cfg: ExperimentConfig, threads: Optional[int] = None, record: bool = True) -> RunOutcome:
    """
    Execute ``cfg`` and write its result files.

    A spent budget stops the suite at the next grid point; what was computed
    so far is written and the run is flagged partial.
    """
    spec = SUITES[cfg.name]
    params = cfg.effective_params()
    digest = cfg.config_hash
    ctx = SuiteContext(params=params, seed=int(cfg.seed), threads=threads, budget=Budget(cfg.budget))
    started_at = datetime.utcnow()
    logger.info(f"Experiment {cfg.name} [{digest}] started with seed {cfg.seed}")

    partial = False
    try:
        spec.fn(ctx)
    except BudgetExceeded:
        partial = True
        logger.warning(messages.SUITE_PARTIAL.format(name=cfg.name, budget=cfg.budget or 0.0))

    status = _status(ctx, partial)
    header = reproducibility_header(cfg.identity(), cfg.seed)
    stem = cfg.out / f"{cfg.name}-{digest}"
    fieldnames = _fieldnames(ctx.rows)
    csv_path = write_csv(stem.with_suffix(".csv"), ctx.rows, header=header, fieldnames=fieldnames)
    xlsx_path = write_xlsx(stem.with_suffix(".xlsx"), {cfg.name: ctx.rows}) if cfg.xlsx else None
    summary = {
        **header,
        "name": cfg.name,
        "status": status.value,
        "partial": partial,
        "budget_s": cfg.budget,
        "elapsed_s": round(ctx.budget.elapsed, 3),
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in ctx.checks],
        "n_rows": len(ctx.rows),
        "extra": ctx.extra,
        "csv": str(csv_path),
    }
    summary_path = write_json(stem.with_suffix(".json"), summary)
    finished_at = datetime.utcnow()

    if status == RunStatus.PASSED:
        logger.info(messages.SUITE_PASSED.format(name=cfg.name, checks=len(ctx.checks)))
    elif status == RunStatus.FAILED:
        failed = ", ".join(c.name for c in ctx.checks if not c.passed)
        logger.warning(messages.SUITE_FAILED.format(name=cfg.name, failed=failed))

    if record:
        asyncio.run(record_run(
            name=cfg.name,
            config_hash=digest,
            seed=cfg.seed,
            status=status,
            started_at=started_at,
            finished_at=finished_at,
            csv_path=str(csv_path),
            summary_path=str(summary_path),
            xlsx_path=None if xlsx_path is None else str(xlsx_path),
        ))
    return RunOutcome(
        name=cfg.name,
        status=status,
        config_hash=digest,
        csv_path=csv_path,
        summary_path=summary_path,
        xlsx_path=xlsx_path,
        rows=ctx.rows,
        checks=ctx.checks,
        extra=ctx.extra,
        elapsed=ctx.budget.elapsed,
    )


def _fieldnames(rows: List[dict]) -> List[str]:
    names: List[str] = []
    for row in rows:
        for key in row:
            if key not in names:
                names.append(key)
    return names
