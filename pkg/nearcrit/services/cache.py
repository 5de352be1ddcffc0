"""
Estimate cache and experiment run registry.

Estimates (L and theta tables above all) are stored once and reused by the
empirical scale backend. Every experiment run leaves one registry row.
"""
import asyncio
import json
import logging
from datetime import datetime
from typing import Iterable, List, Optional, Sequence

from sqlalchemy import delete, select

from nearcrit.database import async_session, init_db
from nearcrit.models import EstimateKind, EstimateRecord, ExperimentRun, RunStatus
from nearcrit.scales import AnalyticBackend, EmpiricalBackend, ScaleBackend

logger = logging.getLogger(__name__)


async def save_estimates(kind: EstimateKind, rows: Iterable[dict], replace: bool = False) -> int:
    """
    Store estimate rows of one kind.

    Args:
        kind: What the rows estimate
        rows: Dicts with p, estimate and optionally n, std_err, n_samples, seed, metadata
        replace: Drop every stored row of this kind first

    Returns:
        Number of rows written
    """
    await init_db()
    kind = EstimateKind(kind)
    records = [
        EstimateRecord(
            kind=kind,
            p=float(row["p"]),
            n=None if row.get("n") is None else float(row["n"]),
            estimate=float(row["estimate"]),
            std_err=float(row.get("std_err", 0.0)),
            n_samples=int(row.get("n_samples", 0)),
            seed=str(row.get("seed", 0)),
            metadata_json=json.dumps(row.get("metadata", {}), sort_keys=True),
        )
        for row in rows
    ]
    async with async_session() as session:
        if replace:
            await session.execute(delete(EstimateRecord).where(EstimateRecord.kind == kind))
        session.add_all(records)
        await session.commit()
    logger.info(f"Stored {len(records)} {kind.value} estimates")
    return len(records)


async def load_estimates(kind: EstimateKind) -> List[EstimateRecord]:
    """All stored estimates of ``kind``, sorted by p (then newest first)."""
    await init_db()
    async with async_session() as session:
        result = await session.execute(
            select(EstimateRecord)
            .where(EstimateRecord.kind == EstimateKind(kind))
            .order_by(EstimateRecord.p, EstimateRecord.id.desc())
        )
        return list(result.scalars().all())


def table_rows(records: Sequence[EstimateRecord]) -> List[List[float]]:
    """(p, estimate, std_err) rows, keeping the newest record for each p."""
    seen = set()
    rows = []
    for record in records:
        if record.p in seen:
            continue
        seen.add(record.p)
        rows.append([record.p, record.estimate, record.std_err or 0.0])
    return rows


def load_backend(name: str) -> ScaleBackend:
    """Analytic backend, or the empirical one built from cached L and θ tables."""
    if name == "analytic":
        return AnalyticBackend()
    if name != "empirical":
        raise ValueError(f"Unknown scale backend '{name}'")
    L_rows = table_rows(asyncio.run(load_estimates(EstimateKind.L)))
    theta_rows = table_rows(asyncio.run(load_estimates(EstimateKind.THETA)))
    return EmpiricalBackend([r[:2] for r in L_rows], [r[:2] for r in theta_rows])


async def record_run(
    name: str,
    config_hash: str,
    seed: int,
    status: RunStatus,
    started_at: datetime,
    finished_at: datetime,
    csv_path: Optional[str] = None,
    summary_path: Optional[str] = None,
    xlsx_path: Optional[str] = None,
) -> int:
    """Add a registry row; returns its id."""
    await init_db()
    run = ExperimentRun(
        name=name,
        config_hash=config_hash,
        seed=str(seed),
        status=RunStatus(status),
        csv_path=csv_path,
        summary_path=summary_path,
        xlsx_path=xlsx_path,
        started_at=started_at,
        finished_at=finished_at,
        duration_s=(finished_at - started_at).total_seconds(),
    )
    async with async_session() as session:
        session.add(run)
        await session.commit()
        await session.refresh(run)
    logger.debug(f"Recorded run {run.id} of {name} ({run.status.value})")
    return run.id


async def list_runs(name: Optional[str] = None) -> List[ExperimentRun]:
    """Registry rows, oldest first, optionally for one experiment."""
    await init_db()
    async with async_session() as session:
        query = select(ExperimentRun).order_by(ExperimentRun.id)
        if name is not None:
            query = query.where(ExperimentRun.name == name)
        result = await session.execute(query)
        return list(result.scalars().all())
