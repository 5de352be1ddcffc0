import asyncio
from datetime import datetime, timedelta

import numpy as np
import pytest
from openpyxl import load_workbook
from sqlalchemy import inspect

from nearcrit.database import engine, init_db
from nearcrit.models import EstimateKind, RunStatus
from nearcrit.scales import AnalyticBackend, EmpiricalBackend
from nearcrit.scheduler import run_replicas
from nearcrit.services.cache import list_runs, load_backend, load_estimates, record_run, save_estimates, table_rows
from nearcrit.services.export import (
    config_hash,
    read_csv,
    read_csv_header,
    reproducibility_header,
    write_csv,
    write_xlsx,
)
from nearcrit.services.seeding import BIRTHS, IGNITIONS, child_seed, make_rng
from nearcrit.services.stats import EstimateResult, clopper_pearson, estimate_event, fit_loglog
from nearcrit.services.unionfind import UnionFind


# =============================================================================
# SEEDING AND REPLICAS
# =============================================================================

def test_streams_are_reproducible_and_distinct():
    a = make_rng(42, BIRTHS).random(4)
    assert np.array_equal(a, make_rng(42, BIRTHS).random(4))
    assert not np.array_equal(a, make_rng(42, IGNITIONS).random(4))
    assert not np.array_equal(a, make_rng(43, BIRTHS).random(4))


def test_seed_is_reduced_to_64_bits():
    assert np.array_equal(make_rng(2 ** 64 + 5).random(3), make_rng(5).random(3))
    assert 0 <= child_seed(make_rng(1)) < 2 ** 64


def test_replicas_do_not_depend_on_worker_count():
    def draw(rng):
        return float(rng.random())

    serial = run_replicas(draw, 16, seed=7, threads=1)
    parallel = run_replicas(draw, 16, seed=7, threads=4)
    assert serial == parallel
    assert run_replicas(draw, 4, seed=7, start=12) == serial[12:]


# =============================================================================
# STATISTICS
# =============================================================================

def test_estimate_event_counts():
    result = estimate_event(lambda rng: True, 10, seed=0)
    assert result.p_hat == 1.0
    assert result.std_err == 0.0
    assert result.interval()[1] == 1.0
    with pytest.raises(ValueError):
        estimate_event(lambda rng: True, 0, seed=0)


def test_estimate_row_carries_metadata():
    row = EstimateResult.from_counts(3, 10, seed=1, metadata={"n": 8}).to_row()
    assert row["p_hat"] == pytest.approx(0.3)
    assert row["n"] == 8


def test_clopper_pearson_brackets_estimate():
    lo, hi = clopper_pearson(30, 100)
    assert lo < 0.3 < hi
    assert clopper_pearson(0, 10)[0] == 0.0


def test_loglog_fit_recovers_exact_slope():
    x = np.array([2.0, 4.0, 8.0, 16.0, 32.0])
    y = 3.0 * x ** -1.25
    fit = fit_loglog(x, y, 0.01 * y)
    assert fit.slope == pytest.approx(-1.25, abs=1e-9)
    assert fit.contains(-1.25)
    with pytest.raises(ValueError):
        fit_loglog([1.0, 2.0], [0.0, 0.5], [0.1, 0.1])


# =============================================================================
# UNION-FIND
# =============================================================================

def test_union_find_merges_by_size():
    uf = UnionFind(6)
    for x in range(5):
        uf.add(x)
    uf.union(0, 1)
    uf.union(1, 2)
    uf.union(3, 4)
    assert uf.connected(0, 2)
    assert not uf.connected(2, 3)
    assert uf.set_size(2) == 3
    uf.reset(2)
    assert uf.set_size(2) == 1


def test_union_find_rebuild_from_labels():
    uf = UnionFind(6)
    uf.rebuild(np.array([1, 1, 0, 2, 2, 2]))
    assert uf.connected(0, 1)
    assert uf.connected(3, 5)
    assert not uf.connected(1, 3)
    assert uf.set_size(4) == 3
    assert not uf.active[2]


# =============================================================================
# EXPORT
# =============================================================================

def test_config_hash_is_order_independent():
    digest = config_hash({"a": 1, "b": [1, 2]})
    assert len(digest) == 12
    assert digest == config_hash({"b": [1, 2], "a": 1})
    assert digest != config_hash({"a": 2, "b": [1, 2]})


def test_csv_starts_with_reproducibility_header(tmp_path):
    header = reproducibility_header({"command": "fire"}, seed=5)
    path = write_csv(tmp_path / "x.csv", [{"a": 0.1, "b": 2}, {"a": 1e-300, "b": 3}], header=header)
    assert read_csv_header(path)["seed"] == 5
    assert path.read_text().splitlines()[1] == "a,b"
    rows = read_csv(path)
    assert float(rows[0]["a"]) == 0.1
    assert float(rows[1]["a"]) == 1e-300


def test_xlsx_sheets(tmp_path):
    path = write_xlsx(tmp_path / "x.xlsx", {"runs": [{"k": 1, "v": float("inf")}], "blank": []})
    wb = load_workbook(path)
    assert wb.sheetnames == ["runs", "blank"]
    ws = wb["runs"]
    assert [c.value for c in ws[1]] == ["k", "v"]
    assert [c.value for c in ws[2]] == [1, "inf"]


# =============================================================================
# CACHE AND REGISTRY
# =============================================================================

def test_init_db_creates_every_column():
    async def columns():
        await init_db()
        async with engine.begin() as conn:
            return await conn.run_sync(lambda sync: {
                table: {c["name"] for c in inspect(sync).get_columns(table)}
                for table in ("experiment_runs", "estimates")
            })

    found = asyncio.run(columns())
    assert {"xlsx_path", "duration_s"} <= found["experiment_runs"]
    assert "n" in found["estimates"]


def test_estimates_round_trip_through_the_cache():
    rows = [
        {"p": 0.6, "estimate": 30.0, "std_err": 1.0},
        {"p": 0.7, "estimate": 9.0},
    ]
    assert asyncio.run(save_estimates(EstimateKind.L, rows, replace=True)) == 2
    asyncio.run(save_estimates(EstimateKind.L, [{"p": 0.6, "estimate": 31.0}]))
    records = asyncio.run(load_estimates(EstimateKind.L))
    assert [r.p for r in records] == [0.6, 0.6, 0.7]
    assert table_rows(records) == [[0.6, 31.0, 0.0], [0.7, 9.0, 0.0]]


def test_empirical_backend_reads_cached_tables():
    asyncio.run(save_estimates(EstimateKind.L, [{"p": 0.6, "estimate": 30.0}, {"p": 0.7, "estimate": 9.0}], replace=True))
    asyncio.run(save_estimates(
        EstimateKind.THETA, [{"p": 0.6, "estimate": 0.5}, {"p": 0.7, "estimate": 0.7}], replace=True,
    ))
    backend = load_backend("empirical")
    assert isinstance(backend, EmpiricalBackend)
    assert backend.L_table == [(0.6, 30.0), (0.7, 9.0)]
    assert isinstance(load_backend("analytic"), AnalyticBackend)
    with pytest.raises(ValueError):
        load_backend("tabulated")


def test_run_registry():
    started = datetime(2024, 1, 1)
    run_id = asyncio.run(record_run(
        name="registry-check",
        config_hash="abc123abc123",
        seed=3,
        status=RunStatus.PARTIAL,
        started_at=started,
        finished_at=started + timedelta(seconds=2),
        csv_path="x.csv",
    ))
    runs = asyncio.run(list_runs("registry-check"))
    assert runs[-1].id == run_id
    assert runs[-1].status == RunStatus.PARTIAL
    assert runs[-1].duration_s == pytest.approx(2.0)
    assert runs[-1].seed == "3"
