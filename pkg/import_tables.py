"""
Script to load measured L and theta tables into the estimate cache.
Run: python import_tables.py L l_table.csv [--replace]

Accepts CSV files written by ``nearcrit estimate`` (or any CSV with p and
estimate columns) and XLSX workbooks whose first sheet has the same header.
"""
import argparse
import asyncio
from pathlib import Path

from openpyxl import load_workbook

from nearcrit.models import EstimateKind
from nearcrit.services.cache import save_estimates
from nearcrit.services.export import read_csv


def safe_float(value, default=None):
    """Safely convert to float."""
    if value is None or value == "" or value == "None":
        return default
    try:
        return float(value)
    except (ValueError, TypeError):
        return default


def read_rows(path: Path) -> list:
    """Dict rows from a CSV or the first sheet of a workbook."""
    if path.suffix.lower() == ".xlsx":
        wb = load_workbook(path, read_only=True)
        ws = wb.active
        rows = list(ws.iter_rows(values_only=True))
        if not rows:
            return []
        headers = [str(h) for h in rows[0]]
        return [dict(zip(headers, row)) for row in rows[1:]]
    return read_csv(path)


def table_from_rows(rows: list) -> list:
    table = []
    skipped = 0
    for row in rows:
        p = safe_float(row.get("p"))
        estimate = safe_float(row.get("estimate", row.get("p_hat")))
        if p is None or estimate is None:
            skipped += 1
            continue
        table.append({
            "p": p,
            "n": safe_float(row.get("n")),
            "estimate": estimate,
            "std_err": safe_float(row.get("std_err"), 0.0),
            "n_samples": int(safe_float(row.get("n_samples"), 0)),
            "seed": row.get("seed") or 0,
        })
    if skipped:
        print(f"Skipped {skipped} rows without p or estimate")
    return table


async def import_tables(kind: str, paths: list, replace: bool = False):
    """Import every file into the cache under ``kind``."""
    kind = EstimateKind(kind)
    total = 0
    for i, path in enumerate(paths):
        rows = table_from_rows(read_rows(Path(path)))
        total += await save_estimates(kind, rows, replace=replace and i == 0)
        print(f"{path}: {len(rows)} rows")

    print(f"\n=== Import Complete ===")
    print(f"Imported {total} {kind.value} estimates")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Import L / theta tables into the estimate cache.")
    parser.add_argument("kind", choices=[k.value for k in EstimateKind])
    parser.add_argument("paths", nargs="+")
    parser.add_argument("--replace", action="store_true", help="drop stored rows of this kind first")
    args = parser.parse_args()
    asyncio.run(import_tables(args.kind, args.paths, args.replace))
