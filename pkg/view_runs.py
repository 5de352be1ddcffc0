"""
Script to view the experiment run registry.
Run: python view_runs.py [NAME] [--xlsx runs.xlsx]
"""
import argparse
import asyncio

from nearcrit.messages import NO_RUNS, RUN_ROW
from nearcrit.services.cache import list_runs
from nearcrit.services.export import write_xlsx


def run_rows(runs) -> list:
    return [
        {
            "id": run.id,
            "name": run.name,
            "status": run.status.value,
            "seed": run.seed,
            "config_hash": run.config_hash,
            "started_at": run.started_at.strftime("%Y-%m-%d %H:%M:%S") if run.started_at else "",
            "finished_at": run.finished_at.strftime("%Y-%m-%d %H:%M:%S") if run.finished_at else "",
            "duration_s": run.duration_s,
            "csv": run.csv_path or "",
            "summary": run.summary_path or "",
            "xlsx": run.xlsx_path or "",
        }
        for run in runs
    ]


async def view_runs(name=None, xlsx=None):
    """Print registry rows, optionally exporting them to a workbook."""
    runs = await list_runs(name)
    if not runs:
        print(NO_RUNS)
        return

    rows = run_rows(runs)
    print(f"\n{'=' * 60}")
    print(f"TOTAL RUNS: {len(rows)}")
    print(f"{'=' * 60}\n")
    for row in rows:
        print(RUN_ROW.format(**row))
        if row["csv"]:
            print(f"      {row['csv']}")

    if xlsx:
        path = write_xlsx(xlsx, {"runs": rows})
        print(f"\nExported to {path}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="List recorded experiment runs.")
    parser.add_argument("name", nargs="?")
    parser.add_argument("--xlsx")
    args = parser.parse_args()
    asyncio.run(view_runs(args.name, args.xlsx))
