"""
CSV, JSON and XLSX writers.

Every CSV starts with one ``# ``-prefixed JSON line, the reproducibility
header: effective configuration, master seed and configuration hash.
"""
import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

from openpyxl import Workbook
from openpyxl.utils import get_column_letter

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
HASH_LENGTH = 12


def canonical_json(data: Any) -> str:
    """Sorted keys, no whitespace; the form that is hashed."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=_jsonable)


def config_hash(config: Mapping[str, Any]) -> str:
    """First 12 hex digits of the SHA-256 of the canonical JSON."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:HASH_LENGTH]


def reproducibility_header(config: Mapping[str, Any], seed: int) -> Dict[str, Any]:
    effective = dict(config)
    effective["seed"] = int(seed)
    return {"config": effective, "seed": int(seed), "config_hash": config_hash(effective)}


def _jsonable(value: Any) -> Any:
    if hasattr(value, "to_dict"):
        return value.to_dict()
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "value"):
        return value.value
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialise {type(value).__name__}")


def _cell(value: Any) -> Any:
    if isinstance(value, float) and math.isfinite(value):
        return repr(value)
    if hasattr(value, "item"):
        return _cell(value.item())
    return value


def write_csv(
    path: PathLike,
    rows: Sequence[Mapping[str, Any]],
    header: Optional[Mapping[str, Any]] = None,
    fieldnames: Optional[List[str]] = None,
) -> Path:
    """
    Write dict rows; floats keep their shortest round-trip repr.

    Args:
        header: Reproducibility header written as the first comment line
        fieldnames: Column order (default: keys of the first row)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with path.open("w", newline="", encoding="utf-8") as fh:
        if header is not None:
            fh.write("# " + canonical_json(header) + "\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k, "")) for k in fieldnames})
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    """Rows of a CSV written by ``write_csv`` (comment lines skipped)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def read_csv_header(path: PathLike) -> Optional[Dict[str, Any]]:
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline()
    return json.loads(first[2:]) if first.startswith("# ") else None


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2, default=_jsonable) + "\n", encoding="utf-8")
    return path


def write_xlsx(path: PathLike, sheets: Mapping[str, Iterable[Mapping[str, Any]]]) -> Path:
    """
    One sheet per entry: header row from the first row's keys, then values.
    Column widths fit the longest cell.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wb = Workbook()
    wb.remove(wb.active)
    for title, rows in sheets.items():
        ws = wb.create_sheet(title=title[:31])
        rows = list(rows)
        if not rows:
            continue
        headers = list(rows[0].keys())
        ws.append(headers)
        for row in rows:
            ws.append([_xlsx_value(row.get(h)) for h in headers])
        for col_idx, column in enumerate(ws.columns, 1):
            max_length = max(len(str(cell.value)) if cell.value is not None else 0 for cell in column)
            ws.column_dimensions[get_column_letter(col_idx)].width = max_length + 2
    if not wb.sheetnames:
        wb.create_sheet(title="empty")
    wb.save(path)
    logger.debug(f"Wrote workbook {path} with {len(wb.sheetnames)} sheets")
    return path


def _xlsx_value(value: Any) -> Any:
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (dict, list, tuple)):
        return canonical_json(value)
    if hasattr(value, "value"):
        return value.value
    return value
