"""
Point File I/O

Reads and writes point clouds as CSV (one point per row, optional single header
row) with an optional JSON sidecar `<stem>.meta.json` carrying generator metadata.
"""

import csv
import json
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from src.core.errors import CsvParseError, InputError
from src.pointcloud.cloud import PointCloud
from src.pointcloud.synth import ManifoldMeta

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def meta_path_for(path: PathLike) -> Path:
    """Sidecar location for a point file: points.csv -> points.meta.json."""
    path = Path(path)
    return path.with_name(f"{path.stem}.meta.json")


def _parse_row(row: List[str]) -> Optional[List[float]]:
    try:
        return [float(field) for field in row]
    except ValueError:
        return None


def load_csv(path: PathLike) -> PointCloud:
    """
    Load a point cloud from a CSV file.

    The first row is treated as a header when any of its fields is non-numeric.
    A sidecar meta file next to the CSV is attached when present.

    Raises:
        InputError: If the file does not exist
        CsvParseError: On ragged rows, non-numeric fields or a file without data rows
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"point file not found: {path}")

    rows: List[List[float]] = []
    width: Optional[int] = None
    with path.open(newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not field.strip() for field in row):
                continue
            values = _parse_row(row)
            if values is None:
                if line_no == 1:
                    continue  # header
                bad = next(f for f in row if _parse_row([f]) is None)
                raise CsvParseError(f"non-numeric field '{bad}'", line=line_no)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CsvParseError(f"expected {width} values, found {len(values)}", line=line_no)
            rows.append(values)

    if not rows:
        raise CsvParseError(f"{path}: no data rows")

    meta = None
    sidecar = meta_path_for(path)
    if sidecar.is_file():
        meta = ManifoldMeta.from_json_dict(json.loads(sidecar.read_text(encoding="utf-8")))

    logger.info(f"Loaded {len(rows)} points of dimension {width} from {path}")
    return PointCloud(np.array(rows, dtype=float), meta=meta)


def save_csv(cloud: PointCloud, path: PathLike, header: bool = True) -> Path:
    """
    Write a point cloud to CSV with 17 significant digits (lossless round trip).

    Writes the meta sidecar when the cloud carries metadata.

    Returns:
        The path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"x{k}" for k in range(cloud.ambient_dim)])
        for point in cloud.points:
            writer.writerow([format(float(v), ".17g") for v in point])

    if cloud.meta is not None:
        meta_path_for(path).write_text(
            json.dumps(cloud.meta.to_json_dict(), indent=2, sort_keys=True),
            encoding="utf-8",
        )
    logger.info(f"Saved {cloud.n_points} points to {path}")
    return path
