"""
CSV writers used by every export.

Each file starts with '#' comment lines carrying the effective-config hash,
then a plain header row, then one row per sample at full double precision.
"""
import csv
import hashlib
import logging
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def config_hash(text: str) -> str:
    """SHA-256 of the effective configuration text"""
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _comment_lines(config_sha: Optional[str], metadata: Optional[Mapping[str, object]]) -> list:
    lines = [f"config_sha256={config_sha or 'none'}"]
    for key, value in (metadata or {}).items():
        lines.append(f"{key}={value}")
    return lines


def write_columns(path, columns: Mapping[str, np.ndarray], config_sha: Optional[str] = None,
                  metadata: Optional[Mapping[str, object]] = None) -> Path:
    """Write equal-length numeric columns with numpy.savetxt"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    header = '\n'.join(_comment_lines(config_sha, metadata))
    with open(path, 'w', newline='') as handle:
        for line in header.splitlines():
            handle.write(f"# {line}\n")
        handle.write(','.join(names) + '\n')
        np.savetxt(handle, data, delimiter=',', fmt=FLOAT_FORMAT)
    logger.info(f"Wrote {data.shape[0]} rows to {path}")
    return path


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if value is None:
        return ''
    return str(value)


def write_rows(path, fieldnames: Sequence[str], rows: Iterable[Mapping[str, object]],
               config_sha: Optional[str] = None, metadata: Optional[Mapping[str, object]] = None) -> Path:
    """Write a table of mixed-type rows (sweeps, capacity reports)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', newline='') as handle:
        for line in _comment_lines(config_sha, metadata):
            handle.write(f"# {line}\n")
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format_cell(row.get(key)) for key in fieldnames})
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path
