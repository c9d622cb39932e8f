"""Result files: atomic JSON records and full-precision CSV tables."""

import csv
import json
import logging
import math
import shutil
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_NONFINITE = {'inf': math.inf, '-inf': -math.inf, 'nan': math.nan}


def encode(obj: Any) -> Any:
    """Convert a record to plain JSON types, with non-finite reals as strings."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [encode(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return 'nan'
        if math.isinf(v):
            return 'inf' if v > 0 else '-inf'
        return v
    return obj


def decode_float(value) -> float:
    """Inverse of encode() for a single real."""
    if isinstance(value, str):
        if value in _NONFINITE:
            return _NONFINITE[value]
        raise ValueError(f"Not an encoded real: {value!r}")
    return float(value)


def write_json(path: Path, record: Any) -> Path:
    """
    Write a JSON record atomically.

    1. Write to <file>.tmp
    2. Verify it parses
    3. Back up an existing file to <file>.bak
    4. Rename .tmp over the target
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_file = Path(str(path) + '.tmp')
    try:
        with open(tmp_file, 'w', encoding='utf-8') as f:
            json.dump(encode(record), f, indent=2, allow_nan=False)
            f.write('\n')

        with open(tmp_file, 'r', encoding='utf-8') as f:
            json.load(f)

        if path.exists():
            backup_file = Path(str(path) + '.bak')
            shutil.copy2(path, backup_file)
            logger.debug(f"Created backup: {backup_file}")

        tmp_file.replace(path)
        logger.info(f"Wrote {path}")
        return path

    except Exception as e:
        logger.error(f"Error writing {path}: {e}")
        if tmp_file.exists():
            tmp_file.unlink()
        raise


def read_json(path: Path) -> Any:
    """Read a JSON record, falling back to <file>.bak if the main file is corrupted."""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        backup_file = Path(str(path) + '.bak')
        if not backup_file.exists():
            raise
        logger.warning(f"{path} is corrupted ({e}); reading backup {backup_file}")
        with open(backup_file, 'r', encoding='utf-8') as f:
            return json.load(f)


def format_real(value: float) -> str:
    """17 significant digits; infinities as inf/-inf."""
    v = float(value)
    if math.isnan(v):
        return 'nan'
    if math.isinf(v):
        return 'inf' if v > 0 else '-inf'
    return format(v, '.16e')


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV table; floats are written with format_real, everything else with str."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_real(v) if isinstance(v, (float, np.floating)) else str(v) for v in row])
    logger.info(f"Wrote {path}")
    return path


def read_csv(path: Path) -> List[dict]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


def divergence_rows(profile) -> List[list]:
    """Rows (radius, estimate, grid_step) for a divergence profile."""
    return [[float(e.radius), float(e.value), float(e.grid_step)] for e in profile]


DIVERGENCE_HEADER = ('radius', 'estimate', 'grid_step')
