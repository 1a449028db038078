# homogenization/reports.py
"""Report writers: deterministic JSON, CSV plot data and corrector dumps."""
import csv
import json
import logging
import math
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from .engine.cellsolver import CorrectorField

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = '.17g'
CORRECTOR_MAGIC = b'HCORR001'


def sanitize_for_json(obj: Any) -> Any:
    """Recursively convert numpy types, enums and paths to native Python types.

    Non-finite floats become None so that reports stay valid JSON.
    """
    if obj is None:
        return None

    if isinstance(obj, np.generic):
        return sanitize_for_json(obj.item())

    if isinstance(obj, np.ndarray):
        return sanitize_for_json(obj.tolist())

    if isinstance(obj, Enum):
        return sanitize_for_json(obj.value)

    if isinstance(obj, Path):
        return str(obj)

    if isinstance(obj, dict):
        return {str(k): sanitize_for_json(v) for k, v in obj.items()}

    if isinstance(obj, (list, tuple)):
        return [sanitize_for_json(v) for v in obj]

    if isinstance(obj, bool):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, str):
        return obj

    # Fallback: convert to string
    return str(obj)


def format_float(value: float) -> str:
    """17 significant digits, always readable back as a float."""
    text = format(value, FLOAT_FORMAT)
    if not any(ch in text for ch in '.en'):
        text += '.0'
    return text


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = ' ' * (indent * (level + 1))
    end = ' ' * (indent * level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return '{}'
        items = [f"{pad}{json.dumps(k, ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return '{\n' + ',\n'.join(items) + '\n' + end + '}'
    if not obj:
        return '[]'
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        return '[' + ', '.join(_encode(v, indent, level + 1) for v in obj) + ']'
    items = [pad + _encode(v, indent, level + 1) for v in obj]
    return '[\n' + ',\n'.join(items) + '\n' + end + ']'


def dumps_report(report: Any, indent: int = 2) -> str:
    """Deterministic JSON text: insertion key order, fixed float format, LF line endings."""
    return _encode(sanitize_for_json(report), indent, 0) + '\n'


def write_report(report: Any, path: Optional[Union[str, Path]] = None, stream: Optional[TextIO] = None) -> str:
    """Write the report to `path`, or to `stream` (stdout) when no path is given."""
    text = dumps_report(report)
    if path is None:
        (stream or sys.stdout).write(text)
        return text
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8', newline='\n')
    logger.info(f"✅ Report written to {path}")
    return text


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Comma-delimited, '.' decimal separator, header row, LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    logger.info(f"📋 CSV written to {path}")
    return path


def write_corrector_dump(path: Union[str, Path], field: CorrectorField) -> Path:
    """
    Binary corrector dump: b"HCORR001", n as little-endian uint64, then the
    real-space values row-major as little-endian float64 with the two
    components interleaved.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.moveaxis(field.real_space(), 0, -1)
    with open(path, 'wb') as handle:
        handle.write(CORRECTOR_MAGIC)
        handle.write(np.array([field.n], dtype='<u8').tobytes())
        handle.write(np.ascontiguousarray(values, dtype='<f8').tobytes())
    return path


def read_corrector_dump(path: Union[str, Path]) -> Tuple[int, np.ndarray]:
    """Inverse of write_corrector_dump; returns (n, values of shape (2, n, n))."""
    data = Path(path).read_bytes()
    if data[:8] != CORRECTOR_MAGIC:
        raise ValueError(f"{path} is not a corrector dump")
    n = int(np.frombuffer(data[8:16], dtype='<u8')[0])
    values = np.frombuffer(data[16:], dtype='<f8')
    if values.size != 2 * n * n:
        raise ValueError(f"{path}: expected {2 * n * n} values, found {values.size}")
    return n, np.moveaxis(values.reshape(n, n, 2), -1, 0)


def envelope(command: str, config: dict, body: dict) -> dict:
    """Common report header followed by the command body."""
    report = {'schema_version': SCHEMA_VERSION, 'command': command, 'config': config}
    report.update(body)
    return report
