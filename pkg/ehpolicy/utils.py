import csv
import json
import logging
import math
import sys
from dataclasses import asdict, is_dataclass

import numpy as np
from rich.console import Console
from rich.logging import RichHandler

from ehpolicy.errors import ConfigError


def parse_spec(spec: str) -> tuple[str, dict]:
    """Split 'name:key=value,key=v1|v2' into ('name', {key: value, ...})

    Scalar values become floats, '|'-separated values become lists of floats.
    """
    if not spec or not spec.strip():
        raise ConfigError("Empty spec string")
    name, _, rest = spec.strip().partition(':')
    params = {}
    if rest:
        for item in rest.split(','):
            key, sep, raw = item.partition('=')
            if not sep or not key.strip():
                raise ConfigError(f"Malformed parameter '{item}' in '{spec}'")
            try:
                if '|' in raw:
                    value = [float(v) for v in raw.split('|')]
                else:
                    value = float(raw)
            except ValueError as e:
                raise ConfigError(f"Non-numeric value '{raw}' for '{key}' in '{spec}'") from e
            params[key.strip()] = value
    return name.strip(), params


def parse_range(spec: str) -> np.ndarray:
    """'1e1:1e6:log' -> one point per decade; 'lo:hi:lin:n' -> n linear points"""
    parts = spec.split(':')
    try:
        lo, hi = float(parts[0]), float(parts[1])
        kind = parts[2] if len(parts) > 2 else 'log'
        if kind == 'log':
            n = int(parts[3]) if len(parts) > 3 else int(round(math.log10(hi / lo))) + 1
            return np.logspace(math.log10(lo), math.log10(hi), n)
        if kind == 'lin':
            return np.linspace(lo, hi, int(parts[3]) if len(parts) > 3 else 10)
    except (ValueError, IndexError, ZeroDivisionError) as e:
        raise ConfigError(f"Malformed range '{spec}'") from e
    raise ConfigError(f"Unknown range kind in '{spec}'")


def to_jsonable(obj):
    """Recursively convert numpy scalars, arrays, dataclasses and non-finite floats"""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def dumps(payload) -> str:
    """Stable JSON: sorted keys, fixed separators"""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([to_jsonable(v) for v in row])


def configure_logging(level: str = 'WARNING') -> None:
    """Route library logging to stderr through rich"""
    handler = RichHandler(console=Console(file=sys.stderr), show_path=False, rich_tracebacks=False)
    root = logging.getLogger('ehpolicy')
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
    root.propagate = False
