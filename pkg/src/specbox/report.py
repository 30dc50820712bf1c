"""Deterministic JSON reports and CSV plot data."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__
from .heat import AsymptoticFit, HeatTraceSeries

SCHEMA_VERSION = 1


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become strings, mapping keys strings."""
    if isinstance(obj, Mapping):
        return {(k if isinstance(k, str) else repr(to_jsonable(k))): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(doc) -> str:
    return json.dumps(to_jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(echo: Mapping) -> str:
    payload = json.dumps(to_jsonable(echo), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def report_document(task: str, echo: Mapping, result: Mapping, status: str) -> dict:
    """Report envelope; contains no timestamps so equal configs give equal bytes."""
    return {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "config_hash": config_hash(echo),
        "task": task,
        "status": status,
        "config": dict(echo),
        "result": dict(result),
    }


def series_csv(series: HeatTraceSeries) -> str:
    return series.to_csv()


def fit_csv(fit: AsymptoticFit) -> str:
    return fit.to_csv()


def eigenvalues_csv(values) -> str:
    rows = ["index,eigenvalue"] + [f"{i + 1},{float(v)!r}" for i, v in enumerate(values)]
    return "\n".join(rows) + "\n"


def write_outputs(out_dir: str | Path, task: str, doc: Mapping, csvs: Mapping[str, str]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{task}.json"]
    paths[0].write_text(dumps(doc))
    for name, text in sorted(csvs.items()):
        p = out / f"{task}_{name}.csv"
        p.write_text(text)
        paths.append(p)
    return paths
