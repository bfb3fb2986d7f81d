"""Run artifacts: manifest, CSV tables and JSON reports."""

import dataclasses
import hashlib
import json
import math
import platform
from fractions import Fraction
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd
import sympy

CSV_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "POT", "sympy", "joblib", "pydantic")


def to_jsonable(value: Any) -> Any:
    """Plain JSON types for numpy scalars, arrays, frames, exact numbers and dataclasses.

    Non-finite floats become the strings "inf", "-inf" and "nan".
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, pd.DataFrame):
        return to_jsonable(value.to_dict(orient="records"))
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (Fraction, sympy.Basic)):
        return str(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, "as_dict"):
            return to_jsonable(value.as_dict())
        return to_jsonable({f.name: getattr(value, f.name) for f in dataclasses.fields(value)})
    if isinstance(value, Path):
        return str(value)
    return value


def config_hash(config: Dict[str, Any]) -> str:
    canonical = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def package_versions(names: Iterable[str] = TRACKED_PACKAGES) -> Dict[str, Optional[str]]:
    versions = {"python": platform.python_version()}
    for name in names:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def estimate_record(value, stderr: float = 0.0, N: Optional[int] = None, seed: Optional[int] = None, **extra) -> Dict[str, Any]:
    """An estimate together with its standard error and provenance."""
    return {"value": value, "stderr": stderr, "N": N, "seed": seed, **extra}


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        json.dump(to_jsonable(payload), f, indent=2)
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_tables(tables: Dict[str, pd.DataFrame], directory: Union[str, Path]) -> Dict[str, str]:
    """One CSV per table under ``directory``; returns name → file name."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, frame in tables.items():
        written[name] = write_csv(frame, directory / f"{name}.csv").name
    return written


def build_manifest(experiment: str, config: Dict[str, Any], seed: int, workers: int, tables: Dict[str, str], status: str) -> Dict[str, Any]:
    return {
        "experiment": experiment,
        "status": status,
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "workers": workers,
        "versions": package_versions(),
        "schemas": {"csv": CSV_SCHEMA_VERSION, "report": REPORT_SCHEMA_VERSION, "float_format": FLOAT_FORMAT},
        "tables": tables,
    }
