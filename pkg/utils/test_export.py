import json
import math
from fractions import Fraction

import numpy as np
import pandas as pd
import sympy

from utils.export import build_manifest, config_hash, to_jsonable, write_csv, write_json, write_tables


def test_to_jsonable_handles_numeric_types():
    payload = {
        "array": np.array([1.0, 2.0]),
        "int": np.int64(3),
        "flag": np.bool_(True),
        "exact": Fraction(-1, 3),
        "symbolic": sympy.sqrt(2) / 2,
        "inf": math.inf,
        "frame": pd.DataFrame({"x": [1]}),
    }
    plain = to_jsonable(payload)
    assert plain == {
        "array": [1.0, 2.0],
        "int": 3,
        "flag": True,
        "exact": "-1/3",
        "symbolic": "sqrt(2)/2",
        "inf": "inf",
        "frame": [{"x": 1}],
    }
    json.dumps(plain)


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_csv_floats_keep_17_significant_digits(tmp_path):
    path = write_csv(pd.DataFrame({"x": [0.1, 1 / 3]}), tmp_path / "values.csv")
    assert path.read_text().splitlines() == ["x", "0.10000000000000001", "0.33333333333333331"]
    assert pd.read_csv(path)["x"].tolist() == [0.1, 1 / 3]


def test_write_tables_and_manifest(tmp_path):
    written = write_tables({"curve": pd.DataFrame({"t": [1, 2]})}, tmp_path / "results")
    assert written == {"curve": "curve.csv"}
    manifest = build_manifest("demo", {"seed": 4}, 4, 1, written, "success")
    assert manifest["config_hash"] == config_hash({"seed": 4})
    assert manifest["versions"]["numpy"] == np.__version__
    write_json(manifest, tmp_path / "manifest.json")
    assert json.loads((tmp_path / "manifest.json").read_text())["tables"] == written
