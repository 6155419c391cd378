import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcf_lab.records import RunConfig, config_hash, dumps, format_number, make_record, read_record, write_csv, write_record
from gcf_lab.exceptions import ValidationError

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(finite)
def test_float_roundtrip_17_digits(x):
    assert float(format_number(x)) == x


def test_nonfinite_to_null():
    assert dumps([math.nan, math.inf, 1.0], indent=None) == "[null, null, 1.0]"


def test_numpy_scalars_and_arrays():
    out = json.loads(dumps({"a": np.float64(0.1), "b": np.arange(3), "c": np.bool_(True)}))
    assert out == {"a": 0.1, "b": [0, 1, 2], "c": True}


@given(st.dictionaries(st.text(min_size=1, max_size=5), st.one_of(finite, st.integers(-10, 10), st.text(max_size=4))))
def test_config_roundtrip_and_hash(params):
    cfg = RunConfig("radial", params)
    back = RunConfig.from_json(json.loads(dumps(cfg.to_json())))
    assert back.to_json() == cfg.to_json()
    assert back.hash() == cfg.hash()


def test_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": 2.5}) == config_hash({"b": 2.5, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_record_roundtrip_and_sidecar(tmp_path):
    rec = make_record(RunConfig("constants", {"n": 2, "alpha": 0.1}), {"x": [1.5, 2.0]})
    p = write_record(tmp_path / "r.json", rec, wall_clock=0.25)
    assert read_record(p) == json.loads(dumps(rec))
    meta = json.loads((tmp_path / "r.meta.json").read_text())
    assert meta["config_hash"] == rec["config_hash"] and meta["wall_clock_s"] == 0.25
    assert "timestamp" not in p.read_text()


def test_read_rejects_non_record(tmp_path):
    (tmp_path / "x.json").write_text("[1, 2]")
    with pytest.raises(ValidationError):
        read_record(tmp_path / "x.json")


def test_csv(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["a", "b"], [[0.1, 2], [1e-300, "x"]])
    assert p.read_text() == "a,b\n0.10000000000000001,2\n1e-300,x\n"
