import json

import pytest

from leafgrasp.config import Config, load_config
from leafgrasp.errors import InputError


def test_defaults_round_trip(tmp_path):
    cfg = Config()
    text = cfg.dumps()
    path = tmp_path / "c.json"
    path.write_text(text)
    assert load_config(path).dumps() == text
    d = json.loads(text)
    assert d["leaf_selection"]["w_c"] == 0.35
    assert d["grasp"]["w_a"] == 0.40
    assert d["planner"]["attempts"] == 10
    assert d["reload"]["capacity"] == 10


def test_partial_override(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"grasp": {"candidate_stride_px": 2}, "planner": {"planning_time": 5.0}}))
    cfg = load_config(path)
    assert cfg.grasp.candidate_stride_px == 2 and cfg.planner.planning_time == 5.0
    assert cfg.grasp.w_f == 0.25


@pytest.mark.parametrize("payload", [
    {"nonsense": {}},
    {"grasp": {"w_z": 1.0}},
    {"grasp": {"w_f": 0.9}},
    {"grasp": 3},
    {"schema_version": 99},
    [],
])
def test_bad_configs(tmp_path, payload):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(InputError):
        load_config(path)


def test_unreadable(tmp_path):
    with pytest.raises(InputError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(InputError):
        load_config(tmp_path / "bad.json")
