"""
Tests for the output store.
"""

import json

import numpy as np
import pytest

from mfront.core.store import RunStore, epsilon_tag, format_value, read_csv


@pytest.mark.parametrize(
    "value, text",
    [(0.1, "0.10000000000000001"), (3, "3"), (True, "1"), (np.bool_(False), "0"), (None, ""), (np.float64(0.5), "0.5")],
)
def test_format_value(value, text):
    assert format_value(value) == text


def test_epsilon_tag():
    assert epsilon_tag(0.1) == "eps0.1"
    assert epsilon_tag(0.075) == "eps0.075"


def test_csv_layout(tmp_path):
    store = RunStore(tmp_path / "run")
    path = store.write_csv("table.csv", ("a", "b"), ([1, 2], [0.5, None]))
    assert path.read_bytes() == b"a,b\n1,0.5\n2,\n"
    columns = read_csv(path)
    assert columns["a"].tolist() == [1.0, 2.0]
    assert np.isnan(columns["b"][1])
    assert store.written == [path]


def test_json_is_sorted_and_serializable(tmp_path):
    store = RunStore(tmp_path)
    path = store.write_json("meta.json", {"b": np.arange(2), "a": float("nan"), "c": np.float32(1.5)})
    text = path.read_text(encoding="utf-8")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": "nan", "b": [0, 1], "c": 1.5}


def test_abandon_keeps_earlier_partials(tmp_path):
    first = RunStore(tmp_path / "run")
    first.write_json("error.json", {"error": "first"})
    assert first.abandon() == tmp_path / "run_partial"
    second = RunStore(tmp_path / "run")
    assert second.abandon() == tmp_path / "run_partial.1"
    assert (tmp_path / "run_partial" / "error.json").exists()
    assert not (tmp_path / "run").exists()
