import json

import pytest

from qeq import catalog, serialization
from qeq.serialization import InstanceError


@pytest.mark.parametrize("name", catalog.names())
def test_round_trip(name):
    text = serialization.canonical(catalog.load(name))
    again = serialization.canonical(serialization.parse(text))
    assert again == text


def test_infinite_bounds_are_strings():
    doc = serialization.to_dict(catalog.load("tz-counterexample"))
    assert doc["C"]["hi"] == ["inf"]
    assert "Infinity" not in serialization.dumps(doc)


def test_unknown_field_rejected():
    doc = serialization.to_dict(catalog.load("e2-even"))
    doc["colour"] = "blue"
    with pytest.raises(InstanceError, match="colour"):
        serialization.from_dict(doc)


def test_game_rejects_top_level_sets():
    doc = serialization.to_dict(catalog.load("e5-gnep"))
    doc["C"] = serialization.to_dict(catalog.load("e2-even"))["C"]
    with pytest.raises(InstanceError):
        serialization.from_dict(doc)


def test_kind_payload_mismatch():
    doc = serialization.to_dict(catalog.load("e2-even"))
    doc["kind"] = "QVI"
    with pytest.raises(InstanceError):
        serialization.from_dict(doc)


def test_malformed_json():
    with pytest.raises(InstanceError, match="malformed"):
        serialization.parse("{not json")


def test_schema_is_valid():
    import jsonschema

    jsonschema.Draft202012Validator.check_schema(serialization.load_schema())


def test_hash_tracks_content():
    a = catalog.load("e2-even")
    b = a.with_numerics(seed=5)
    assert serialization.input_hash(a) == serialization.input_hash(catalog.load("e2-even"))
    assert serialization.input_hash(a) != serialization.input_hash(b)


def test_report_envelope():
    rep = serialization.report("oracle", catalog.load("e2-even"), {"x": 1}, {"h": 0.1})
    assert set(rep) == {"tool", "version", "command", "instance", "input_hash", "arguments",
                        "timestamp", "payload"}
    assert json.loads(serialization.dumps(rep))["payload"] == {"x": 1}
