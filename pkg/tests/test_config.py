import json
import math

import numpy as np
import pytest

from necktree.config import (
    content_hash,
    family_from_dict,
    family_to_dict,
    file_hash,
    gauge_from_dict,
    load_json,
    model_from_dict,
)
from necktree.errors import ConfigError
from necktree.measure import beta_hat
from necktree.trees import sample

from helpers import worked_family


def test_family_round_trip():
    fam = worked_family()
    again = family_from_dict(family_to_dict(fam))
    assert again.nsystems == fam.nsystems
    assert again.weights == fam.weights
    assert [s.nmaps for s in again.systems] == [s.nmaps for s in fam.systems]


def test_family_geometry_fields_round_trip():
    obj = {
        "ambient_dim": 2,
        "systems": [
            {
                "label": "rot",
                "weight": 1.0,
                "maps": [
                    {
                        "ratio": 0.4,
                        "isometry": [[0.0, -1.0], [1.0, 0.0]],
                        "translation": [0.1, 0.2],
                    }
                ],
            }
        ],
    }
    fam = family_from_dict(obj)
    assert fam.ambient_dim == 2
    m = fam.systems[0].maps[0]
    assert m.isometry[0, 1] == -1.0
    back = family_to_dict(fam)
    assert back["systems"][0]["maps"][0]["translation"] == [0.1, 0.2]


def test_family_missing_field_named():
    with pytest.raises(ConfigError, match="missing field 'maps'"):
        family_from_dict({"systems": [{"weight": 1.0}]})
    with pytest.raises(ConfigError, match="missing field 'weight'"):
        family_from_dict({"systems": [{"maps": [{"ratio": 0.5}]}]})


def test_model_parsing_variants():
    spec, seed = model_from_dict({"model": "homogeneous", "seed": 9})
    assert spec.kind == "homogeneous" and seed == 9
    spec, _ = model_from_dict({"model": {"v_variable": 3}})
    assert spec.kind == "v_variable" and spec.v == 3
    spec, _ = model_from_dict(
        {"model": {"neck_block": {"templates": [
            {"weight": 2.0, "levels": [[0.5, 0.5], [1.0, 0.0]]},
        ]}}}
    )
    assert spec.kind == "neck_block" and spec.templates[0].length == 2
    fam = worked_family()
    r = sample(spec, 3, fam)
    assert r.level_systems(4).shape == (4,)
    with pytest.raises(ConfigError, match="unknown model"):
        model_from_dict({"model": "sideways"})


def test_gauge_parsing_and_auto():
    fam = worked_family()
    g = gauge_from_dict({"s": 0.5, "family": "power"})
    assert g.family == "power" and g.s == 0.5
    g = gauge_from_dict({"s": "auto", "family": {"h1": {"beta": "auto", "gamma": 0.25}}}, family=fam)
    assert g.s == pytest.approx(math.log(6) / (2 * math.log(3)), abs=1e-9)
    assert g.beta == pytest.approx(beta_hat(fam, g.s), rel=1e-12)
    with pytest.raises(ConfigError, match="'auto' needs a family"):
        gauge_from_dict({"s": "auto", "family": "power"})
    with pytest.raises(ConfigError, match="malformed"):
        gauge_from_dict({"s": 1.0, "family": {"mystery": {}}})


def test_hashes_stable_and_sensitive(tmp_path):
    a = content_hash(b"hello")
    assert a == content_hash(b"hello") and len(a) == 16
    assert a != content_hash(b"hello!")
    f = tmp_path / "x.json"
    f.write_text(json.dumps({"model": "recursive"}))
    assert file_hash(f) == content_hash(f.read_bytes())


def test_load_json_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_json(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_json(bad)
