from __future__ import annotations

import importlib.util
import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent / "oracles"


def _flatten(d, prefix=""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _flatten(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def test_frozen_oracles_are_reproducible(monkeypatch, tmp_path):
    spec = importlib.util.spec_from_file_location("make_oracles", HERE / "make_oracles.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    monkeypatch.setattr(mod, "OUT", tmp_path / "derived_values.json")
    fresh = dict(_flatten(json.loads(json.dumps(mod.main()))))
    frozen = dict(_flatten(json.loads((HERE / "derived_values.json").read_text())))
    assert fresh.keys() == frozen.keys()
    for key, value in frozen.items():
        np.testing.assert_allclose(fresh[key], value, rtol=1e-12, atol=1e-15, err_msg=key)
