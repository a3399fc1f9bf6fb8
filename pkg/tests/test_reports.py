import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from radonlike.bilinear import complex_multiplication
from radonlike.reports import canonical_json, csv_text, decode_floats, load_schema, schema_names

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.floats(allow_nan=False) | st.text(max_size=5),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=4), inner, max_size=4),
    max_leaves=20,
)


def _same(a, b):
    if isinstance(a, float) and math.isinf(a):
        return a == b
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return a == b and type(a) is type(b)


def _has_inf_strings(v):
    if isinstance(v, str):
        return v in ("inf", "-inf", "nan")
    if isinstance(v, dict):
        return any(_has_inf_strings(x) for x in v.values())
    if isinstance(v, list):
        return any(_has_inf_strings(x) for x in v)
    return False


@given(json_values)
def test_canonical_json_round_trips(value):
    assume(not _has_inf_strings(value))
    text = canonical_json(value)
    assert text.endswith("\n") and "\n" not in text[:-1]
    back = json.loads(text)
    assert _same(decode_floats(back), value)
    assert canonical_json(back) == text


def test_canonical_format_details():
    assert canonical_json({"b": 1.0, "a": [1, True, None]}) == '{"a":[1,true,null],"b":1.0}\n'
    assert canonical_json([0.1, 1e-20, math.inf, -math.inf, math.nan]) == '[0.10000000000000001,9.9999999999999995e-21,"inf","-inf","nan"]\n'
    assert canonical_json({"x": np.float64(2.5), "y": np.int64(3), "z": np.bool_(False)}) == '{"x":2.5,"y":3,"z":false}\n'
    assert canonical_json(complex_multiplication()) == canonical_json(complex_multiplication().to_json())
    with pytest.raises(TypeError):
        canonical_json({1, 2})


def test_csv_cells():
    text = csv_text([("a", "b", "c", "d"), (True, 0.5, None, math.inf)])
    assert text == "a,b,c,d\ntrue,0.5,,inf\n"


def test_schemas_are_valid():
    names = schema_names()
    assert {"tensor", "feasible", "sublevel", "perturb", "bench", "f-eval"} <= set(names)
    for name in names:
        jsonschema.Draft202012Validator.check_schema(load_schema(name))


def test_tensor_schema_accepts_rationals():
    validator = jsonschema.Draft202012Validator(load_schema("tensor"))
    validator.validate({"n_in": 1, "n_out": 1, "coeffs": [[["1/3"]]]})
    validator.validate(complex_multiplication().to_json())
