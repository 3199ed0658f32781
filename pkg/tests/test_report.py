import math

import numpy as np

from semigeo.report import SWEEP_HEADER, VERDICT_HEADER, dumps, hyperbolic_csv, loads, sweep_csv, verdict_csv


def test_roundtrip_is_exact():
    rng = np.random.default_rng(0)
    rep = {"schema_version": 1, "values": rng.normal(size=7) * 10.0 ** rng.integers(-20, 20, 7),
           "nested": {"a": [1, 2.5, None, True, "x"], "b": np.float64(1 / 3)}, "empty": []}
    back = loads(dumps(rep))
    assert back["values"] == rep["values"].tolist()
    assert back["nested"]["b"] == 1 / 3
    assert back == loads(dumps(back))


def test_non_finite_tokens():
    back = loads(dumps({"a": [math.nan, math.inf, -math.inf]}))
    assert math.isnan(back["a"][0]) and back["a"][1:] == [math.inf, -math.inf]


def test_csv_headers():
    assert verdict_csv({"matrix": [[0.5, 0.0]]}).splitlines()[0] == ",".join(VERDICT_HEADER)
    rows = [{"eps": 0.01, "kernel_dim": 0, "min_abs_lambda": 1e-3, "residual": 0.0, "status": "ok"}]
    assert sweep_csv(rows).splitlines() == [",".join(SWEEP_HEADER), "0.01,0,0.001,0,ok"]
    text = hyperbolic_csv({"strips": [{"n": 1, "sup_ratio": 0.5}], "epsilon": 2.0, "b": 1.0,
                           "verdict": "criterion-satisfied-on-sample"})
    assert text.splitlines()[-1] == "summary,,,2,1,criterion-satisfied-on-sample"
