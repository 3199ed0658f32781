"""JSON and CSV emission for run reports.

Floats are written with 17 significant digits so that every value read back
is bit-identical to the one computed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

SCHEMA = "semigeo.run-report"
SCHEMA_VERSION = 1

VERDICT_HEADER = ("kernel_index", "candidate_index", "pairing")
SWEEP_HEADER = ("eps", "kernel_dim", "min_abs_lambda", "residual", "status")
HYPERBOLIC_HEADER = ("row", "n", "sup_ratio", "epsilon", "b", "verdict")


class ReportIOError(OSError):
    code = "io-error"


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(k) + ": ")
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _scalar(v):
    if v is None or isinstance(v, (bool, str)):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt_float(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(report: dict, indent: int = 2) -> str:
    out = []
    _encode(_plain(report), indent, 0, out)
    return "".join(out) + "\n"


def loads(text: str) -> dict:
    return json.loads(text)


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, float) else ("" if v is None else v) for v in row])
    return buf.getvalue()


def verdict_csv(verdict: dict) -> str:
    P = verdict["matrix"]
    rows = [(i, j, float(P[i][j])) for i in range(len(P)) for j in range(len(P[i]))]
    return _csv_text(VERDICT_HEADER, rows)


def sweep_csv(rows: list) -> str:
    return _csv_text(SWEEP_HEADER, [(float(r["eps"]), r["kernel_dim"],
                                     None if r["min_abs_lambda"] is None else float(r["min_abs_lambda"]),
                                     None if r["residual"] is None else float(r["residual"]),
                                     r["status"]) for r in rows])


def hyperbolic_csv(h: dict) -> str:
    rows = [("strip", s["n"], float(s["sup_ratio"]), None, None, None) for s in h["strips"]]
    rows.append(("summary", None, None, float(h["epsilon"]), float(h["b"]), h["verdict"]))
    return _csv_text(HYPERBOLIC_HEADER, rows)


def csv_tables(report: dict) -> dict:
    """File suffix → CSV text for every table present in the report."""
    tables = {}
    stages = report.get("stages", {})
    surj = stages.get("surjectivity", {})
    for cls, v in surj.get("classes", {}).items():
        if "matrix" in v:
            tables[f"verdict-{cls}"] = verdict_csv(v)
    sweep = stages.get("sweep", {})
    if "rows" in sweep:
        tables["sweep"] = sweep_csv(sweep["rows"])
    hyp = stages.get("hyperbolic", {})
    if "check" in hyp:
        tables["hyperbolic"] = hyperbolic_csv(hyp["check"])
    return tables


def emit_report(report: dict, out_dir, fmt: str = "json") -> list:
    """Write the report into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    name = report["scenario"]["name"]
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if fmt == "json":
            path = out / f"{name}.json"
            path.write_text(dumps(report), encoding="utf-8")
            written.append(path)
        elif fmt == "csv":
            for suffix, text in csv_tables(report).items():
                path = out / f"{name}-seed{report['seed']}-{suffix}.csv"
                path.write_text(text, encoding="utf-8")
                written.append(path)
        else:
            raise ValueError(f"unknown format {fmt!r}")
        return written
    except OSError as exc:
        raise ReportIOError(f"io-error: cannot write to {out}: {exc.strerror or exc}") from None
