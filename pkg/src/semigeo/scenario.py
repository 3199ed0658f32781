"""Scenario files: TOML documents with a fixed set of sections and keys.

Grammar (all sections optional except where noted)::

    name = "sphere-conjugate"          # required, [a-z0-9-]+
    description = "..."
    seed = 42                          # integer, recorded in every output
    stages = ["geodesic", ...]         # default: every stage the file has inputs for

    [metric]                           # required; see metric_from_spec
    [endpoints]   p, q, v_guess, allow_equal
    [initial]     x0, v0               # alternative to [endpoints]
    [grid]        m, kernel_tol, spatial_tol, quadrature_tol, conjugate_tol
    [perturbation] classes, candidates, random_candidates, tube_radius, amplitude, power,
                  half_width
    [sweep]       eps
    [conformal]   count, m
    [hyperbolic]  base_point, sigma_lower, sigma_upper, sigma_points, n_max,
                  s_per_unit, lipschitz_samples
    [outputs]     dir
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .metrics import MetricFamily, metric_from_spec

STAGES = ("geodesic", "conjugate", "index_form", "kernel", "surjectivity", "sweep",
          "conformal", "hyperbolic", "counterexample")
PERTURBATION_CLASSES = ("general", "conformal", "split", "stationary")

_SCHEMA = {
    "": {"name", "description", "seed", "stages", "metric", "endpoints", "initial", "grid",
         "perturbation", "sweep", "conformal", "hyperbolic", "outputs"},
    "endpoints": {"p", "q", "v_guess", "allow_equal"},
    "initial": {"x0", "v0"},
    "grid": {"m", "kernel_tol", "spatial_tol", "quadrature_tol", "conjugate_tol"},
    "perturbation": {"classes", "candidates", "random_candidates", "tube_radius", "amplitude", "power",
                     "half_width"},
    "sweep": {"eps"},
    "conformal": {"count", "m"},
    "hyperbolic": {"base_point", "sigma_lower", "sigma_upper", "sigma_points", "n_max",
                   "s_per_unit", "lipschitz_samples"},
    "outputs": {"dir"},
}
METRIC_KEYS = {"kind", "dim", "params", "periods", "domain", "n0", "beta", "delta", "g0", "alpha",
               "base", "psi"}

GRID_DEFAULTS = {"m": 64, "kernel_tol": 1e-2, "spatial_tol": 1e-6, "quadrature_tol": 1e-9,
                 "conjugate_tol": 1e-6}
PERTURBATION_DEFAULTS = {"classes": ["general"], "candidates": 1, "random_candidates": 0, "tube_radius": 0.3,
                         "amplitude": 1.0, "power": 2, "half_width": 0.1}


@dataclass
class Scenario:
    name: str
    metric: MetricFamily
    raw: dict
    seed: int = 0
    description: str = ""
    stages: tuple = ()
    endpoints: dict | None = None
    initial: dict | None = None
    grid: dict = field(default_factory=lambda: dict(GRID_DEFAULTS))
    perturbation: dict = field(default_factory=lambda: dict(PERTURBATION_DEFAULTS))
    eps: list = field(default_factory=list)
    conformal: dict | None = None
    hyperbolic: dict | None = None
    out_dir: str = "out"
    source: str | None = None

    def echo(self) -> dict:
        """The scenario as it will be run (after defaults and overrides)."""
        out = {"name": self.name, "description": self.description, "seed": self.seed,
               "stages": list(self.stages), "metric": self.raw["metric"], "grid": self.grid,
               "perturbation": self.perturbation, "sweep": {"eps": list(self.eps)}}
        for key in ("endpoints", "initial", "conformal", "hyperbolic"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out


def _check_keys(section: str, table: dict):
    allowed = _SCHEMA[section]
    for key in table:
        if key not in allowed:
            where = f"{section}.{key}" if section else key
            raise ValidationError(where, "unknown key")


def _vector(section, key, value, dim):
    name = f"{section}.{key}"
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                              for v in value):
        raise ValidationError(name, "expected a list of numbers")
    if dim is not None and len(value) != dim:
        raise ValidationError(name, f"expected {dim} components, got {len(value)}")
    return [float(v) for v in value]


def _positive(name, value, integer=False):
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok or not value > 0:
        raise ValidationError(name, "must be a positive " + ("integer" if integer else "number"))
    return int(value) if integer else float(value)


def parse_text(text: str, source: str | None = None) -> Scenario:
    if not text.strip():
        raise ParseError("empty scenario file", 1, 1)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(getattr(exc, "msg", str(exc)), getattr(exc, "lineno", None),
                         getattr(exc, "colno", None)) from None
    return validate(doc, source)


def parse_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError("path", f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, str(path))


def validate(doc: dict, source: str | None = None) -> Scenario:
    _check_keys("", doc)
    for section in _SCHEMA:
        if section and section in doc:
            if not isinstance(doc[section], dict):
                raise ValidationError(section, "must be a table")
            _check_keys(section, doc[section])
    name = doc.get("name")
    if not isinstance(name, str) or not re.fullmatch(r"[a-z0-9][a-z0-9-]*", name):
        raise ValidationError("name", "required; lowercase letters, digits and dashes")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("seed", "must be a non-negative integer")
    if "metric" not in doc or not isinstance(doc["metric"], dict):
        raise ValidationError("metric", "required table")
    for key in doc["metric"]:
        if key not in METRIC_KEYS:
            raise ValidationError(f"metric.{key}", "unknown key")
    try:
        metric = metric_from_spec(doc["metric"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("metric", str(exc)) from None
    dim = metric.dim

    grid = dict(GRID_DEFAULTS)
    for key, value in doc.get("grid", {}).items():
        grid[key] = _positive(f"grid.{key}", value, integer=(key == "m"))
    if grid["m"] < 16:
        raise ValidationError("grid.m", "must be at least 16")

    endpoints = initial = None
    if "endpoints" in doc:
        e = doc["endpoints"]
        for key in ("p", "q"):
            if key not in e:
                raise ValidationError(f"endpoints.{key}", "required")
        p = _vector("endpoints", "p", e["p"], dim)
        q = _vector("endpoints", "q", e["q"], dim)
        vg = _vector("endpoints", "v_guess", e.get("v_guess", list(np.subtract(q, p))), dim)
        allow = e.get("allow_equal", False)
        if not isinstance(allow, bool):
            raise ValidationError("endpoints.allow_equal", "must be true or false")
        if p == q and not allow:
            raise ValidationError("endpoints", "p equals q; set allow_equal = true to run anyway")
        endpoints = {"p": p, "q": q, "v_guess": vg, "allow_equal": allow}
    if "initial" in doc:
        if endpoints is not None:
            raise ValidationError("initial", "give either [endpoints] or [initial], not both")
        i = doc["initial"]
        for key in ("x0", "v0"):
            if key not in i:
                raise ValidationError(f"initial.{key}", "required")
        initial = {"x0": _vector("initial", "x0", i["x0"], dim),
                   "v0": _vector("initial", "v0", i["v0"], dim)}

    pert = dict(PERTURBATION_DEFAULTS)
    for key, value in doc.get("perturbation", {}).items():
        if key == "classes":
            if not isinstance(value, list) or not value or any(v not in PERTURBATION_CLASSES for v in value):
                raise ValidationError("perturbation.classes",
                                      f"non-empty list drawn from {', '.join(PERTURBATION_CLASSES)}")
            pert[key] = list(value)
        elif key == "random_candidates":
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValidationError("perturbation.random_candidates", "must be a non-negative integer")
            pert[key] = value
        else:
            pert[key] = _positive(f"perturbation.{key}", value,
                                  integer=key in ("candidates", "power"))

    eps = []
    if "sweep" in doc:
        eps = _vector("sweep", "eps", doc["sweep"].get("eps", []), None)

    conformal = None
    if "conformal" in doc:
        c = doc["conformal"]
        conformal = {"count": _positive("conformal.count", c.get("count", 3), integer=True),
                     "m": _positive("conformal.m", c.get("m", grid["m"]), integer=True)}
        if initial is None:
            raise ValidationError("conformal", "needs [initial] with a lightlike v0")

    hyper = None
    if "hyperbolic" in doc:
        if metric.kind != "g-alpha-beta":
            raise ValidationError("hyperbolic", "needs a g-alpha-beta metric")
        h = doc["hyperbolic"]
        k = metric.dim - 1
        hyper = {
            "base_point": _vector("hyperbolic", "base_point", h.get("base_point", [0.0] * k), k),
            "sigma_lower": _vector("hyperbolic", "sigma_lower", h.get("sigma_lower", [-1.0] * k), k),
            "sigma_upper": _vector("hyperbolic", "sigma_upper", h.get("sigma_upper", [1.0] * k), k),
            "sigma_points": _positive("hyperbolic.sigma_points", h.get("sigma_points", 21), integer=True),
            "n_max": _positive("hyperbolic.n_max", h.get("n_max", 3), integer=True),
            "s_per_unit": _positive("hyperbolic.s_per_unit", h.get("s_per_unit", 4), integer=True),
            "lipschitz_samples": _positive("hyperbolic.lipschitz_samples",
                                           h.get("lipschitz_samples", 1000), integer=True),
        }

    stages = doc.get("stages")
    if stages is None:
        stages = []
        if endpoints or initial:
            stages += ["geodesic", "conjugate"]
            if endpoints:
                stages += ["index_form", "kernel", "surjectivity"]
                if eps:
                    stages.append("sweep")
        if conformal:
            stages.append("conformal")
        if hyper:
            stages.append("hyperbolic")
    else:
        if not isinstance(stages, list) or any(s not in STAGES for s in stages):
            raise ValidationError("stages", f"list drawn from {', '.join(STAGES)}")
    needs_curve = {"geodesic", "conjugate", "index_form", "kernel", "surjectivity", "sweep"}
    if needs_curve & set(stages) and not (endpoints or initial):
        raise ValidationError("endpoints", "required by the requested stages")
    if "counterexample" in stages and metric.kind != "standard-stationary":
        raise ValidationError("stages", "counterexample needs a standard-stationary metric")

    out_dir = doc.get("outputs", {}).get("dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ValidationError("outputs.dir", "must be a non-empty string")
    desc = doc.get("description", "")
    if not isinstance(desc, str):
        raise ValidationError("description", "must be a string")
    return Scenario(name=name, metric=metric, raw=doc, seed=seed, description=desc,
                    stages=tuple(stages), endpoints=endpoints, initial=initial, grid=grid,
                    perturbation=pert, eps=eps, conformal=conformal, hyperbolic=hyper,
                    out_dir=out_dir, source=source)


def scenario_dir() -> Path:
    return Path(__file__).resolve().parent / "scenarios"


def list_scenarios() -> list:
    """Names of the scenarios shipped with the package."""
    return sorted(p.stem for p in scenario_dir().glob("*.toml"))


def shipped_scenario(name: str) -> Scenario:
    path = scenario_dir() / f"{name}.toml"
    if not path.exists():
        raise ValidationError("scenario", f"no shipped scenario named {name!r}")
    return parse_scenario(path)
