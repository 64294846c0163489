"""Experiment configuration: JSON schema, validation, normalisation and hashing.

A configuration is a JSON object; every field below is optional except
``variance``::

    {
      "mean":      {"family": "polynomial", "coeffs": [0, 0, 0.5]},
      "variance":  {"family": "linear", "alpha": 1.0},
      "T": 1.0,
      "grid_n": 512,
      "atoms": [{"weight": [0.6, 0.3], "density": {"family": "constant", "c": 1.0}}],
      "operator": {"kind": "theta", "vartheta": "b" | "-b" | "sine"}
                | {"kind": "theta", "theta": <function>}
                | {"kind": "pair", "A1": <function>, "A2": <function>},
      "directions": {"g": <function>, "g1": <function>, "g2": <function>},
      "w0": <function>,
      "q": [1, -1],
      "q0": 0.5,
      "lambdas": [[1, 1], [2, 2], [4, 4]],
      "rho": [2, 0.5],
      "N": 100000,
      "seed": 20240101,
      "simulator": {"kind": "increments" | "series", "M": 256},
      "tolerances": {"rel_tol": 1e-9, "z_max": 4.0, "exact_tol": 1e-12},
      "suites": ["translation", "parts", ...]
    }

A ``<function>`` is ``{"family": name, ...params}`` with families zero,
constant (c), linear (alpha), polynomial (coeffs, ascending) and sine
(amplitude, frequency, phase, inner).  ``inner`` may be ``"b"`` to compose
with the variance function.  Functions given for atoms, directions and w0
are densities Dw.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import CabSpace, HPrimeElement, MeanVarPair, TimeGrid
from .errors import ConfigError, GbmFeynmanError
from .fresnel import IDENTITY, ZERO, DiscreteMeasure, FeynmanParams, MultiplicationOperator, OperatorPair, ThetaOperator
from .functions import Constant, Linear, ParametricFunction, Polynomial, ScaledSine, Zero
from .variation import DirectionPair, sine_vartheta

__all__ = [
    "SUITES",
    "ExperimentConfig",
    "build",
    "canonical_json",
    "normalize",
    "config_hash",
    "load_config",
    "resolve_config_path",
    "preset_names",
]

SUITES = ("translation", "parts", "parts-scaled", "continuation", "cs-feynman", "final-display")

_DEFAULTS = {
    "mean": {"family": "zero"},
    "T": 1.0,
    "grid_n": 512,
    "atoms": None,
    "operator": {"kind": "pair", "A1": {"family": "constant", "c": 1.0}, "A2": {"family": "zero"}},
    "directions": {"g": {"family": "constant", "c": 1.0}},
    "w0": {"family": "constant", "c": 0.5},
    "q": [1.0, -1.0],
    "q0": None,
    "lambdas": [[1.0, 1.0], [2.0, 2.0], [4.0, 4.0]],
    "rho": [2.0, 0.5],
    "N": 100000,
    "seed": 0,
    "simulator": {"kind": "increments", "M": 256},
    "tolerances": {"rel_tol": 1e-9, "z_max": 4.0, "exact_tol": 1e-12},
    "suites": list(SUITES),
}

_FAMILY_PARAMS = {
    "zero": {},
    "constant": {"c": 0.0},
    "linear": {"alpha": 1.0},
    "polynomial": {"coeffs": [0.0]},
    "sine": {"amplitude": 1.0, "frequency": 1.0, "phase": 0.0, "inner": None},
}

_VARTHETA_NAMES = ("b", "-b", "sine")


def _fail(field: str, msg: str):
    raise ConfigError(f"{field}: {msg}")


def _num(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(field, f"expected a number, got {value!r}")
    return float(value)


def _norm_function(spec, field: str):
    if not isinstance(spec, dict) or "family" not in spec:
        _fail(field, "expected an object with a 'family' key")
    fam = spec["family"]
    if fam not in _FAMILY_PARAMS:
        _fail(field, f"unknown family {fam!r} (known: {', '.join(_FAMILY_PARAMS)})")
    unknown = set(spec) - {"family"} - set(_FAMILY_PARAMS[fam])
    if unknown:
        _fail(field, f"unexpected keys {sorted(unknown)} for family {fam!r}")
    out = {"family": fam}
    for key, default in _FAMILY_PARAMS[fam].items():
        value = spec.get(key, default)
        if key == "coeffs":
            if not isinstance(value, list) or not value:
                _fail(f"{field}.coeffs", "expected a nonempty list of numbers")
            value = [_num(v, f"{field}.coeffs") for v in value]
        elif key == "inner":
            if value is not None and value != "b":
                value = _norm_function(value, f"{field}.inner")
        else:
            value = _num(value, f"{field}.{key}")
        out[key] = value
    return out


def _norm_operator(spec) -> dict:
    if not isinstance(spec, dict) or spec.get("kind") not in ("theta", "pair"):
        _fail("operator", "expected {'kind': 'theta' | 'pair', ...}")
    if spec["kind"] == "pair":
        return {
            "kind": "pair",
            "A1": _norm_function(spec.get("A1", {"family": "zero"}), "operator.A1"),
            "A2": _norm_function(spec.get("A2", {"family": "zero"}), "operator.A2"),
        }
    if ("vartheta" in spec) == ("theta" in spec):
        _fail("operator", "a theta operator needs exactly one of 'vartheta' or 'theta'")
    if "vartheta" in spec:
        if spec["vartheta"] not in _VARTHETA_NAMES:
            _fail("operator.vartheta", f"expected one of {_VARTHETA_NAMES}")
        return {"kind": "theta", "vartheta": spec["vartheta"]}
    return {"kind": "theta", "theta": _norm_function(spec["theta"], "operator.theta")}


def _norm_pair_list(value, field: str) -> list[float]:
    if not isinstance(value, list) or len(value) != 2:
        _fail(field, "expected a list of two numbers")
    return [_num(v, field) for v in value]


def normalize(raw: dict) -> dict:
    """Fill defaults, coerce numbers and check the schema (no numerics yet).

    The result is idempotent: ``normalize(normalize(c)) == normalize(c)``.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - set(_DEFAULTS) - {"variance"}
    if unknown:
        _fail(sorted(unknown)[0], "unknown configuration field")
    if "variance" not in raw:
        _fail("variance", "required field is missing")
    cfg = copy.deepcopy(_DEFAULTS)
    cfg.update(copy.deepcopy(raw))
    out: dict = {}
    out["mean"] = _norm_function(cfg["mean"], "mean")
    out["variance"] = _norm_function(cfg["variance"], "variance")
    out["T"] = _num(cfg["T"], "T")
    if out["T"] <= 0:
        _fail("T", "horizon must be positive")
    n = cfg["grid_n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        _fail("grid_n", "expected an integer >= 2")
    out["grid_n"] = n

    atoms = cfg["atoms"]
    if atoms is None:
        atoms = [{"weight": [1.0, 0.0], "density": {"family": "zero"}}]
    if not isinstance(atoms, list) or not atoms:
        _fail("atoms", "the measure needs at least one atom")
    out["atoms"] = []
    for i, atom in enumerate(atoms):
        if not isinstance(atom, dict) or set(atom) != {"weight", "density"}:
            _fail(f"atoms[{i}]", "expected {'weight': [re, im], 'density': <function>}")
        out["atoms"].append(
            {
                "weight": _norm_pair_list(atom["weight"], f"atoms[{i}].weight"),
                "density": _norm_function(atom["density"], f"atoms[{i}].density"),
            }
        )

    out["operator"] = _norm_operator(cfg["operator"])
    dirs = cfg["directions"]
    if not isinstance(dirs, dict) or "g" not in dirs or set(dirs) - {"g", "g1", "g2"}:
        _fail("directions", "expected {'g': <function>} with optional 'g1', 'g2'")
    out["directions"] = {k: _norm_function(v, f"directions.{k}") for k, v in sorted(dirs.items())}
    out["w0"] = _norm_function(cfg["w0"], "w0")

    out["q"] = _norm_pair_list(cfg["q"], "q")
    if 0.0 in out["q"]:
        _fail("q", "Feynman parameters must be nonzero")
    out["q0"] = None if cfg["q0"] is None else _num(cfg["q0"], "q0")
    if out["q0"] is not None and out["q0"] <= 0:
        _fail("q0", "must be positive")
    if not isinstance(cfg["lambdas"], list) or not cfg["lambdas"]:
        _fail("lambdas", "expected a nonempty list of pairs")
    out["lambdas"] = [_norm_pair_list(v, "lambdas") for v in cfg["lambdas"]]
    if any(v <= 0 for pair in out["lambdas"] for v in pair):
        _fail("lambdas", "entries must be positive")
    out["rho"] = _norm_pair_list(cfg["rho"], "rho")
    if any(v <= 0 for v in out["rho"]):
        _fail("rho", "entries must be positive")

    N = cfg["N"]
    if isinstance(N, bool) or not isinstance(N, int) or N < 1:
        _fail("N", "expected a positive integer")
    out["N"] = N
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        _fail("seed", "expected an unsigned 64-bit integer")
    out["seed"] = seed

    sim = cfg["simulator"]
    if not isinstance(sim, dict) or sim.get("kind", "increments") not in ("increments", "series"):
        _fail("simulator", "kind must be 'increments' or 'series'")
    M = sim.get("M", 256)
    if isinstance(M, bool) or not isinstance(M, int) or M < 1:
        _fail("simulator.M", "expected a positive integer")
    out["simulator"] = {"kind": sim.get("kind", "increments"), "M": M}

    tol = cfg["tolerances"]
    if not isinstance(tol, dict) or set(tol) - set(_DEFAULTS["tolerances"]):
        _fail("tolerances", f"allowed keys are {sorted(_DEFAULTS['tolerances'])}")
    merged = dict(_DEFAULTS["tolerances"], **tol)
    out["tolerances"] = {k: _num(v, f"tolerances.{k}") for k, v in sorted(merged.items())}

    suites = cfg["suites"]
    if not isinstance(suites, list) or any(s not in SUITES for s in suites):
        _fail("suites", f"entries must be among {SUITES}")
    out["suites"] = [s for s in SUITES if s in suites]
    return out


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical form; insensitive to whitespace and key order."""
    return hashlib.sha256(canonical_json(normalize(cfg)).encode()).hexdigest()


def _build_function(spec: dict, b: ParametricFunction | None) -> ParametricFunction:
    fam = spec["family"]
    if fam == "zero":
        return Zero()
    if fam == "constant":
        return Zero() if spec["c"] == 0.0 else Constant(spec["c"])
    if fam == "linear":
        return Linear(spec["alpha"])
    if fam == "polynomial":
        return Polynomial(tuple(spec["coeffs"]))
    inner = spec["inner"]
    if inner == "b":
        inner = b
    elif inner is not None:
        inner = _build_function(inner, b)
    return ScaledSine(spec["amplitude"], spec["frequency"], spec["phase"], inner)


@dataclass
class ExperimentConfig:
    """A validated configuration turned into model objects."""

    config: dict
    grid: TimeGrid
    pair: MeanVarPair
    measure: DiscreteMeasure
    ops: OperatorPair
    theta: ThetaOperator | None
    vartheta_name: str | None
    g: HPrimeElement
    dirs: DirectionPair
    w0: HPrimeElement
    params: FeynmanParams

    @property
    def q0(self) -> float:
        q0 = self.config["q0"]
        return 0.5 * min(abs(v) for v in self.params.q) if q0 is None else q0



def _element(spec, b, label="") -> HPrimeElement:
    return HPrimeElement(_build_function(spec, b), label)


def build(cfg: dict) -> ExperimentConfig:
    """Construct model objects, re-raising numerical validation errors as ConfigError."""
    grid = TimeGrid.uniform(cfg["T"], cfg["grid_n"])
    a = _build_function(cfg["mean"], None)
    b = _build_function(cfg["variance"], None)
    pair = MeanVarPair(a, b)
    try:
        pair.validate(grid)
    except (GbmFeynmanError, ValueError) as exc:
        field = "mean" if "a(0)" in str(exc) or "mean" in str(exc) else "variance"
        _fail(field, str(exc))

    atoms = tuple(
        (complex(*atom["weight"]), _element(atom["density"], b, f"w{i}")) for i, atom in enumerate(cfg["atoms"])
    )
    measure = DiscreteMeasure(atoms)
    op = cfg["operator"]
    theta = None
    vname = None
    if op["kind"] == "theta":
        if "vartheta" in op:
            vname = op["vartheta"]
            if vname == "sine":
                vartheta = sine_vartheta(b, grid)
            else:
                vartheta = HPrimeElement(Constant(1.0 if vname == "b" else -1.0), vname)
        else:
            vartheta = _element(op["theta"], b, "vartheta")
        theta = ThetaOperator(vartheta)
        ops = theta.pair()
    else:
        A = [_build_function(op[k], b) for k in ("A1", "A2")]
        mk = [
            IDENTITY if isinstance(f, Constant) and f.c == 1.0 else ZERO if isinstance(f, Zero) else MultiplicationOperator(f, k)
            for f, k in zip(A, ("A1", "A2"))
        ]
        ops = OperatorPair(*mk)
    try:
        ops.check_nonnegative(grid)
    except GbmFeynmanError as exc:
        _fail("operator", str(exc))

    d = cfg["directions"]
    g = _element(d["g"], b, "g")
    if "g1" in d or "g2" in d:
        zero = HPrimeElement(Zero())
        dirs = DirectionPair(
            _element(d["g1"], b, "g1") if "g1" in d else zero,
            _element(d["g2"], b, "g2") if "g2" in d else zero,
        )
    elif theta is not None:
        dirs = DirectionPair(theta.A_plus_half.apply(g), -theta.A_minus_half.apply(g))
    else:
        dirs = DirectionPair(g, g)
    params = FeynmanParams(*cfg["q"])
    # evaluating densities once surfaces non-finite parameters early
    CabSpace(pair, grid, validate=False)
    return ExperimentConfig(cfg, grid, pair, measure, ops, theta, vname, g, dirs, _element(cfg["w0"], b, "w0"), params)


def preset_names() -> list[str]:
    root = resources.files("gbmfeynman") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config_path(name: str) -> Path | None:
    """A file path, or the bundled preset whose stem matches ``name``."""
    p = Path(name)
    if p.is_file():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    candidate = resources.files("gbmfeynman") / "presets" / f"{stem}.json"
    if candidate.is_file():
        return Path(str(candidate))
    return None


def load_config(name: str, seed_override: int | None = None, min_N: int = 100) -> ExperimentConfig:
    """Read, normalise, apply the seed override and build the experiment.

    The seed comes from ``seed_override`` if given, else the ``GBMF_SEED``
    environment variable, else the file.
    """
    path = resolve_config_path(name)
    if path is None:
        raise ConfigError(f"config: no such file or preset {name!r}")
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc
    cfg = normalize(raw)
    env = os.environ.get("GBMF_SEED")
    if seed_override is None and env not in (None, ""):
        try:
            seed_override = int(env)
        except ValueError:
            raise ConfigError("GBMF_SEED: expected an unsigned 64-bit integer") from None
    if seed_override is not None:
        cfg["seed"] = seed_override
        cfg = normalize(cfg)
    if cfg["N"] < min_N:
        _fail("N", f"must be >= {min_N}")
    return build(cfg)
