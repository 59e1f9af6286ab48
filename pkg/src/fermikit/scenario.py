"""Scenario files: parsing, validation and map construction.

A scenario is a JSON object::

    {"name": "...", "sites": 4, "subset": [1, 2], "iota": {"1": 3, "2": 4},
     "probabilities": {"": 0.25, "1": 0.25, "2": 0.25, "1,2": 0.25},
     "map": {"kind": "grading"}, "checks": ["fsqdb"], "tol": 1e-10, "seed": 42}

Complex matrices are nested arrays of ``[re, im]`` pairs on the full Fock
space.  Subset keys are comma-joined ascending site lists, ``""`` for the
empty set.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .car import FockSpace, LatticeState, parse_subset_key, subsets
from .duality import (conjugation_map, even_projection_map, grading_map, identity_map,
                      kraus_map, mixture_map, superop_map)
from .errors import FermikitError, ScenarioError

CHECKS = (
    "car-relations", "jkw-iso", "grading", "twisted-commutant", "bjl-duality",
    "cyclic-separating", "product-positivity", "gns", "modular", "diagonal-state",
    "dual", "twisted-dual", "double-dual", "fermionic-dual", "fsqdb", "theta-sqdb",
    "abstract-fsqdb",
)
MAP_KINDS = ("identity", "grading", "even-projection", "kraus", "superop", "conjugation", "mixture")
DEFAULT_TOL = 1e-10
DEFAULT_SEED = 42
MAX_SITES = 10


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    sites: int
    subset: tuple
    iota: dict
    probabilities: dict
    map_spec: dict
    checks: tuple
    tol: float = DEFAULT_TOL
    seed: int = DEFAULT_SEED
    report_facts: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def fs(self):
        return FockSpace(self.sites)

    def state(self):
        return LatticeState(self.subset, self.probabilities, self.iota)

    def digest(self):
        """SHA-256 of the canonical JSON form of the parsed scenario."""
        canon = {
            "name": self.name, "sites": self.sites, "subset": list(self.subset),
            "iota": {str(k): v for k, v in sorted(self.iota.items())},
            "probabilities": {",".join(map(str, k)): v for k, v in sorted(self.probabilities.items())},
            "map": self.map_spec, "checks": list(self.checks), "tol": self.tol,
            "seed": self.seed, "report_facts": self.report_facts,
        }
        text = json.dumps(canon, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _require(obj, key, path, types):
    if key not in obj:
        raise ScenarioError(f"{path}.{key}", "missing field")
    val = obj[key]
    if isinstance(val, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ScenarioError(f"{path}.{key}", f"expected {types}, got bool")
    if not isinstance(val, types):
        raise ScenarioError(f"{path}.{key}", f"expected {_type_name(types)}, got {type(val).__name__}")
    return val


def _type_name(types):
    if isinstance(types, tuple):
        return " or ".join(t.__name__ for t in types)
    return types.__name__


def parse_complex_matrix(data, path, d=None):
    """Nested ``[[ [re, im], ... ], ...]`` to a complex array."""
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ScenarioError(path, "expected a non-empty list of rows")
    rows = len(data)
    cols = len(data[0])
    out = np.zeros((rows, cols), dtype=complex)
    for i, row in enumerate(data):
        if len(row) != cols:
            raise ScenarioError(f"{path}[{i}]", f"row has {len(row)} entries, expected {cols}")
        for j, entry in enumerate(row):
            if (not isinstance(entry, list) or len(entry) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in entry)):
                raise ScenarioError(f"{path}[{i}][{j}]", "expected [re, im]")
            out[i, j] = complex(entry[0], entry[1])
    if d is not None and out.shape != (d, d):
        raise ScenarioError(path, f"matrix has shape {out.shape}, expected {(d, d)}")
    return out


def complex_matrix_to_json(m, digits=15):
    m = np.asarray(m, dtype=complex)
    return [[[_clean(z.real, digits), _clean(z.imag, digits)] for z in row] for row in m]


def _clean(v, digits):
    v = round(float(v), digits)
    return 0.0 if v == 0 else v


def _validate_map(spec, path, d):
    if not isinstance(spec, dict):
        raise ScenarioError(path, "expected an object")
    kind = spec.get("kind")
    if kind not in MAP_KINDS:
        raise ScenarioError(f"{path}.kind", f"expected one of {', '.join(MAP_KINDS)}")
    if kind == "kraus":
        mats = _require(spec, "matrices", path, list)
        if not mats:
            raise ScenarioError(f"{path}.matrices", "empty Kraus list")
        for i, m in enumerate(mats):
            parse_complex_matrix(m, f"{path}.matrices[{i}]", d)
    elif kind == "superop":
        parse_complex_matrix(_require(spec, "matrix", path, list), f"{path}.matrix", d * d)
    elif kind == "conjugation":
        u = parse_complex_matrix(_require(spec, "unitary", path, list), f"{path}.unitary", d)
        if np.linalg.norm(u.conj().T @ u - np.eye(d)) > 1e-9:
            raise ScenarioError(f"{path}.unitary", "matrix is not unitary")
    elif kind == "mixture":
        parts = _require(spec, "parts", path, list)
        if not parts:
            raise ScenarioError(f"{path}.parts", "empty mixture")
        for i, part in enumerate(parts):
            p = f"{path}.parts[{i}]"
            if not isinstance(part, dict):
                raise ScenarioError(p, "expected an object")
            _require(part, "weight", p, (int, float))
            _validate_map(_require(part, "map", p, dict), f"{p}.map", d)


def build_map(spec, alg, fs):
    """AlgebraMap on ``alg`` from a validated map specification."""
    kind = spec["kind"]
    d = fs.dim
    g = alg.grading
    if kind == "identity":
        return identity_map(alg)
    if kind == "grading":
        return grading_map(alg, g)
    if kind == "even-projection":
        return even_projection_map(alg, g)
    if kind == "kraus":
        return kraus_map(alg, [parse_complex_matrix(m, "map", d) for m in spec["matrices"]])
    if kind == "superop":
        return superop_map(alg, parse_complex_matrix(spec["matrix"], "map", d * d))
    if kind == "conjugation":
        return conjugation_map(alg, parse_complex_matrix(spec["unitary"], "map", d))
    return mixture_map([(float(p["weight"]), build_map(p["map"], alg, fs)) for p in spec["parts"]])


def parse_scenario(data, tol=None, seed=None):
    """Validate a decoded scenario object; command-line overrides win."""
    if not isinstance(data, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    name = data.get("name", "scenario")
    if not isinstance(name, str):
        raise ScenarioError("$.name", "expected a string")
    n = _require(data, "sites", "$", int)
    if not 1 <= n <= MAX_SITES:
        raise ScenarioError("$.sites", f"must be between 1 and {MAX_SITES}")
    subset = _require(data, "subset", "$", list)
    for i, l in enumerate(subset):
        if not isinstance(l, int) or isinstance(l, bool) or not 1 <= l <= n:
            raise ScenarioError(f"$.subset[{i}]", f"site must be an integer in 1..{n}")
    if list(subset) != sorted(set(subset)):
        raise ScenarioError("$.subset", "sites must be strictly increasing")
    iota_raw = _require(data, "iota", "$", dict)
    iota = {}
    for key, v in iota_raw.items():
        p = f"$.iota.{key}"
        try:
            k = int(key)
        except ValueError:
            raise ScenarioError(p, "key must be a site number") from None
        if k not in subset:
            raise ScenarioError(p, "key is not in the subset")
        if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= n:
            raise ScenarioError(p, f"image must be an integer in 1..{n}")
        if v in subset:
            raise ScenarioError(p, "image lies in the subset")
        iota[k] = v
    if set(iota) != set(subset):
        raise ScenarioError("$.iota", "must be defined on every site of the subset")
    if len(set(iota.values())) != len(iota):
        raise ScenarioError("$.iota", "not injective")
    probs_raw = _require(data, "probabilities", "$", dict)
    valid = set(subsets(subset))
    probs = {}
    for key, v in probs_raw.items():
        p = f"$.probabilities.{key!r}"
        try:
            s = parse_subset_key(key)
        except ValueError:
            raise ScenarioError(p, "malformed subset key") from None
        if s not in valid:
            raise ScenarioError(p, "key must list sites of the subset in ascending order")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v) or v < 0:
            raise ScenarioError(p, "probability must be a finite non-negative number")
        probs[s] = float(v)
    total = sum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise ScenarioError("$.probabilities", f"probabilities sum to {total!r}, not 1")
    map_spec = data.get("map", {"kind": "identity"})
    _validate_map(map_spec, "$.map", 1 << n)
    checks = _require(data, "checks", "$", list)
    for i, c in enumerate(checks):
        if c not in CHECKS:
            raise ScenarioError(f"$.checks[{i}]", f"unknown check {c!r}")
    if len(set(checks)) != len(checks):
        raise ScenarioError("$.checks", "duplicate check names")
    t = data.get("tol", DEFAULT_TOL) if tol is None else tol
    if not isinstance(t, (int, float)) or isinstance(t, bool) or not t > 0:
        raise ScenarioError("$.tol", "must be a positive number")
    sd = data.get("seed", DEFAULT_SEED) if seed is None else seed
    if not isinstance(sd, int) or isinstance(sd, bool) or not 0 <= sd < 2 ** 64:
        raise ScenarioError("$.seed", "must be an unsigned 64-bit integer")
    facts = data.get("report_facts", False)
    if not isinstance(facts, bool):
        raise ScenarioError("$.report_facts", "expected a boolean")
    return Scenario(name, n, tuple(subset), iota, probs, map_spec, tuple(checks),
                    float(t), int(sd), facts, data)


def load_scenario(path, tol=None, seed=None):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    return parse_scenario(data, tol, seed)


def demo_scenario(n=4, checks=CHECKS, map_spec=None):
    """Uniform state on the first half of an even chain copied onto the second half."""
    if n < 2 or n % 2:
        raise FermikitError("demo needs an even number of sites >= 2")
    h = n // 2
    subset = list(range(1, h + 1))
    ss = subsets(subset)
    data = {
        "name": f"demo-{n}site",
        "sites": n,
        "subset": subset,
        "iota": {str(l): l + h for l in subset},
        "probabilities": {",".join(map(str, s)): 1.0 / len(ss) for s in ss},
        "map": map_spec or {"kind": "grading"},
        "checks": list(checks),
    }
    return data


def perturbed_map_spec(n, delta=0.1, site=1):
    """``(1 - delta) even-projection + delta conjugation by a_l + a_l^+``."""
    from .car import annihilation, creation

    fs = FockSpace(n)
    u = annihilation(site, fs) + creation(site, fs)
    return {"kind": "mixture", "parts": [
        {"weight": 1.0 - delta, "map": {"kind": "even-projection"}},
        {"weight": delta, "map": {"kind": "conjugation", "unitary": complex_matrix_to_json(u)}},
    ]}


__all__ = [name for name in dir() if not name.startswith("_")]
