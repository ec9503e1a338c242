"""Experiment configuration documents (JSON).

A document is a JSON object.  Matrices are row-major nested lists of
``[re, im]`` pairs.  Example::

    {
      "mode": "degenerate",
      "N": 4,
      "state": {"pseudopure": {"epsilon": 0.3, "n": 0}},
      "path": {"preset": "block-loop", "eta": 0.6, "omega": 1.3, "n": 0, "m": 1},
      "indices": [0, 1]
    }

:func:`parse_config` fills defaults and validates every cross-reference;
:func:`emit_config` writes the canonical form, which parses back to an
equal :class:`ExperimentConfig`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PhysicsError, SchemaError, ValidationError
from .evolution import DEFAULT_STEPS, UnitaryPath
from .linalg import DEGENERACY_TOL, MAX_DIM, NODAL_TOL, OrthonormalBasis, SpectralDensity
from .paths import block_loop, block_rotation, precession
from .pseudopure import PseudopureParams, pseudopure_density

MODES = ("pure", "mixed", "degenerate", "pseudopure-closed", "nodal-scan", "figure1", "interfere", "selftest")
PHASE_MODES = ("pure", "mixed", "degenerate")
PRESETS = ("block-rotation", "precession", "block-loop")
SELFTEST_CRITERIA = tuple(range(1, 11))

_TOP_KEYS = {"mode", "N", "state", "path", "indices", "grid", "tolerances", "seed", "require_defined",
             "output", "params", "scan", "figure1", "interfere", "selftest", "gauge_check"}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    N: int | None = None
    state: dict | None = None
    path: dict | None = None
    indices: tuple | None = None
    grid: int = DEFAULT_STEPS
    nodal_tol: float = NODAL_TOL
    degeneracy_tol: float = DEGENERACY_TOL
    seed: int | None = None
    require_defined: bool = False
    output: str = ""
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "grid": self.grid, "require_defined": self.require_defined,
             "tolerances": {"nodal": self.nodal_tol, "degeneracy": self.degeneracy_tol},
             "output": self.output}
        if self.N is not None:
            d["N"] = self.N
        if self.state is not None:
            d["state"] = self.state
        if self.path is not None:
            d["path"] = self.path
        if self.indices is not None:
            d["indices"] = list(self.indices)
        if self.seed is not None:
            d["seed"] = self.seed
        d.update(self.options)
        return d

    def digest(self) -> str:
        return hashlib.sha256(emit_config(self).encode()).hexdigest()


def emit_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


# -- field helpers ---------------------------------------------------------


class _Doc:
    """Source text plus a locator that maps a field name to its first line."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line_of(self, dotted: str) -> int | None:
        key = dotted.split(".")[-1].split("[")[0]
        needle = f'"{key}"'
        for i, line in enumerate(self.lines, 1):
            if needle in line:
                return i
        return None

    def error(self, field_name: str, message: str) -> SchemaError:
        return SchemaError(message, field=field_name, line=self.line_of(field_name))


def _get(doc: _Doc, obj: dict, key: str, where: str, kind, default=..., *, required_msg=None):
    name = f"{where}.{key}" if where else key
    if key not in obj:
        if default is ...:
            raise doc.error(name, required_msg or "required field is missing")
        return default
    value = obj[key]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise doc.error(name, f"expected an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise doc.error(name, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise doc.error(name, "expected a finite number")
    elif kind is bool:
        if not isinstance(value, bool):
            raise doc.error(name, f"expected true or false, got {value!r}")
    elif kind is str:
        if not isinstance(value, str):
            raise doc.error(name, f"expected a string, got {value!r}")
    elif kind is dict:
        if not isinstance(value, dict):
            raise doc.error(name, "expected an object")
    elif kind is list:
        if not isinstance(value, list):
            raise doc.error(name, "expected a list")
    return value


def _check_keys(doc: _Doc, obj: dict, allowed, where: str):
    for key in obj:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise doc.error(name, f"unknown field; expected one of {sorted(allowed)}")


def _matrix(doc: _Doc, value, name: str, dim: int | None) -> list:
    """Validate a ``[[[re, im], ...], ...]`` matrix and return it normalized to floats."""
    if not isinstance(value, list) or not value:
        raise doc.error(name, "matrix must be a non-empty list of rows")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != len(value):
            raise doc.error(name, f"row {i} must have {len(value)} entries")
        out_row = []
        for j, entry in enumerate(row):
            if (not isinstance(entry, list) or len(entry) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)):
                raise doc.error(name, f"entry ({i}, {j}) must be a [re, im] pair of numbers")
            out_row.append([float(entry[0]), float(entry[1])])
        rows.append(out_row)
    if dim is not None and len(rows) != dim:
        raise doc.error(name, f"matrix is {len(rows)}x{len(rows)} but N = {dim}")
    return rows


def matrix_from_pairs(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def matrix_to_pairs(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _index(doc, obj, key, where, N):
    v = _get(doc, obj, key, where, int)
    if N is not None and not 0 <= v < N:
        raise doc.error(f"{where}.{key}", f"index {v} out of range for N = {N}")
    return v


def _linspace_spec(doc, obj, where) -> dict:
    _check_keys(doc, obj, {"start", "stop", "num"}, where)
    spec = {"start": _get(doc, obj, "start", where, float), "stop": _get(doc, obj, "stop", where, float),
            "num": _get(doc, obj, "num", where, int)}
    if spec["num"] < 2:
        raise doc.error(f"{where}.num", "a scan axis needs at least 2 points")
    return spec


# -- sections --------------------------------------------------------------


def _parse_state(doc: _Doc, obj: dict, N: int, mode: str) -> dict:
    where = "state"
    forms = [k for k in ("eigenvalues", "matrix", "pseudopure", "basis") if k in obj]
    _check_keys(doc, obj, {"eigenvalues", "matrix", "pseudopure", "basis"}, where)
    if len(forms) != 1:
        raise doc.error(where, "give exactly one of 'eigenvalues', 'matrix', 'pseudopure', 'basis'")
    form = forms[0]
    if mode == "pure" and form != "basis":
        raise doc.error(where, "pure mode takes a 'basis' state specification")
    if mode != "pure" and form == "basis":
        raise doc.error(where, f"mode {mode!r} needs a density operator, not a basis")
    if form == "eigenvalues":
        vals = _get(doc, obj, "eigenvalues", where, list)
        if len(vals) != N:
            raise doc.error("state.eigenvalues", f"expected {N} eigenvalues, got {len(vals)}")
        out = []
        for v in vals:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise doc.error("state.eigenvalues", f"expected numbers, got {v!r}")
            out.append(float(v))
        return {"eigenvalues": out}
    if form == "pseudopure":
        pp = _get(doc, obj, "pseudopure", where, dict)
        _check_keys(doc, pp, {"epsilon", "n"}, "state.pseudopure")
        return {"pseudopure": {"epsilon": _get(doc, pp, "epsilon", "state.pseudopure", float),
                               "n": _index(doc, pp, "n", "state.pseudopure", N) if "n" in pp else 0}}
    return {form: _matrix(doc, obj[form], f"state.{form}", N)}


def _parse_path(doc: _Doc, obj: dict, N: int) -> dict:
    where = "path"
    if ("schedule" in obj) == ("preset" in obj):
        raise doc.error(where, "give exactly one of 'schedule' or 'preset'")
    if "schedule" in obj:
        _check_keys(doc, obj, {"schedule"}, where)
        items = _get(doc, obj, "schedule", where, list)
        if not items:
            raise doc.error("path.schedule", "schedule is empty")
        out = []
        for i, item in enumerate(items):
            name = f"path.schedule[{i}]"
            if not isinstance(item, dict):
                raise doc.error(name, "schedule entries are objects with t_start, t_end, H")
            _check_keys(doc, item, {"t_start", "t_end", "H"}, name)
            out.append({"t_start": _get(doc, item, "t_start", name, float),
                        "t_end": _get(doc, item, "t_end", name, float),
                        "H": _matrix(doc, _get(doc, item, "H", name, list), f"{name}.H", N)})
        return {"schedule": out}
    preset = _get(doc, obj, "preset", where, str)
    if preset not in PRESETS:
        raise doc.error("path.preset", f"unknown preset {preset!r}; expected one of {list(PRESETS)}")
    common = {"n": _index(doc, obj, "n", where, N) if "n" in obj else 0,
              "m": _index(doc, obj, "m", where, N) if "m" in obj else 1,
              "duration": _get(doc, obj, "duration", where, float, 1.0)}
    if common["n"] == common["m"]:
        raise doc.error("path.m", "preset levels n and m must differ")
    if N is not None and N < 2:
        raise doc.error("N", "presets need N >= 2")
    if preset == "block-rotation":
        _check_keys(doc, obj, {"preset", "n", "m", "duration", "axis", "angle"}, where)
        axis = _get(doc, obj, "axis", where, list)
        if len(axis) != 3 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in axis):
            raise doc.error("path.axis", "axis must be a list of three numbers")
        return {"preset": preset, **common, "axis": [float(x) for x in axis],
                "angle": _get(doc, obj, "angle", where, float)}
    if preset == "precession":
        _check_keys(doc, obj, {"preset", "n", "m", "duration", "theta", "turns"}, where)
        return {"preset": preset, **common, "theta": _get(doc, obj, "theta", where, float),
                "turns": _get(doc, obj, "turns", where, float, 1.0)}
    _check_keys(doc, obj, {"preset", "n", "m", "duration", "eta", "omega"}, where)
    return {"preset": preset, **common, "eta": _get(doc, obj, "eta", where, float),
            "omega": _get(doc, obj, "omega", where, float)}


def _mode_options(doc: _Doc, raw: dict, mode: str, N):
    opts = {}
    if mode == "pseudopure-closed":
        p = _get(doc, raw, "params", "", dict)
        _check_keys(doc, p, {"epsilon", "eta", "omega"}, "params")
        opts["params"] = {k: _get(doc, p, k, "params", float) for k in ("epsilon", "eta", "omega")}
    elif mode == "nodal-scan":
        s = _get(doc, raw, "scan", "", dict)
        _check_keys(doc, s, {"kind", "omega", "epsilon", "eta"}, "scan")
        kind = _get(doc, s, "kind", "scan", str, "l1")
        if kind not in ("l1", "l2"):
            raise doc.error("scan.kind", "kind must be 'l1' or 'l2'")
        opts["scan"] = {"kind": kind, "omega": _get(doc, s, "omega", "scan", float, 2 * math.pi),
                        "epsilon": _linspace_spec(doc, _get(doc, s, "epsilon", "scan", dict), "scan.epsilon"),
                        "eta": _linspace_spec(doc, _get(doc, s, "eta", "scan", dict), "scan.eta")}
    elif mode == "figure1":
        f = _get(doc, raw, "figure1", "", dict, {})
        _check_keys(doc, f, {"N_values", "eta_points", "resolution"}, "figure1")
        ns = _get(doc, f, "N_values", "figure1", list, [3, 4, 5, 6])
        if not ns or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 3 for n in ns):
            raise doc.error("figure1.N_values", "N_values must be integers >= 3")
        opts["figure1"] = {"N_values": list(ns), "eta_points": _get(doc, f, "eta_points", "figure1", int, 101),
                           "resolution": _get(doc, f, "resolution", "figure1", float, 1e-4)}
        if opts["figure1"]["eta_points"] < 2:
            raise doc.error("figure1.eta_points", "need at least 2 eta points")
        if not 0 < opts["figure1"]["resolution"] < 1:
            raise doc.error("figure1.resolution", "resolution must lie in (0, 1)")
    elif mode == "interfere":
        f = _get(doc, raw, "interfere", "", dict, {})
        _check_keys(doc, f, {"n", "m", "chi_points"}, "interfere")
        opts["interfere"] = {"n": _index(doc, f, "n", "interfere", N) if "n" in f else 0,
                             "m": _index(doc, f, "m", "interfere", N) if "m" in f else 1,
                             "chi_points": _get(doc, f, "chi_points", "interfere", int, 64)}
        if opts["interfere"]["n"] == opts["interfere"]["m"]:
            raise doc.error("interfere.m", "n and m must differ")
        if opts["interfere"]["chi_points"] < 8:
            raise doc.error("interfere.chi_points", "the cosine fit needs at least 8 points")
    elif mode == "selftest":
        f = _get(doc, raw, "selftest", "", dict, {})
        _check_keys(doc, f, {"criteria"}, "selftest")
        crit = _get(doc, f, "criteria", "selftest", list, list(SELFTEST_CRITERIA))
        if not crit or any(c not in SELFTEST_CRITERIA or isinstance(c, bool) for c in crit):
            raise doc.error("selftest.criteria", f"criteria must be drawn from {list(SELFTEST_CRITERIA)}")
        opts["selftest"] = {"criteria": sorted(set(crit))}
    if mode in PHASE_MODES and "gauge_check" in raw:
        g = _get(doc, raw, "gauge_check", "", dict)
        _check_keys(doc, g, {"trials", "kind"}, "gauge_check")
        kind = _get(doc, g, "kind", "gauge_check", str, "diagonal")
        if kind not in ("diagonal", "block"):
            raise doc.error("gauge_check.kind", "kind must be 'diagonal' or 'block'")
        opts["gauge_check"] = {"trials": _get(doc, g, "trials", "gauge_check", int, 20), "kind": kind}
    for key in ("params", "scan", "figure1", "interfere", "selftest", "gauge_check"):
        if key in raw and key not in opts:
            raise doc.error(key, f"section not used by mode {mode!r}")
    return opts


_NEEDS = {
    "pure": ("N", "path", "indices"),
    "mixed": ("N", "state", "path", "indices"),
    "degenerate": ("N", "state", "path", "indices"),
    "pseudopure-closed": ("N",),
    "nodal-scan": ("N",),
    "figure1": (),
    "interfere": ("N", "state", "path"),
    "selftest": (),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON configuration document.

    Raises :class:`SchemaError` (with field and line) for structural problems
    and :class:`PhysicsError` for well-formed input that is not physical.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
    doc = _Doc(text)
    if not isinstance(raw, dict):
        raise SchemaError("configuration must be a JSON object", line=1)
    _check_keys(doc, raw, _TOP_KEYS, "")
    mode = _get(doc, raw, "mode", "", str)
    if mode not in MODES:
        raise doc.error("mode", f"unknown mode {mode!r}; expected one of {list(MODES)}")
    N = _get(doc, raw, "N", "", int, None)
    if N is not None and not 2 <= N <= MAX_DIM:
        raise doc.error("N", f"N must lie in [2, {MAX_DIM}]")
    for key in _NEEDS[mode]:
        if key not in raw and not (mode == "pure" and key == "state"):
            raise doc.error(key, f"mode {mode!r} requires this field")
    state = _parse_state(doc, _get(doc, raw, "state", "", dict), N, mode) if "state" in raw else None
    path = _parse_path(doc, _get(doc, raw, "path", "", dict), N) if "path" in raw else None
    indices = None
    if "indices" in raw:
        idx = _get(doc, raw, "indices", "", list)
        if not idx or not all(isinstance(i, int) and not isinstance(i, bool) for i in idx):
            raise doc.error("indices", "indices must be a non-empty list of integers")
        for i in idx:
            if not 0 <= i < N:
                raise doc.error("indices", f"index {i} out of range for N = {N}")
        if len(idx) > N:
            raise doc.error("indices", f"at most N = {N} indices allowed")
        indices = tuple(idx)
    grid = _get(doc, raw, "grid", "", int, DEFAULT_STEPS)
    if grid < 1:
        raise doc.error("grid", "grid must be a positive number of steps")
    tol = _get(doc, raw, "tolerances", "", dict, {})
    _check_keys(doc, tol, {"nodal", "degeneracy"}, "tolerances")
    nodal = _get(doc, tol, "nodal", "tolerances", float, NODAL_TOL)
    degeneracy = _get(doc, tol, "degeneracy", "tolerances", float, DEGENERACY_TOL)
    for name, v in (("tolerances.nodal", nodal), ("tolerances.degeneracy", degeneracy)):
        if not v > 0:
            raise doc.error(name, "tolerances must be positive")
    seed = _get(doc, raw, "seed", "", int, None)
    if seed is not None and not 0 <= seed < 2**64:
        raise doc.error("seed", "seed must be an unsigned 64-bit integer")
    options = _mode_options(doc, raw, mode, N)
    if seed is None and (mode == "selftest" or "gauge_check" in options):
        raise doc.error("seed", "configurations that use randomness must set a seed")
    cfg = ExperimentConfig(mode=mode, N=N, state=state, path=path, indices=indices, grid=grid,
                           nodal_tol=nodal, degeneracy_tol=degeneracy, seed=seed,
                           require_defined=_get(doc, raw, "require_defined", "", bool, False),
                           output=_get(doc, raw, "output", "", str, "") or mode, options=options)
    _validate_physics(doc, cfg)
    return cfg


def _validate_physics(doc: _Doc, cfg: ExperimentConfig) -> None:
    checks = []
    if cfg.path is not None:
        checks.append(("path.schedule" if "schedule" in cfg.path else "path", build_path))
    if cfg.state is not None:
        checks.append(("state", build_state))
    if cfg.mode == "pseudopure-closed":
        checks.append(("params", pseudopure_params))
    for section, build in checks:
        try:
            build(cfg)
        except (PhysicsError, SchemaError):
            raise
        except ValidationError as exc:
            raise doc.error(section, str(exc)) from None


def _pp_params(cfg: ExperimentConfig) -> dict:
    return dict(cfg.options["params"])


# -- builders --------------------------------------------------------------


def build_path(cfg: ExperimentConfig) -> UnitaryPath:
    p = cfg.path
    if p is None:
        raise ValidationError(f"mode {cfg.mode!r} config has no path")
    if "schedule" in p:
        return UnitaryPath.from_schedule(
            [(s["t_start"], s["t_end"], matrix_from_pairs(s["H"])) for s in p["schedule"]], dim=cfg.N)
    if p["preset"] == "block-rotation":
        return block_rotation(p["axis"], p["angle"], cfg.N, p["n"], p["m"], p["duration"])
    if p["preset"] == "precession":
        return precession(p["theta"], p["turns"], cfg.N, p["n"], p["m"], p["duration"])
    return block_loop(p["eta"], p["omega"], cfg.N, p["n"], p["m"], p["duration"])


def build_state(cfg: ExperimentConfig):
    """``SpectralDensity`` for mixed modes, ``OrthonormalBasis`` for pure mode."""
    s = cfg.state
    if cfg.mode == "pure":
        if s is None:
            return OrthonormalBasis.computational(cfg.N)
        try:
            return OrthonormalBasis(matrix_from_pairs(s["basis"]))
        except ValidationError as exc:
            raise PhysicsError(str(exc)) from None
    if s is None:
        raise ValidationError(f"mode {cfg.mode!r} config has no state")
    try:
        if "pseudopure" in s:
            return pseudopure_density(cfg.N, s["pseudopure"]["epsilon"], s["pseudopure"]["n"])
        if "eigenvalues" in s:
            return SpectralDensity.diagonal(s["eigenvalues"], cfg.degeneracy_tol)
        return SpectralDensity.from_matrix(matrix_from_pairs(s["matrix"]), degeneracy_tol=cfg.degeneracy_tol)
    except PhysicsError:
        raise
    except ValidationError as exc:
        raise PhysicsError(str(exc)) from None


def pseudopure_params(cfg: ExperimentConfig) -> PseudopureParams:
    return PseudopureParams(cfg.N, **_pp_params(cfg))


def scan_axis(spec: dict) -> np.ndarray:
    return np.linspace(spec["start"], spec["stop"], spec["num"])
