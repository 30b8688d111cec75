"""JSON run configuration.

Schema (all top-level keys except ``domain``, ``dt`` and ``T`` are optional)::

    {
      "domain":   {"type": "rect", "nx": 35, "ny": 35, "bounds": [[0, 0], [1, 1]]}
                | {"type": "ellipse", "a": 0.4, "b": 0.2, "n_r": 15, "n_theta": 80}
                | {"type": "file", "path": "mesh.txt"},
      "material": "pnipa" | {"K": ..., "G": ..., "phi": ..., "xi": ...},
      "load":     {"type": "tangential", "magnitude": 0.1}
                | {"type": "per_tag", "values": {"1": [0.5, 0], "2": [-0.5, 0]}}
                | {"type": "named", "name": "zero" | "strip" | "mms"},
      "initial":  {"type": "named", "name": "sine" | "zero" | "mms", "amplitude": 1e-4}
                | {"type": "expression", "u1": "1e-4*sin(x1+x2)", "u2": "1e-4*sin(x1+x2)"},
      "dt": 0.01, "T": 0.1,
      "algorithm": "alg1" | "alg2",
      "theta_threshold": 0.1,
      "output": "out", "stride": 1, "magnification": 500,
      "convergence": {"levels": 4, "coupling": "dt_h2" | "dt_h" | "fixed_mesh",
                      "dt0": 0.025, "T": 0.1, "algorithm": "alg1"}
    }

The ``mms`` load selects the manufactured solution's traction and volume
sources; it requires the ``mms`` initial condition. A relative mesh
``path`` is resolved against the config file's directory.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import sympy as sym

from .errors import ConfigError, InvalidParameterError
from .mesh import Mesh, gen_ellipse_mesh, gen_rect_mesh, read_mesh
from .model import BoundaryLoad, InitialData, MaterialParams
from .scheme import ALGORITHMS, SourceHooks

_TOP = {"domain", "material", "load", "initial", "dt", "T", "algorithm", "theta_threshold", "output",
        "stride", "magnification", "convergence"}
_DOMAIN = {"rect": {"type", "nx", "ny", "bounds"}, "ellipse": {"type", "a", "b", "n_r", "n_theta"},
           "file": {"type", "path"}}
_LOAD = {"tangential": {"type", "magnitude"}, "per_tag": {"type", "values"}, "named": {"type", "name"}}
_INITIAL = {"named": {"type", "name", "amplitude"}, "expression": {"type", "u1", "u2"}}
_CONVERGENCE = {"levels", "coupling", "dt0", "T", "algorithm"}
NAMED_LOADS = ("zero", "strip", "mms")
NAMED_INITIAL = ("sine", "zero", "mms")


@dataclass
class ConvergenceConfig:
    levels: int = 4
    coupling: str = "dt_h2"
    dt0: float = 0.025
    T: float = 0.1
    algorithm: str = "alg1"


@dataclass
class RunConfig:
    domain: dict
    material: MaterialParams
    load: dict
    initial: dict
    dt: float
    T: float
    algorithm: str = "alg1"
    theta_threshold: float = 0.1
    output: str = "out"
    stride: int = 1
    magnification: float = 500.0
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    base_dir: Optional[Path] = None

    # -- builders -------------------------------------------------------------------
    def build_mesh(self) -> Mesh:
        d = self.domain
        if d["type"] == "rect":
            lo, hi = d.get("bounds", [[0.0, 0.0], [1.0, 1.0]])
            return gen_rect_mesh(d["nx"], d["ny"], tuple(lo), tuple(hi))
        if d["type"] == "ellipse":
            return gen_ellipse_mesh(d["a"], d["b"], d["n_r"], d["n_theta"])
        return read_mesh(Path(d["path"]).read_text())

    @property
    def is_mms(self) -> bool:
        return self.load["type"] == "named" and self.load["name"] == "mms"

    def exact(self):
        from .verify import mms_default

        return mms_default(self.material)

    def build_load(self) -> BoundaryLoad:
        ld = self.load
        if ld["type"] == "tangential":
            return BoundaryLoad.tangential(ld["magnitude"])
        if ld["type"] == "per_tag":
            return BoundaryLoad.per_tag(ld["values"])
        if ld["name"] == "strip":
            return BoundaryLoad.strip()
        return BoundaryLoad.zero()

    def build_hooks(self) -> Optional[SourceHooks]:
        return self.exact().hooks() if self.is_mms else None

    def build_initial(self) -> InitialData:
        ini = self.initial
        if ini["type"] == "expression":
            return expression_initial(ini["u1"], ini["u2"])
        if ini["name"] == "sine":
            return InitialData.sine(ini.get("amplitude", 1e-4))
        if ini["name"] == "zero":
            return InitialData.zero()
        return self.exact().initial_data()


def _fail(msg, path):
    raise ConfigError(msg, path)


def _keys(obj, allowed, path):
    if not isinstance(obj, dict):
        _fail("expected an object", path)
    extra = sorted(set(obj) - set(allowed))
    if extra:
        _fail(f"unknown key {extra[0]!r}", f"{path}.{extra[0]}" if path else extra[0])


def _require(obj, key, path):
    if key not in obj:
        _fail("missing required key", f"{path}.{key}" if path else key)
    return obj[key]


def _number(v, path, positive=False, integer=False, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"expected a finite number, got {v!r}", path)
    if integer and (not float(v).is_integer()):
        _fail(f"expected an integer, got {v!r}", path)
    if positive and not v > 0:
        _fail(f"must be positive, got {v!r}", path)
    if minimum is not None and v < minimum:
        _fail(f"must be >= {minimum}, got {v!r}", path)
    return int(v) if integer else float(v)


def _typed(obj, table, path):
    if not isinstance(obj, dict):
        _fail("expected an object", path)
    t = _require(obj, "type", path)
    if t not in table:
        _fail(f"type must be one of {sorted(table)}, got {t!r}", f"{path}.type")
    _keys(obj, table[t], path)
    return t


def _domain(d, base_dir):
    t = _typed(d, _DOMAIN, "domain")
    out = {"type": t}
    if t == "rect":
        out["nx"] = _number(_require(d, "nx", "domain"), "domain.nx", integer=True, minimum=1)
        out["ny"] = _number(_require(d, "ny", "domain"), "domain.ny", integer=True, minimum=1)
        if "bounds" in d:
            b = d["bounds"]
            if not (isinstance(b, list) and len(b) == 2 and all(isinstance(r, list) and len(r) == 2 for r in b)):
                _fail("bounds must be [[x0, y0], [x1, y1]]", "domain.bounds")
            lo = [_number(v, "domain.bounds") for v in d["bounds"][0]]
            hi = [_number(v, "domain.bounds") for v in d["bounds"][1]]
            if not (hi[0] > lo[0] and hi[1] > lo[1]):
                _fail("upper corner must dominate lower corner", "domain.bounds")
            out["bounds"] = [lo, hi]
    elif t == "ellipse":
        for k in ("a", "b"):
            out[k] = _number(_require(d, k, "domain"), f"domain.{k}", positive=True)
        out["n_r"] = _number(_require(d, "n_r", "domain"), "domain.n_r", integer=True, minimum=1)
        out["n_theta"] = _number(_require(d, "n_theta", "domain"), "domain.n_theta", integer=True, minimum=3)
    else:
        p = _require(d, "path", "domain")
        if not isinstance(p, str):
            _fail("expected a string", "domain.path")
        path = Path(p)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not path.is_file():
            _fail(f"mesh file not found: {path}", "domain.path")
        out["path"] = str(path)
    return out


def _material(m):
    if m == "pnipa":
        return MaterialParams.pnipa()
    _keys(m, {"K", "G", "phi", "xi"}, "material")
    vals = {k: _number(_require(m, k, "material"), f"material.{k}") for k in ("K", "G", "phi", "xi")}
    mp = MaterialParams(**vals)
    try:
        mp.validate()
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), "material") from exc
    return mp


def _load(ld):
    t = _typed(ld, _LOAD, "load")
    if t == "tangential":
        return {"type": t, "magnitude": _number(_require(ld, "magnitude", "load"), "load.magnitude")}
    if t == "per_tag":
        vals = _require(ld, "values", "load")
        if not isinstance(vals, dict):
            _fail("expected an object mapping tags to vectors", "load.values")
        out = {}
        for k, v in vals.items():
            p = f"load.values.{k}"
            try:
                tag = int(k)
            except ValueError:
                _fail("tag must be an integer", p)
            if not isinstance(v, (list, tuple)) or len(v) != 2:
                _fail("expected a 2-vector", p)
            out[tag] = [_number(c, p) for c in v]
        return {"type": t, "values": out}
    name = _require(ld, "name", "load")
    if name not in NAMED_LOADS:
        _fail(f"name must be one of {list(NAMED_LOADS)}, got {name!r}", "load.name")
    return {"type": t, "name": name}


def _initial(ini):
    t = _typed(ini, _INITIAL, "initial")
    if t == "expression":
        out = {"type": t}
        for k in ("u1", "u2"):
            e = _require(ini, k, "initial")
            if not isinstance(e, str):
                _fail("expected a string expression", f"initial.{k}")
            out[k] = e
        try:
            expression_initial(out["u1"], out["u2"])
        except (sym.SympifyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse expression: {exc}", "initial") from exc
        return out
    name = _require(ini, "name", "initial")
    if name not in NAMED_INITIAL:
        _fail(f"name must be one of {list(NAMED_INITIAL)}, got {name!r}", "initial.name")
    out = {"type": t, "name": name}
    if "amplitude" in ini:
        out["amplitude"] = _number(ini["amplitude"], "initial.amplitude")
    return out


def _convergence(c):
    _keys(c, _CONVERGENCE, "convergence")
    cc = ConvergenceConfig()
    if "levels" in c:
        cc.levels = _number(c["levels"], "convergence.levels", integer=True, minimum=3)
    if "coupling" in c:
        if c["coupling"] not in ("dt_h2", "dt_h", "fixed_mesh"):
            _fail(f"unknown coupling {c['coupling']!r}", "convergence.coupling")
        cc.coupling = c["coupling"]
    if "dt0" in c:
        cc.dt0 = _number(c["dt0"], "convergence.dt0", positive=True)
    if "T" in c:
        cc.T = _number(c["T"], "convergence.T", positive=True)
    if "algorithm" in c:
        if c["algorithm"] not in ALGORITHMS:
            _fail(f"algorithm must be one of {list(ALGORITHMS)}", "convergence.algorithm")
        cc.algorithm = c["algorithm"]
    return cc


_X1, _X2 = sym.symbols("x1 x2", real=True)


def expression_initial(u1: str, u2: str) -> InitialData:
    """Initial displacement from two expressions in ``x1``, ``x2`` (sympy syntax);
    divergence and gradient are differentiated symbolically."""
    ns = {"x1": _X1, "x2": _X2, "pi": sym.pi, "e": sym.E}
    exprs = [sym.sympify(s, locals=ns) for s in (u1, u2)]
    free = set().union(*(e.free_symbols for e in exprs)) - {_X1, _X2}
    if free:
        raise ValueError(f"unknown symbols {sorted(map(str, free))}")

    def lam(e):
        f = sym.lambdify((_X1, _X2), e, "numpy")
        return lambda x: np.broadcast_to(np.asarray(f(x[:, 0], x[:, 1]), dtype=float), (len(x),))

    comp = [lam(e) for e in exprs]
    grad = [[lam(sym.diff(e, v)) for v in (_X1, _X2)] for e in exprs]
    div = lam(sym.diff(exprs[0], _X1) + sym.diff(exprs[1], _X2))

    def u0(x):
        return np.column_stack([c(x) for c in comp])

    def grad_u0(x):
        return np.stack([np.column_stack([g(x) for g in row]) for row in grad], axis=1)

    return InitialData(u0, div, grad_u0)


def parse_config(text: str, base_dir=None) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises
    ------
    ConfigError
        On malformed JSON, unknown keys or invalid values; ``.path`` names the key.
    """
    try:
        doc: Any = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno})", "") from exc
    _keys(doc, _TOP, "")
    cfg = RunConfig(
        domain=_domain(_require(doc, "domain", ""), base_dir),
        material=_material(doc.get("material", "pnipa")),
        load=_load(doc.get("load", {"type": "named", "name": "zero"})),
        initial=_initial(doc.get("initial", {"type": "named", "name": "sine"})),
        dt=_number(_require(doc, "dt", ""), "dt", positive=True),
        T=_number(_require(doc, "T", ""), "T", positive=True),
        base_dir=Path(base_dir) if base_dir is not None else None,
    )
    if "algorithm" in doc:
        if doc["algorithm"] not in ALGORITHMS:
            _fail(f"algorithm must be one of {list(ALGORITHMS)}, got {doc['algorithm']!r}", "algorithm")
        cfg.algorithm = doc["algorithm"]
    if "theta_threshold" in doc:
        cfg.theta_threshold = _number(doc["theta_threshold"], "theta_threshold", positive=True)
    if "output" in doc:
        if not isinstance(doc["output"], str):
            _fail("expected a string", "output")
        cfg.output = doc["output"]
    if "stride" in doc:
        cfg.stride = _number(doc["stride"], "stride", integer=True, minimum=1)
    if "magnification" in doc:
        cfg.magnification = _number(doc["magnification"], "magnification")
    if "convergence" in doc:
        cfg.convergence = _convergence(doc["convergence"])
    if cfg.is_mms and not (cfg.initial["type"] == "named" and cfg.initial["name"] == "mms"):
        _fail("the mms load requires the mms initial condition", "initial")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)
