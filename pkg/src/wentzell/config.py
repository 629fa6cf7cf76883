"""Run configurations: JSON parsing with line-aware errors, presets, problem building."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from .errors import ConfigError
from .expressions import compile_expression
from .geometry import Mesh, ProductVector, load_vector, mesh_from_config
from .nonlinearity import nonlinearity_from_config
from .operator import OperatorMatrices, WentzellProblem, assemble
from .spectral import EigenResult, smallest_eigenpair

GROUND_STATE = "ground-state"
TOP_LEVEL_KEYS = {"name", "description", "mesh", "q", "shift", "alpha1", "alpha2", "load",
                  "options", "exact", "reference_eigenvalue"}
DEFAULT_OPTIONS = {"tol": 1e-9, "max_iter": 200, "gauge": 0.0}


@dataclass
class RunConfig:
    mesh: dict
    q: float = 0.0
    shift: Any = 0.0  # a number or "ground-state"
    alpha1: dict = field(default_factory=lambda: {"family": "zero"})
    alpha2: dict = field(default_factory=lambda: {"family": "zero"})
    load: dict = field(default_factory=lambda: {"f": 0.0, "g": 0.0})
    options: dict = field(default_factory=dict)
    name: str = ""
    description: str = ""
    exact: str | None = None  # closed-form solution u(x, y), when known
    reference_eigenvalue: float | None = None

    @classmethod
    def from_dict(cls, data: dict, text: str | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - TOP_LEVEL_KEYS)
        if unknown:
            raise ConfigError(_locate(text, unknown[0], f"unknown key {unknown[0]!r}"))
        if "mesh" not in data:
            raise ConfigError("config needs a 'mesh' entry")
        cfg = cls(
            mesh=copy.deepcopy(data["mesh"]),
            q=float(data.get("q", 0.0)),
            shift=data.get("shift", 0.0),
            alpha1=_family(data.get("alpha1", {"family": "zero"})),
            alpha2=_family(data.get("alpha2", {"family": "zero"})),
            load=copy.deepcopy(data.get("load", {"f": 0.0, "g": 0.0})),
            options={**DEFAULT_OPTIONS, **data.get("options", {})},
            name=str(data.get("name", "")),
            description=str(data.get("description", "")),
            exact=data.get("exact"),
            reference_eigenvalue=data.get("reference_eigenvalue"),
        )
        cfg.validate(text)
        return cfg

    def validate(self, text: str | None = None):
        if self.q < 0:
            raise ConfigError(_locate(text, "q", "q must be nonnegative"))
        if not (self.shift == GROUND_STATE or isinstance(self.shift, (int, float))):
            raise ConfigError(_locate(text, "shift", "shift must be a number or 'ground-state'"))
        for key in ("alpha1", "alpha2"):
            try:
                nonlinearity_from_config(getattr(self, key))
            except (ValueError, TypeError) as exc:
                raise ConfigError(_locate(text, key, f"{key}: {exc}")) from None
        extra = set(self.load) - {"f", "g"}
        if extra:
            raise ConfigError(_locate(text, "load", f"unknown load entries {sorted(extra)}"))
        for key in ("f", "g"):
            _check_load_spec(self.load.get(key, 0.0), key, text)
        if self.exact is not None:
            compile_expression(self.exact)
        try:
            self.build_mesh()
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(_locate(text, "mesh", f"mesh: {exc}")) from None

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "description": self.description,
            "mesh": copy.deepcopy(self.mesh),
            "q": self.q,
            "shift": self.shift,
            "alpha1": copy.deepcopy(self.alpha1),
            "alpha2": copy.deepcopy(self.alpha2),
            "load": copy.deepcopy(self.load),
            "options": dict(self.options),
        }
        if self.exact is not None:
            out["exact"] = self.exact
        if self.reference_eigenvalue is not None:
            out["reference_eigenvalue"] = self.reference_eigenvalue
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def with_overrides(self, n: int | None = None, q: float | None = None) -> "RunConfig":
        data = self.to_dict()
        if n is not None:
            if data["mesh"].get("type") == "interval":
                data["mesh"]["n"] = int(n)
            else:
                data["mesh"]["nx"] = data["mesh"]["ny"] = int(n)
        if q is not None:
            data["q"] = float(q)
        return RunConfig.from_dict(data)

    def build_mesh(self) -> Mesh:
        return mesh_from_config(self.mesh, q=self.q)


def _family(spec):
    if isinstance(spec, str):
        return {"family": spec}
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"nonlinearity spec needs a 'family': {spec!r}")
    return copy.deepcopy(spec)


def _check_load_spec(spec, key, text):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return
    if isinstance(spec, str):
        compile_expression(spec)
        return
    if isinstance(spec, dict) and set(spec) <= {"values"} and "values" in spec:
        return
    if isinstance(spec, dict) and set(spec) == {"random_fourier"}:
        opts = spec["random_fourier"]
        if not isinstance(opts, dict) or set(opts) - {"seed", "modes", "amplitude"}:
            raise ConfigError(_locate(text, "random_fourier", "random_fourier takes seed, modes, amplitude"))
        return
    raise ConfigError(_locate(text, key, f"cannot interpret load entry {key!r}"))


def _locate(text: str | None, key: str, message: str) -> str:
    """Prefix a message with the line of the first occurrence of ``"key"`` in the source."""
    if text:
        m = re.search(r'"' + re.escape(key) + r'"', text)
        if m:
            line = text.count("\n", 0, m.start()) + 1
            return f"line {line}: {message}"
    return message


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return RunConfig.from_dict(data, text)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def preset_names() -> list:
    root = resources.files("wentzell") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    path = resources.files("wentzell") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_config(path.read_text(), f"preset {name}")


def random_fourier(seed: int = 0, modes: int = 8, amplitude: float = 1.0):
    """Smooth random field sum_k (a_k cos(k pi x) + b_k sin(k pi x)) / k, times the same in y."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(modes)
    b = rng.standard_normal(modes)
    ay = rng.standard_normal(modes)
    k = np.arange(1, modes + 1)

    def series(t, ca, cb):
        t = np.asarray(t, dtype=float)[..., None]
        return np.sum((ca * np.cos(k * np.pi * t) + cb * np.sin(k * np.pi * t)) / k, axis=-1)

    def f(x, y, s):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gy = 1.0 + 0.5 * series(y, ay, np.zeros(modes))
        return amplitude * series(x, a, b) * gy

    return f


def _load_entry(spec, q: float):
    if isinstance(spec, dict) and "random_fourier" in spec:
        return random_fourier(**spec["random_fourier"])
    if isinstance(spec, dict):
        return np.asarray(spec["values"], dtype=float)
    if isinstance(spec, str):
        return compile_expression(spec).bind(q)
    return spec


@dataclass(eq=False)
class BuiltProblem:
    config: RunConfig
    problem: WentzellProblem
    ops: OperatorMatrices
    eigen: EigenResult | None = None


def build_problem(cfg: RunConfig, need_eigen: bool = False) -> BuiltProblem:
    """Mesh, operator and problem; resolves ``shift = "ground-state"`` by an eigensolve."""
    mesh = cfg.build_mesh()
    ops = assemble(mesh, cfg.q)
    F = load_vector(mesh, _load_entry(cfg.load.get("f", 0.0), cfg.q), _load_entry(cfg.load.get("g", 0.0), cfg.q))
    eigen = None
    shift = cfg.shift
    if shift == GROUND_STATE or need_eigen:
        eigen = smallest_eigenpair(ops)
    if shift == GROUND_STATE:
        shift = eigen.eigenvalue
    problem = WentzellProblem(mesh, cfg.q, nonlinearity_from_config(cfg.alpha1),
                              nonlinearity_from_config(cfg.alpha2), F, float(shift), cfg.name)
    return BuiltProblem(cfg, problem, ops, eigen)


def exact_nodal(cfg: RunConfig, mesh: Mesh):
    if cfg.exact is None:
        return None
    return compile_expression(cfg.exact).bind(cfg.q)(mesh.x(), mesh.y())


def scaled_load(problem: WentzellProblem, factor: float) -> WentzellProblem:
    return problem.with_load(problem.load * factor)

