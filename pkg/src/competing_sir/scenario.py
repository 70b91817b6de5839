"""Scenario files: one YAML document per experiment.

Schema (version 1)::

    schema_version: 1
    name: europe
    n: 5
    m: 2
    h: 1.0
    horizon: 500
    node_labels: [UK, ESP, GER, TUR, RUS]
    viruses:
      - label: sars-cov-2
        B: [[...], ...]        # n rows of n rates, row i = infections of node i
        gamma: [...]           # n healing rates
        c: [...]               # n measurement coefficients
        x0: [...]              # n initial infected fractions
    s0: [...]                  # optional, default 1 - sum_k x0^k - r0
    r0: [...]                  # optional, default 0
    observer:                  # optional
      L: [...]                 # n gains, or one scalar
      x_hat0: split            # "split" or an m x n matrix
      r_hat0: zero             # "zero" or n values
      error_threshold: 1.0e-6
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from .model import ModelConfig, VirusParams, Violation, state_from_infections, validate, output
from .observer import DEFAULT_ERROR_THRESHOLD, DEFAULT_GAIN, ObserverConfig, split_initial_estimate

SCHEMA_VERSION = 1
BUNDLED = {"europe": "europe.scenario"}


class ParseError(ValueError):
    """Malformed scenario file."""

    def __init__(self, message: str, field: str = "", line: Optional[int] = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class ScenarioValidationError(ValueError):
    """The parsed model breaks one of its standing assumptions."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass
class ObserverSettings:
    L: Union[float, list] = DEFAULT_GAIN
    x_hat0: Union[str, list] = "split"
    r_hat0: Union[str, list] = "zero"
    error_threshold: float = DEFAULT_ERROR_THRESHOLD

    def build(self, config: ModelConfig, y0: Optional[np.ndarray] = None) -> ObserverConfig:
        n = config.n
        L = np.broadcast_to(np.asarray(self.L, dtype=float), (n,)).copy()
        if isinstance(self.x_hat0, str):
            if y0 is None:
                y0 = output(config.initial, config)
            x_hat0 = split_initial_estimate(y0, config)
        else:
            x_hat0 = np.asarray(self.x_hat0, dtype=float)
        r_hat0 = np.zeros(n) if isinstance(self.r_hat0, str) else np.asarray(self.r_hat0, dtype=float)
        return ObserverConfig(L=L, x_hat0=x_hat0, r_hat0=r_hat0, error_threshold=self.error_threshold)


@dataclass
class Scenario:
    name: str
    config: ModelConfig
    observer: ObserverSettings = field(default_factory=ObserverSettings)
    has_observer_block: bool = False
    explicit_s0: bool = False
    explicit_r0: bool = False
    schema_version: int = SCHEMA_VERSION


def _line_of(node: Optional[yaml.Node]) -> Optional[int]:
    return None if node is None else node.start_mark.line + 1


def _find_node(root: Optional[yaml.Node], path: list) -> Optional[yaml.Node]:
    """Best-effort YAML node lookup used to attach line numbers to errors."""
    node = root
    for key in path:
        if isinstance(node, yaml.MappingNode):
            node = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            return node
        if node is None:
            return None
    return node


class _Reader:
    def __init__(self, data: dict, root: Optional[yaml.Node]):
        self.data = data
        self.root = root

    def fail(self, message, path):
        name = ".".join(f"[{p}]" if isinstance(p, int) else str(p) for p in path).replace(".[", "[")
        raise ParseError(message, field=name, line=_line_of(_find_node(self.root, path)))

    def get(self, mapping, key, path, required=True, default=None):
        if not isinstance(mapping, dict):
            self.fail("expected a mapping", path)
        if key not in mapping:
            if required:
                self.fail("missing required field", path + [key])
            return default
        return mapping[key]

    def integer(self, value, path, minimum=None):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"expected an integer, got {value!r}", path)
        if minimum is not None and value < minimum:
            self.fail(f"must be >= {minimum}", path)
        return value

    def real(self, value, path):
        if isinstance(value, str):
            # PyYAML reads exponent forms such as 1e-6 as strings
            try:
                return float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {value!r}", path)
        return float(value)

    def vector(self, value, length, path):
        if not isinstance(value, list) or len(value) != length:
            got = len(value) if isinstance(value, list) else type(value).__name__
            self.fail(f"expected a list of {length} numbers, got {got}", path)
        return np.array([self.real(v, path + [i]) for i, v in enumerate(value)])

    def matrix(self, value, rows, cols, path):
        if not isinstance(value, list) or len(value) != rows:
            got = len(value) if isinstance(value, list) else type(value).__name__
            self.fail(f"expected {rows}x{cols} matrix, got {got} rows", path)
        for i, row in enumerate(value):
            if not isinstance(row, list) or len(row) != cols:
                got = len(row) if isinstance(row, list) else type(row).__name__
                self.fail(f"expected {rows}x{cols} matrix, row {i} has {got} entries", path)
        return np.array([[self.real(v, path + [i, j]) for j, v in enumerate(row)]
                         for i, row in enumerate(value)])


def loads_scenario(text: str, check: bool = True) -> Scenario:
    """Parse scenario text; ``check`` runs model validation afterwards."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc).splitlines()[0], line=None if mark is None else mark.line + 1) from exc
    rd = _Reader(data, root)
    if not isinstance(data, dict):
        raise ParseError("scenario must be a mapping")

    version = rd.integer(rd.get(data, "schema_version", []), ["schema_version"])
    if version != SCHEMA_VERSION:
        rd.fail(f"unsupported schema version {version}", ["schema_version"])
    name = str(rd.get(data, "name", []))
    n = rd.integer(rd.get(data, "n", []), ["n"], minimum=1)
    m = rd.integer(rd.get(data, "m", []), ["m"], minimum=1)
    h = rd.real(rd.get(data, "h", []), ["h"])
    horizon = rd.integer(rd.get(data, "horizon", []), ["horizon"], minimum=0)

    labels = rd.get(data, "node_labels", [], required=False, default=None)
    if labels is None:
        labels = [f"node{i + 1}" for i in range(n)]
    if not isinstance(labels, list) or len(labels) != n:
        rd.fail(f"expected {n} node labels", ["node_labels"])
    labels = [str(v) for v in labels]

    blocks = rd.get(data, "viruses", [])
    if not isinstance(blocks, list) or len(blocks) != m:
        rd.fail(f"expected {m} virus blocks", ["viruses"])
    viruses, x0 = [], []
    for k, block in enumerate(blocks):
        p = ["viruses", k]
        label = str(rd.get(block, "label", p, required=False, default=f"virus{k + 1}"))
        B = rd.matrix(rd.get(block, "B", p), n, n, p + ["B"])
        gamma = rd.vector(rd.get(block, "gamma", p), n, p + ["gamma"])
        c = rd.vector(rd.get(block, "c", p), n, p + ["c"])
        x0.append(rd.vector(rd.get(block, "x0", p), n, p + ["x0"]))
        viruses.append(VirusParams(B=B, gamma=gamma, c=c, label=label))

    s0 = data.get("s0")
    r0 = data.get("r0")
    s0 = None if s0 is None else rd.vector(s0, n, ["s0"])
    r0 = None if r0 is None else rd.vector(r0, n, ["r0"])
    initial = state_from_infections(np.array(x0), s0=s0, r0=r0)
    config = ModelConfig(h=h, viruses=tuple(viruses), initial=initial, horizon=horizon,
                         node_labels=tuple(labels))

    obs_block = data.get("observer")
    settings = ObserverSettings()
    if obs_block is not None:
        p = ["observer"]
        L = rd.get(obs_block, "L", p, required=False, default=DEFAULT_GAIN)
        L = rd.real(L, p + ["L"]) if not isinstance(L, list) else rd.vector(L, n, p + ["L"]).tolist()
        xh = rd.get(obs_block, "x_hat0", p, required=False, default="split")
        if isinstance(xh, str):
            if xh != "split":
                rd.fail(f"unknown x_hat0 policy {xh!r}", p + ["x_hat0"])
        else:
            xh = rd.matrix(xh, m, n, p + ["x_hat0"]).tolist()
        rh = rd.get(obs_block, "r_hat0", p, required=False, default="zero")
        if isinstance(rh, str):
            if rh != "zero":
                rd.fail(f"unknown r_hat0 policy {rh!r}", p + ["r_hat0"])
        else:
            rh = rd.vector(rh, n, p + ["r_hat0"]).tolist()
        thr = rd.real(rd.get(obs_block, "error_threshold", p, required=False,
                             default=DEFAULT_ERROR_THRESHOLD), p + ["error_threshold"])
        settings = ObserverSettings(L=L, x_hat0=xh, r_hat0=rh, error_threshold=thr)

    scenario = Scenario(name=name, config=config, observer=settings,
                        has_observer_block=obs_block is not None,
                        explicit_s0=s0 is not None, explicit_r0=r0 is not None,
                        schema_version=version)
    if check:
        violations = validate(config)
        if violations:
            raise ScenarioValidationError(violations)
    return scenario


def resolve_path(path: Union[str, Path]) -> Path:
    """Accept a file path or the name of a bundled scenario."""
    p = Path(path)
    if p.exists():
        return p
    key = p.name.removesuffix(".scenario")
    if str(path) in BUNDLED or (p.parent == Path(".") and key in BUNDLED):
        return Path(str(resources.files("competing_sir") / "data" / BUNDLED[key]))
    raise FileNotFoundError(f"scenario file not found: {path}")


def parse_scenario(path: Union[str, Path], check: bool = True) -> Scenario:
    path = resolve_path(path)
    return loads_scenario(path.read_text(encoding="utf-8"), check=check)


def load_bundled(name: str = "europe") -> Scenario:
    return parse_scenario(name)


def _floats(a) -> Any:
    return np.asarray(a, dtype=float).tolist()


def dumps_scenario(scenario: Scenario) -> str:
    """Serialise a scenario; floats use their shortest round-trip form."""
    cfg = scenario.config
    doc: dict[str, Any] = {
        "schema_version": scenario.schema_version,
        "name": scenario.name,
        "n": cfg.n,
        "m": cfg.m,
        "h": cfg.h,
        "horizon": cfg.horizon,
        "node_labels": cfg.labels,
        "viruses": [
            {"label": v.label, "B": _floats(v.B), "gamma": _floats(v.gamma), "c": _floats(v.c),
             "x0": _floats(cfg.initial.x[k])}
            for k, v in enumerate(cfg.viruses)
        ],
    }
    if scenario.explicit_s0:
        doc["s0"] = _floats(cfg.initial.s)
    if scenario.explicit_r0:
        doc["r0"] = _floats(cfg.initial.r)
    if scenario.has_observer_block:
        o = scenario.observer
        doc["observer"] = {"L": o.L, "x_hat0": o.x_hat0, "r_hat0": o.r_hat0,
                           "error_threshold": float(o.error_threshold)}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=120)


def write_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_scenario(scenario), encoding="utf-8")
