"""YAML configuration files for the command-line interface.

A config has up to three top-level blocks::

    measure:            # required, see measure_from_description
      components:
        - chart: {name: point, coords: [0.0]}
          weight: 0.5
        - chart: {name: segment, start: [0.0], end: [2.0]}
          density: {family: uniform}
          weight: 0.5
    experiment:         # optional defaults for aep / theorem / sample
      n: [12]
      delta: 0.15
      xi: 0.2
      trials: 10000
      seed: 0
      mode: brute-force
      volume_trials: 4000
      eps_user: 0.1
      samples: 1000
    coarea:             # optional, for chain-rule
      component: 0
      matrix: [[1.0, 1.0]]

Errors name the offending field and, when it can be located, its line.
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .measures import measure_from_description

TOP_LEVEL = {"measure", "experiment", "coarea"}
EXPERIMENT_KEYS = {
    "n": (list, int),
    "delta": (float,),
    "xi": (float,),
    "trials": (int,),
    "seed": (int,),
    "mode": (str,),
    "volume_trials": (int,),
    "eps_user": (float,),
    "samples": (int,),
}
COAREA_KEYS = {"component", "matrix"}


@dataclass
class Config:
    """A validated configuration: the built measure plus the raw blocks."""

    measure: object
    measure_description: dict
    experiment: dict = field(default_factory=dict)
    coarea: dict = None
    source: str = None
    warnings: list = field(default_factory=list)


def _line_map(node, prefix="", out=None):
    """Map dotted field paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            out[path] = key_node.start_mark.line + 1
            _line_map(value_node, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = item.start_mark.line + 1
            _line_map(item, path, out)
    return out


def _locate(path, lines):
    while path:
        if path in lines:
            return lines[path]
        cut = max(path.rfind("."), path.rfind("["))
        if cut <= 0:
            break
        path = path[:cut]
    return lines.get(path)


def _check_experiment(block):
    if not isinstance(block, dict):
        raise ConfigError("experiment must be a mapping", path="experiment")
    out = {}
    for key, value in block.items():
        if key not in EXPERIMENT_KEYS:
            raise ConfigError(f"unknown key '{key}'", path=f"experiment.{key}")
        where = f"experiment.{key}"
        if key == "n":
            values = value if isinstance(value, list) else [value]
            if not values or not all(isinstance(v, int) and not isinstance(v, bool) and v > 0
                                     for v in values):
                raise ConfigError("n must be a positive integer or a list of them", path=where)
            out[key] = [int(v) for v in values]
        elif EXPERIMENT_KEYS[key] == (int,):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{key} must be an integer", path=where)
            out[key] = value
        elif EXPERIMENT_KEYS[key] == (float,):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{key} must be a number", path=where)
            out[key] = float(value)
        else:
            out[key] = str(value)
    return out


def _check_coarea(block, k):
    if not isinstance(block, dict):
        raise ConfigError("coarea must be a mapping", path="coarea")
    for key in block:
        if key not in COAREA_KEYS:
            raise ConfigError(f"unknown key '{key}'", path=f"coarea.{key}")
    if "matrix" not in block:
        raise ConfigError("coarea needs a 'matrix'", path="coarea")
    try:
        A = np.atleast_2d(np.asarray(block["matrix"], dtype=float))
    except (TypeError, ValueError):
        raise ConfigError("matrix must be a list of numeric rows", path="coarea.matrix") from None
    if A.ndim != 2:
        raise ConfigError("matrix must be a list of numeric rows", path="coarea.matrix")
    index = block.get("component", 0)
    if not isinstance(index, int) or not 0 <= index < k:
        raise ConfigError(f"component must be an index in [0, {k})", path="coarea.component")
    return {"component": index, "matrix": A.tolist()}


def load_config(text, source=None):
    """Validate YAML text and build its measure."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", line=line) from None
    lines = _line_map(root) if root is not None else {}
    try:
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping with a 'measure' block")
        for key in data:
            if key not in TOP_LEVEL:
                raise ConfigError(f"unknown top-level key '{key}'", path=str(key))
        if "measure" not in data:
            raise ConfigError("config needs a 'measure' block")
        experiment = _check_experiment(data.get("experiment") or {})
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            measure = measure_from_description(data["measure"])
        coarea = _check_coarea(data["coarea"], len(measure.components)) if data.get("coarea") else None
    except ConfigError as exc:
        if exc.line is None and exc.path:
            exc.line = _locate(exc.path, lines)
        raise
    return Config(measure, data["measure"], experiment, coarea, source,
                  [str(w.message) for w in caught])


def parse_config(path):
    """Read and validate the YAML file at ``path``."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return load_config(text, str(path))
