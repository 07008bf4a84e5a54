"""Run configuration: YAML text to a fully resolved, typed config.

Keys carry their units or roles in the name (``L1_length``, ``M_ladder``).
Every error points at the offending line and column.  ``dump_config`` writes
the resolved config back; parsing that text gives an identical object.
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from typing import Optional

import yaml

from .errors import ConfigError

COMMANDS = ("validate", "speed", "sweep", "limit", "mixed", "topology", "verify")


@dataclass(frozen=True)
class CellConfig:
    L1_length: float = 1.0
    L2_length: float = 1.0
    nx_nodes: int = 64
    ny_nodes: int = 64
    geometry: str = "torus"


@dataclass(frozen=True)
class FieldConfig:
    name: str = "shear_sin"  # catalog name, or fourier:<file>
    drift_amplitude: float = 1.0
    zeta_const: float = 1.0
    zeta_amp: float = 0.0
    diffusion_scale: float = 1.0
    diffusion_offdiag: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    eigen_tol: float = 1e-11
    speed_rel_width: float = 1e-4
    max_grid_nodes: int = 128
    peclet_max: float = 0.5


@dataclass(frozen=True)
class LadderConfig:
    M_value: float = 1.0
    M_ladder: tuple = tuple(2.0**k for k in range(11))
    eps_ladder: tuple = (1.0, 0.5, 0.25, 0.125)
    B_ladder: tuple = (1.0, 2.0, 4.0, 8.0)
    regime_M_ladder: tuple = tuple(2.0**k for k in range(6, 11))
    lambda_min: float = 0.0  # 0 selects the automatic grid
    lambda_max: float = 0.0
    lambda_points: int = 64


@dataclass(frozen=True)
class TopologyConfig:
    levels_count: int = 129
    grad_threshold: float = 1e-3
    K_elements: int = 64


@dataclass(frozen=True)
class CheckConfig:
    limits: bool = True
    mixed: bool = True
    limit_rel_tol: float = 0.05
    mixed_rel_tol: float = 0.10
    positivity_fraction: float = 0.05


@dataclass(frozen=True)
class RunConfig:
    cell: CellConfig = dc_field(default_factory=CellConfig)
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    direction: tuple = (1.0, 0.0)
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    ladders: LadderConfig = dc_field(default_factory=LadderConfig)
    topology: TopologyConfig = dc_field(default_factory=TopologyConfig)
    checks: CheckConfig = dc_field(default_factory=CheckConfig)
    output_dir: str = "out"


def _fail(msg: str, node) -> ConfigError:
    mark = node.start_mark
    return ConfigError(msg, mark.line + 1, mark.column + 1)


_KIND_WORDS = {float: "a number", int: "an integer", bool: "true or false", str: "a string"}


def _scalar(node, kind, where):
    if not isinstance(node, yaml.ScalarNode):
        raise _fail(f"{where}: expected {_KIND_WORDS.get(kind, kind.__name__)}", node)
    value = yaml.safe_load(yaml.serialize(node))
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            # PyYAML reads 1e-3 (no dot) as a string
            try:
                value = float(value) if isinstance(value, str) else None
            except ValueError:
                value = None
            if value is None:
                raise _fail(f"{where}: expected a number", node)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _fail(f"{where}: expected an integer", node)
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise _fail(f"{where}: expected true or false", node)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise _fail(f"{where}: expected a string", node)
        return value
    raise _fail(f"{where}: unsupported type", node)


def _sequence(node, where):
    if not isinstance(node, yaml.SequenceNode):
        raise _fail(f"{where}: expected a list of numbers", node)
    return tuple(_scalar(item, float, f"{where}[{k}]") for k, item in enumerate(node.value))


def _section(cls, node, where):
    if not isinstance(node, yaml.MappingNode):
        raise _fail(f"{where}: expected a mapping", node)
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dc_fields(cls)}
    values = {}
    for key_node, value_node in node.value:
        key = _scalar(key_node, str, where)
        if key not in known:
            raise _fail(f"{where}: unknown key {key!r}", key_node)
        if key in values:
            raise _fail(f"{where}: duplicate key {key!r}", key_node)
        kind = hints[key]
        path = f"{where}.{key}" if where else key
        if dataclasses.is_dataclass(kind):
            values[key] = _section(kind, value_node, path)
        elif kind is tuple:
            values[key] = _sequence(value_node, path)
        else:
            values[key] = _scalar(value_node, kind, path)
    return cls(**values)


def _check(cfg: RunConfig, root) -> None:
    def bad(msg):
        return ConfigError(msg, root.start_mark.line + 1, root.start_mark.column + 1)

    for name in ("M_ladder", "regime_M_ladder"):
        lad = getattr(cfg.ladders, name)
        if len(lad) < 4:
            raise bad(f"ladders.{name} needs at least 4 values")
        if any(b <= a for a, b in zip(lad, lad[1:])) or min(lad) <= 0:
            raise bad(f"ladders.{name} must be positive and strictly increasing")
    eps = cfg.ladders.eps_ladder
    if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])) or max(eps) > 1 or min(eps) <= 0:
        raise bad("ladders.eps_ladder must decrease within (0, 1] with at least 2 values")
    B = cfg.ladders.B_ladder
    if len(B) < 2 or any(b <= a for a, b in zip(B, B[1:])) or min(B) < 1:
        raise bad("ladders.B_ladder must increase from values >= 1 with at least 2 values")
    if cfg.ladders.M_value <= 0:
        raise bad("ladders.M_value must be positive")
    if cfg.cell.geometry not in ("torus", "strip"):
        raise bad(f"cell.geometry must be torus or strip, got {cfg.cell.geometry!r}")
    if len(cfg.direction) != (2 if cfg.cell.geometry == "torus" else 1):
        raise bad("direction has the wrong length for the geometry")


def _locate(root, path: tuple):
    """Node at a key path, for error positions; falls back to the root."""
    node = root
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            return node
        for k, v in node.value:
            if getattr(k, "value", None) == key:
                node = v
                break
        else:
            return node
    return node


def parse_config(text: str) -> RunConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"YAML syntax: {exc.problem}", mark.line + 1 if mark else 0,
                          mark.column + 1 if mark else 0) from exc
    if root is None:
        return RunConfig()
    cfg = _section(RunConfig, root, "")
    try:
        _check(cfg, root)
    except ConfigError as exc:
        key = str(exc).split(" ", 1)[0]
        node = _locate(root, tuple(key.split(".")))
        raise ConfigError(exc.message, node.start_mark.line + 1, node.start_mark.column + 1) from None
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_dict(cfg) -> dict:
    out = {}
    for f in dc_fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            out[f.name] = config_dict(v)
        elif isinstance(v, tuple):
            out[f.name] = [float(x) for x in v]
        else:
            out[f.name] = v
    return out


def _yaml_float(value: float) -> str:
    """Shortest exact repr, spelled so that YAML 1.1 resolvers read a float."""
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        return {"inf": ".inf", "-inf": "-.inf", "nan": ".nan"}[text]
    mant, _, exp = text.partition("e")
    if "." not in mant:
        mant += ".0"
    return mant + ("e" + exp if exp else "")


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(float, lambda d, v: d.represent_scalar("tag:yaml.org,2002:float", _yaml_float(v)))
_Dumper.add_representer(list, lambda d, v: d.represent_sequence("tag:yaml.org,2002:seq", v, flow_style=True))


def dump_config(cfg: RunConfig) -> str:
    """Resolved config as YAML text that parses back to an equal config."""
    return yaml.dump(config_dict(cfg), Dumper=_Dumper, sort_keys=False, default_flow_style=False, width=100)


def resolved_with(cfg: RunConfig, output_dir: Optional[str] = None) -> RunConfig:
    return cfg if output_dir is None else dataclasses.replace(cfg, output_dir=output_dir)
