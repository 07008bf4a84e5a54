import dataclasses
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from frontspeed.config import RunConfig, dump_config, load_config, parse_config
from frontspeed.errors import ConfigError

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))


def test_empty_text_gives_defaults():
    assert parse_config("") == RunConfig()


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = load_config(path)
    assert parse_config(dump_config(cfg)) == cfg


finite = st.floats(1e-6, 1e6, allow_nan=False)


@given(finite, finite, st.integers(4, 64).map(lambda k: 2 * k), st.lists(finite, min_size=4, max_size=8, unique=True))
def test_dump_parse_round_trip(L1, eigen_tol, n, ladder):
    cfg = RunConfig()
    cfg = dataclasses.replace(
        cfg, cell=dataclasses.replace(cfg.cell, L1_length=L1, nx_nodes=n),
        solver=dataclasses.replace(cfg.solver, eigen_tol=eigen_tol),
        ladders=dataclasses.replace(cfg.ladders, M_ladder=tuple(sorted(ladder))))
    assert parse_config(dump_config(cfg)) == cfg


def test_integers_accepted_for_floats_and_exponents_without_dot():
    cfg = parse_config("cell:\n  L1_length: 2\nsolver:\n  eigen_tol: 1e-9\n")
    assert cfg.cell.L1_length == 2.0 and isinstance(cfg.cell.L1_length, float)
    assert cfg.solver.eigen_tol == 1e-9


@pytest.mark.parametrize("text,line,col,fragment", [
    ("cell:\n  nx_nodes: 64\n  bogus: 1\n", 3, 3, "unknown key 'bogus'"),
    ("cell:\n  nx_nodes: 6.5\n", 2, 13, "expected an integer"),
    ("field:\n  name: [1, 2]\n", 2, 9, "expected a string"),
    ("checks:\n  limits: maybe\n", 2, 11, "expected true or false"),
    ("cell:\n  nx_nodes: 64\n  nx_nodes: 32\n", 3, 3, "duplicate key"),
    ("ladders:\n  M_ladder: [1.0, 2.0, 2.0, 4.0]\n", 2, 13, "strictly increasing"),
    ("ladders:\n  M_ladder: [1.0, 2.0]\n", 2, 13, "at least 4"),
    ("ladders:\n  eps_ladder: [0.5, 1.0]\n", 2, 15, "eps_ladder"),
    ("ladders:\n  B_ladder: [0.5, 2.0]\n", 2, 13, "B_ladder"),
    ("cell:\n  geometry: annulus\n", 2, 13, "geometry"),
    ("direction: [1.0, 0.0, 0.0]\n", 1, 12, "direction"),
    ("cell: [\n", 2, 1, "YAML syntax"),
])
def test_errors_report_position(text, line, col, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    err = info.value
    assert fragment in str(err)
    assert (err.line, err.column) == (line, col)
    assert f"line {line}" in str(err)
