import json
import subprocess
import sys

import pytest

from frontspeed import io
from frontspeed.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_PASS, main
from frontspeed.config import load_config

SMALL = """\
cell:
  nx_nodes: 32
  ny_nodes: 32
field:
  name: {name}
direction: {direction}
ladders:
  M_value: 2.0
  M_ladder: [1.0, 4.0, 16.0, 64.0]
  eps_ladder: [1.0, 0.5]
  B_ladder: [1.0, 2.0]
  regime_M_ladder: [64.0, 128.0, 256.0, 512.0]
topology:
  K_elements: 16
"""


def write_config(tmp_path, name="shear_sin", direction="[1.0, 0.0]", extra=""):
    p = tmp_path / "run.yaml"
    p.write_text(SMALL.format(name=name, direction=direction) + extra)
    return p


def run(tmp_path, command, cfg, out="out"):
    return main([command, "--config", str(cfg), "--out", str(tmp_path / out)])


def test_validate_and_resolved_config(tmp_path):
    cfg = write_config(tmp_path)
    assert run(tmp_path, "validate", cfg) == EXIT_PASS
    rep = io.read_json(tmp_path / "out" / "validation.json")
    assert rep["schema_version"] == io.SCHEMA_VERSION
    assert rep["passed"] is True
    resolved = load_config(tmp_path / "out" / "resolved_config.yaml")
    assert resolved.ladders.M_value == 2.0 and resolved.output_dir == str(tmp_path / "out")


def test_speed_writes_csv(tmp_path):
    assert run(tmp_path, "speed", write_config(tmp_path)) == EXIT_PASS
    (row,) = io.read_csv(tmp_path / "out" / "speed.csv")
    assert float(row["c_star"]) == pytest.approx(2.04998201614404, rel=1e-3)
    assert float(row["ratio"]) == pytest.approx(float(row["c_star"]) / 2.0)


def test_sweep_and_limit(tmp_path):
    cfg = write_config(tmp_path)
    assert run(tmp_path, "sweep", cfg) == EXIT_PASS
    rows = io.read_csv(tmp_path / "out" / "sweep.csv")
    assert [float(r["M"]) for r in rows] == [1.0, 4.0, 16.0, 64.0]
    assert run(tmp_path, "limit", cfg) == EXIT_PASS
    lim = io.read_json(tmp_path / "out" / "limit.json")
    assert lim["limit"] == pytest.approx(0.22257682113393573, rel=5e-3)
    assert lim["ansatz"] == "shear_exact"


def test_topology_on_cellular(tmp_path):
    cfg = write_config(tmp_path, name="cellular")
    assert run(tmp_path, "topology", cfg) == EXIT_PASS
    top = io.read_json(tmp_path / "out" / "topology.json")
    assert top["has_channel"] is False and top["limit_positive"] is False
    assert top["regular_levels"] == 129
    assert io.read_csv(tmp_path / "out" / "contours.csv")


def test_verify_perpendicular_shear(tmp_path):
    cfg = write_config(tmp_path, direction="[0.0, 1.0]")
    assert run(tmp_path, "verify", cfg) == EXIT_PASS
    rep = io.read_json(tmp_path / "out" / "verify.json")
    assert rep["passed"] is True
    assert {c["name"] for c in rep["checks"]} == {"limits_agree", "verdict_matches_limits",
                                                   "mixed_limits_agree"}


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    for out in ("a", "b"):
        assert run(tmp_path, "speed", cfg, out) == EXIT_PASS
        assert run(tmp_path, "limit", cfg, out) == EXIT_PASS
    for name in ("speed.csv", "h_profile.csv", "limit.json", "resolved_config.yaml"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a.replace(b"/a", b"") == b.replace(b"/b", b""), name


@pytest.mark.parametrize("extra,fragment", [
    ("solver:\n  bogus_key: 1\n", "unknown key"),
    ("", None),
])
def test_config_errors_exit_2(tmp_path, capsys, extra, fragment):
    if fragment is None:
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("ladders:\n  M_ladder: [4.0, 2.0, 1.0, 8.0]\n")
        fragment = "strictly increasing"
    else:
        cfg = write_config(tmp_path, extra=extra)
    assert run(tmp_path, "speed", cfg) == EXIT_CONFIG
    assert fragment in capsys.readouterr().err


def test_missing_file_and_bad_catalog_name(tmp_path):
    assert main(["speed", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG
    assert run(tmp_path, "validate", write_config(tmp_path, name="vortex")) == EXIT_CONFIG


def test_failed_validation_exits_1(tmp_path):
    cfg = write_config(tmp_path, extra="")
    text = cfg.read_text().replace("field:\n", "field:\n  zeta_const: 0.5\n  zeta_amp: 1.0\n")
    cfg.write_text(text)
    assert run(tmp_path, "validate", cfg) == EXIT_CHECK


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "frontspeed.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("validate", "speed", "sweep", "limit", "mixed", "topology", "verify"):
        assert cmd in out.stdout


def test_mixed_routes(tmp_path):
    cfg = write_config(tmp_path)
    code = run(tmp_path, "mixed", cfg)
    rep = io.read_json(tmp_path / "out" / "mixed.json")
    assert rep["variational"] == pytest.approx(0.22507907903927651, rel=5e-3)
    assert code == (EXIT_PASS if rep["pairwise_within_tolerance"] else EXIT_CHECK)
    assert len(io.read_csv(tmp_path / "out" / "mixed_eps.csv")) == 8
