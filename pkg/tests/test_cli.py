import csv
import json
import os

import numpy as np
import pytest

from atomcount import cli, scenarios
from atomcount.config import ConfigError, load_scenario, parse_text, scenario_from_dict
from atomcount.lattice import DetectorBox

HERE = os.path.dirname(__file__)
SCEN = os.path.join(HERE, "..", "scripts", "scenarios")


def write(tmp_path, text, name="s.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# config parsing


def test_parse_types_and_comments():
    v = parse_text("""
        # comment
        name = demo   # trailing comment
        lattice.dims = 2, 3
        state.alpha = 0.5+0.25i
        detector.pair = symmetric
        sweep.num = 4
    """)
    assert v["name"] == "demo"
    assert v["lattice.dims"] == (2, 3)
    assert v["state.alpha"] == 0.5 + 0.25j
    assert v["detector.pair"] is True
    sc = scenario_from_dict(v)
    assert sc.geometry.dims == (2, 3, 1)


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "lattice.dims = 2\nlattice.dims = 3",
    "sweep.num = many",
    "no equals sign here",
    "state.kind = glass",
    "mode = near",
    "detector.kappa = 1.5",
    "detector.dz_m = -1",
    "lattice.dims = 1, 1, 1, 1",
    "lattice.spacing_m = 1e-8",
    "lattice.dims = 3\nstate.kind = block",
    "state.kind = superposition",
    "state.kind = pattern\nlattice.dims = 2\nstate.occupations = 1",
    "sweep.axis = z0\nsweep.start_m = -0.01\nsweep.stop_m = 0.01\nsweep.num = 3",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        scenario_from_dict(parse_text(text))


def test_sweep_fixing():
    sc = scenario_from_dict(parse_text("sweep.axis = xd\nsweep.start_m = 0\nsweep.stop_m = 0.01\nsweep.num = 3\ndetector.pair = symmetric"))
    fixed = sc.at(0.005)
    assert fixed.sweep.axis == "none"
    assert [d.center[0] for d in fixed.detectors()] == [0.005, -0.005]


def test_shipped_scenarios_load():
    for name in os.listdir(SCEN):
        load_scenario(os.path.join(SCEN, name))


# ---------------------------------------------------------------------------
# command line


def test_single_site_whole_space(tmp_path):
    cfg = write(tmp_path, "name = one\ndetector.dx_m = 0.02\ndetector.dy_m = 0.02\ndetector.dz_m = 0.02\n")
    assert cli.main(["run", cfg, "--out-dir", str(tmp_path / "out")]) == 0
    rows = read_csv(tmp_path / "out" / "one.csv")
    assert rows[0] == ["m", "p"]
    assert float(rows[2][1]) == pytest.approx(1.0, abs=1e-12)
    summary = json.loads((tmp_path / "out" / "one_summary.json").read_text())
    assert summary["mean"] == pytest.approx(1.0, abs=1e-12)


def test_joint_and_sweep_schemas(tmp_path):
    out = str(tmp_path / "out")
    assert cli.main(["run", os.path.join(SCEN, "mi_two_detectors_2x2.cfg"), "--out-dir", out]) == 0
    rows = read_csv(os.path.join(out, "mi_two_detectors_2x2.csv"))
    assert rows[0] == ["m", "n", "p"]
    p = np.array([float(r[2]) for r in rows[1:]])
    assert abs(p.sum() - 1) < 1e-9
    cfg = write(tmp_path, "sweep.axis = dz\nsweep.start_m = 1e-4\nsweep.stop_m = 1e-3\nsweep.num = 3\nlattice.dims = 1, 1, 3\n")
    assert cli.main(["run", cfg, "--out-dir", out]) == 0
    rows = read_csv(os.path.join(out, "scenario_sweep.csv"))
    assert rows[0] == ["axis_value", "mean", "variance", "corr"] and len(rows) == 4
    assert rows[1][3] == "nan"


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("ATOMCOUNT_OUT", str(tmp_path / "env"))
    assert cli.main(["run", os.path.join(SCEN, "checkerboard_small.cfg")]) == 0
    assert (tmp_path / "env" / "checkerboard_small.csv").exists()


def test_rerun_is_bit_identical(tmp_path):
    cfg = os.path.join(SCEN, "checkerboard_small.cfg")
    for d in ("a", "b"):
        assert cli.main(["run", cfg, "--out-dir", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "checkerboard_small.csv").read_bytes() == (tmp_path / "b" / "checkerboard_small.csv").read_bytes()


def test_floats_have_17_significant_digits(tmp_path):
    cli.main(["run", os.path.join(SCEN, "checkerboard_small.cfg"), "--out-dir", str(tmp_path)])
    rows = read_csv(tmp_path / "checkerboard_small.csv")
    assert float(rows[1][1]) == float(f"{float(rows[1][1]):.17g}")
    assert len(rows[1][1].replace("0.", "").replace("e-", "").lstrip("0")) >= 15


def test_exit_codes(tmp_path, monkeypatch, caplog):
    out = str(tmp_path / "out")
    assert cli.main(["run", write(tmp_path, "bogus = 1"), "--out-dir", out]) == cli.EXIT_CONFIG
    assert cli.main(["run", str(tmp_path / "missing.cfg"), "--out-dir", out]) == cli.EXIT_CONFIG
    assert cli.main(["fig", "9", "--out-dir", out]) == cli.EXIT_CONFIG
    big = write(tmp_path, "lattice.dims = 1, 1, 25\ndetector.dz_m = 2e-5\n", "big.cfg")
    assert cli.main(["run", big, "--out-dir", out]) == cli.EXIT_CAPACITY
    assert cli.main(["verify", os.path.join(SCEN, "mi_large_detector.cfg"), "--out-dir", out]) == cli.EXIT_CAPACITY

    real = scenarios.correlation_matrix

    def broken(*args, **kw):
        A = real(*args, **kw)
        E = A.entries.copy()
        E[0, 0] = 2.0
        return type(A)(E, A.mode, A.context, A.detector)

    monkeypatch.setattr(scenarios, "correlation_matrix", broken)
    cfg = os.path.join(SCEN, "checkerboard_small.cfg")
    assert cli.main(["run", cfg, "--out-dir", out]) == cli.EXIT_INVARIANT
    dump = os.path.join(out, "checkerboard_small_A1_dump.npy")
    assert np.load(dump)[0, 0] == 2.0


def test_threads_flag(tmp_path):
    assert cli.main(["run", os.path.join(SCEN, "checkerboard_small.cfg"), "--threads", "1", "--out-dir", str(tmp_path)]) == 0
    assert cli.main(["run", os.path.join(SCEN, "checkerboard_small.cfg"), "--threads", "0", "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG


def test_mode_override(tmp_path):
    cfg = os.path.join(SCEN, "checkerboard_small.cfg")
    assert cli.main(["run", cfg, "--mode", "far_field", "--out-dir", str(tmp_path)]) == 0


# ---------------------------------------------------------------------------
# oracle verification


def test_verify_downscaled_patterns(capsys):
    assert cli.main(["verify", os.path.join(SCEN, "checkerboard_small.cfg")]) == 0
    assert cli.main(["verify", os.path.join(SCEN, "mi_two_detectors_2x2.cfg")]) == 0
    assert "max |dp|" in capsys.readouterr().out


def test_verify_superfluid_is_poisson_on_both_sides(tmp_path):
    cfg = write(tmp_path, "lattice.dims = 2, 2, 2\nstate.kind = coherent\nstate.alpha = 0.15\ndetector.dz_m = 2e-4\n")
    sc = load_scenario(cfg)
    assert scenarios.verify_scenario(sc) < 1e-10


def test_verify_superposition(tmp_path):
    cfg = write(tmp_path, "lattice.dims = 1, 1, 4\nstate.kind = superposition\nstate.n_particles = 2\ndetector.dz_m = 3e-5\n")
    assert scenarios.verify_scenario(load_scenario(cfg)) < 1e-8


def test_verify_flags_disagreement(tmp_path, monkeypatch):
    monkeypatch.setattr(scenarios, "verify_scenario", lambda sc: 1e-3)
    monkeypatch.setattr(cli, "verify_scenario", lambda sc: 1e-3)
    assert cli.main(["verify", os.path.join(SCEN, "checkerboard_small.cfg")]) == cli.EXIT_VERIFY
