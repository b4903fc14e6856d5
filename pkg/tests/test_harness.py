import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from decaylab.cli import main
from decaylab.harness import (ConfigError, DecayReport, build_problem, convergence_study, gn_report, load_config,
                              parse_config, run_experiment)
from decaylab.io import read_field, read_header, write_field
from decaylab.solver import GridField

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

CONSTANT = """\
name = "const"
expect = "decayed"

[flux]
preset = "burgers"

[period]
generators = [[1]]

[initial]
preset = "constant"
value = 0.25

[grid]
cells = [64]

[scheme]
t_end = 1.0
output_times = [0.0, 0.5, 1.0]

[analysis]
decay_threshold = 1e-12
"""


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- config parsing

def test_valid_config_parses():
    cfg = parse_config(CONSTANT)
    assert cfg.name == "const" and cfg.table("grid")["cells"] == [64]


def test_unknown_key_reports_its_line():
    text = CONSTANT.replace("value = 0.25", "value = 0.25\nvalu = 1")
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "exp.toml")
    assert exc.value.line == 13 and "valu" in str(exc.value) and "exp.toml:13" in str(exc.value)


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config("colour = 1\n" + CONSTANT)
    assert exc.value.line == 1


def test_invalid_toml_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_config(CONSTANT.replace("t_end = 1.0", "t_end = = 1.0"))
    assert exc.value.line == 18


def test_missing_required_table():
    with pytest.raises(ConfigError, match="missing"):
        parse_config(CONSTANT.replace('[flux]\npreset = "burgers"\n', ""))


def test_non_positive_threshold_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config(CONSTANT.replace("1e-12", "0.0"))
    assert exc.value.line == 22


def test_decayed_expectation_needs_threshold():
    with pytest.raises(ConfigError):
        parse_config(CONSTANT.replace("decay_threshold = 1e-12\n", ""))


def test_missing_grid_file_rejected(tmp_path):
    text = CONSTANT.replace('preset = "constant"\nvalue = 0.25', 'preset = "file"\npath = "nothere"')
    with pytest.raises(ConfigError, match="not found"):
        parse_config(text, tmp_path / "exp.toml")


def test_too_coarse_grid_rejected():
    cfg = parse_config(CONSTANT.replace("cells = [64]", "cells = [16]"))
    with pytest.raises(ConfigError, match="32 cells"):
        build_problem(cfg)


def test_bad_flux_preset_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config(CONSTANT.replace('preset = "burgers"', 'preset = "burger"'))
    assert exc.value.line == 5


def test_shipped_configs_all_parse():
    paths = sorted(CONFIGS.glob("*.toml"))
    assert len(paths) >= 5
    for p in paths:
        build_problem(load_config(p))


def test_table_flux_from_config():
    text = CONSTANT.replace('preset = "burgers"', 'state_interval = [-1, 1]\n'
                            'components = [{breakpoints = [0], coefficients = [[0, -1], [0]]}]')
    phi = build_problem(parse_config(text)).flux
    assert np.array_equal(phi(np.array([-1.0, 1.0]))[0], [1.0, 0.0])


# --- run_experiment

def test_constant_run_writes_all_artifacts(tmp_path):
    res = run_experiment(parse_config(CONSTANT), tmp_path / "out")
    assert res.exit_code == 0 and res.verdict == "decayed"
    out = tmp_path / "out"
    rep = DecayReport.from_csv((out / "decay.csv").read_text(), threshold=1e-12)
    assert rep.x_norm == [0.0, 0.0, 0.0] and rep.verdict == "decayed"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdict"] == "decayed" and summary["seed"] == 0 and summary["exit_code"] == 0
    gn = json.loads((out / "gn_report.json").read_text())
    assert gn["theorem1_ok"] and gn["F"]["intervals"] == [[-1.0, 1.0]]
    u, t = read_field(out / "snapshots" / "u_0002")
    assert t == 1.0 and np.all(u.data == 0.25)


def test_verdict_mismatch_exits_three(tmp_path):
    res = run_experiment(parse_config(CONSTANT.replace('expect = "decayed"', 'expect = "stalled"')), tmp_path)
    assert res.exit_code == 3


def test_perturbed_example1_run_stalls_at_epsilon(tmp_path):
    res = run_experiment(load_config(CONFIGS / "example1_perturbed.toml"), tmp_path)
    assert res.exit_code == 0 and res.verdict == "stalled"
    rep = DecayReport.from_csv((tmp_path / "decay.csv").read_text(), threshold=0.05)
    assert abs(rep.x_norm[-1] - 0.5) < 1e-6
    rows = (tmp_path / "envelope.csv").read_text().splitlines()
    assert rows[0] == "r,M_r,eps_plus,eps_minus" and len(rows) == 5
    gn = json.loads((tmp_path / "gn_report.json").read_text())
    assert gn["F"]["intervals"] == [[0.0, 0.0]] and not gn["theorem1_ok"] and gn["gn_ok"]


def test_summary_verdict_recomputable_from_csv(tmp_path):
    cfg = load_config(CONFIGS / "example1_periodic.toml")
    res = run_experiment(cfg, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    rep = DecayReport.from_csv((tmp_path / "decay.csv").read_text(), summary["decay_threshold"], summary["metric"])
    assert rep.verdict == summary["verdict"] == res.verdict == "decayed"


def test_counterexample_run_stalls(tmp_path):
    res = run_experiment(load_config(CONFIGS / "counterexample_2d.toml"), tmp_path)
    assert res.verdict == "stalled" and res.exit_code == 0


# --- convergence studies

def test_smooth_burgers_is_first_order(tmp_path):
    rows = convergence_study(load_config(CONFIGS / "burgers_smooth.toml"), [128, 256, 512], tmp_path / "s.csv")
    assert all(0.8 <= o <= 1.2 for _, _, _, o in rows[1:])
    assert (tmp_path / "s.csv").read_text().startswith("cells,dx,l1_error,order\n")


def test_constant_study_has_zero_error():
    rows = convergence_study(parse_config(CONSTANT), [32, 64])
    assert all(e == 0.0 for _, _, e, _ in rows) and all(math.isnan(o) for _, _, _, o in rows)


def test_example1_study_errors_decrease():
    text = (CONFIGS / "example1_periodic.toml").read_text()
    text = text.replace("t_end = 3.0", "t_end = 1.0").replace(", 1.5, 2.0, 2.5, 3.0", "")
    rows = convergence_study(parse_config(text), [100, 200, 400])
    errs = [e for _, _, e, _ in rows]
    assert errs[0] > errs[1] > errs[2] > 0


def test_study_without_oracle_rejected():
    text = (CONFIGS / "burgers_sine.toml").read_text()
    with pytest.raises(ConfigError, match="oracle"):
        convergence_study(parse_config(text), [64, 128])


def test_study_output_independent_of_worker_count(tmp_path):
    cfg = load_config(CONFIGS / "burgers_smooth.toml")
    convergence_study(cfg, [64, 128, 256], tmp_path / "one.csv", workers=1)
    convergence_study(cfg, [64, 128, 256], tmp_path / "three.csv", workers=3)
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "three.csv").read_bytes()


def test_run_output_deterministic(tmp_path):
    cfg = load_config(CONFIGS / "burgers_sine.toml")
    text = cfg.text.replace("t_end = 20.0", "t_end = 2.0")
    text = "\n".join(l for l in text.splitlines() if not l.startswith("output_times"))
    a = run_experiment(parse_config(text), tmp_path / "a")
    b = run_experiment(parse_config(text), tmp_path / "b")
    assert (a.out_dir / "decay.csv").read_bytes() == (b.out_dir / "decay.csv").read_bytes()


# --- flux analysis

def test_gn_report_for_example1_and_burgers():
    e1 = gn_report(load_config(CONFIGS / "example1_periodic.toml"))
    assert e1["F"]["intervals"] == [[0.0, 0.0]] and not e1["theorem1_ok"] and e1["gn_ok"]
    bg = gn_report(load_config(CONFIGS / "burgers_sine.toml"))
    assert bg["theorem1_ok"] and bg["gn_ok"]


# --- CLI

def test_cli_run_exit_codes(tmp_path, capsys):
    p = write(tmp_path, CONSTANT)
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 0
    bad = write(tmp_path, CONSTANT.replace("cells = [64]", "cels = [64]"), "bad.toml")
    assert main(["run", str(bad)]) == 2
    assert "bad.toml:15" in capsys.readouterr().err
    mismatch = write(tmp_path, CONSTANT.replace('expect = "decayed"', 'expect = "stalled"'), "mm.toml")
    assert main(["run", str(mismatch), "--out", str(tmp_path / "m")]) == 3


def test_cli_missing_config_exits_two(tmp_path):
    assert main(["run", str(tmp_path / "absent.toml")]) == 2


def test_cli_study_and_analyze(tmp_path, capsys):
    p = write(tmp_path, CONSTANT)
    assert main(["study", str(p), "--refine", "32,64", "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").exists()
    assert main(["analyze-flux", str(p)]) == 0
    out = capsys.readouterr().out
    assert '"theorem1_ok": true' in out


def test_cli_oracle(tmp_path, capsys):
    assert main(["oracle", "0,1", "--epsilon", "0.5", "--points", "8", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "example1_t1.csv").read_text().splitlines()
    assert text[0] == "x,u" and len(text) == 9
    assert main(["oracle", "2"]) == 0
    assert capsys.readouterr().out.startswith("# t = 2\nx,u\n")


def test_module_entry_point(tmp_path):
    p = write(tmp_path, CONSTANT)
    r = subprocess.run([sys.executable, "-m", "decaylab", "run", str(p), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "verdict=decayed" in r.stdout


# --- snapshot files

def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    u = GridField(rng.normal(size=(5, 4, 3)), (0.5, -1.0, 2.0), (0.1, 0.2, 0.3))
    write_field(tmp_path / "f", u, 1.25)
    hdr = read_header(tmp_path / "f")
    assert hdr["format"] == "decaylab-grid" and int(hdr["version"]) == 1
    back, t = read_field(tmp_path / "f")
    assert t == 1.25 and np.array_equal(back.data, u.data)
    assert back.lower == u.lower and back.spacing == u.spacing


def test_grid_file_initial_data(tmp_path):
    u = GridField(np.where(np.arange(64) < 32, 0.5, -0.5), (0.0,), (1 / 64,))
    write_field(tmp_path / "init", u)
    text = CONSTANT.replace('preset = "constant"\nvalue = 0.25', 'preset = "file"\npath = "init"')
    text = text.replace('expect = "decayed"', 'expect = "undetermined"')
    cfg = parse_config(text, tmp_path / "exp.toml")
    spec = build_problem(cfg)
    assert np.array_equal(spec.initial_field().data, u.data)
