import json

import numpy as np
import pytest

from hmflow.cli import main as cli_main
from hmflow.energy import energy
from hmflow.errors import ConfigurationError
from hmflow.grid import build_grid
from hmflow.runner import (CSV_COLUMNS, IC_FAMILIES, SCENARIOS,
                           build_initial_condition, build_run_config,
                           execute, parse_config_text, parse_grid_file, run,
                           sweep)

# a fast, fully-resolved configuration for interface tests
FAST = dict(m="2", r_min="1e-3", r_max="1e2", n="512", dt="2e-3",
            t_end="0.5", sample_every="0.1", ic_family="e0_bump",
            ic_A="0.5", ic_sigma="1", label="fast")


def _cfg(tmp_path, **over):
    raw = dict(FAST, **{k: str(v) for k, v in over.items()})
    return build_run_config(raw, out_dir=str(tmp_path))


# ---- config parsing ------------------------------------------------------

def test_parse_config_text():
    raw = parse_config_text(
        "# comment\n m = 2 \n\nlabel = decay_a  # trailing note\n")
    assert raw == {"m": "2", "label": "decay_a"}


def test_parse_config_rejects_duplicates_and_noise():
    with pytest.raises(ConfigurationError):
        parse_config_text("m = 2\nm = 3\n")
    with pytest.raises(ConfigurationError):
        parse_config_text("definitely not a key value line\n")


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="unknown"):
        build_run_config({"mm": "2"}, out_dir=str(tmp_path))


@pytest.mark.parametrize("key,val,fragment", [
    ("m", "0", "m"),
    ("m", "2.5", "m"),
    ("r_min", "-1", "r_min"),
    ("r_max", "1e-5", "r_"),
    ("n", "8", "n"),
    ("dt", "0", "dt"),
    ("t_end", "-1", "t_end"),
    ("sample_every", "0", "sample_every"),
    ("scheme", "RK4", "scheme"),
    ("scenario", "nope", "scenario"),
    ("ic_family", "nope", "ic_family"),
])
def test_validation_messages(tmp_path, key, val, fragment):
    with pytest.raises(ConfigurationError, match=fragment):
        _cfg(tmp_path, **{key: val})


def test_scenario_presets_known(tmp_path):
    assert set(SCENARIOS) == {"free", "q_stationarity",
                              "below_threshold_decay",
                              "above_threshold_stability", "m1_blowup"}
    cfg = build_run_config({"scenario": "q_stationarity"},
                           out_dir=str(tmp_path))
    assert cfg.m == 2 and cfg.ic_family == "q_exact"
    # explicit keys override the preset
    cfg = build_run_config({"scenario": "q_stationarity", "t_end": "0.25"},
                           out_dir=str(tmp_path))
    assert cfg.t_end == 0.25


# ---- initial conditions --------------------------------------------------

def test_ic_families_cover(tmp_path):
    assert set(IC_FAMILIES) == {"e0_bump", "e1_excited", "q_exact",
                                "custom_samples"}


def test_e0_bump_target_energy(tmp_path):
    cfg = _cfg(tmp_path, ic_A="", ic_target_energy="6.0") \
        if False else _cfg(tmp_path, ic_target_energy="6.0")
    g = build_grid(cfg.r_min, cfg.r_max, cfg.n)
    u0 = build_initial_condition(cfg, g)
    assert energy(u0, cfg.m).total == pytest.approx(6.0, rel=1e-6)
    assert u0.inner_limit == 0.0


def test_e0_bump_energy_window(tmp_path):
    cfg = _cfg(tmp_path, ic_target_energy="9.0")  # >= 4m = 8 for m = 2
    g = build_grid(cfg.r_min, cfg.r_max, cfg.n)
    with pytest.raises(ConfigurationError):
        build_initial_condition(cfg, g)


def test_e1_excited_window(tmp_path):
    cfg = _cfg(tmp_path, ic_family="e1_excited", ic_s0="1",
               ic_sigma="3", ic_target_energy="8.0")
    g = build_grid(cfg.r_min, cfg.r_max, cfg.n)
    u0 = build_initial_condition(cfg, g)
    assert u0.inner_limit == np.pi
    assert energy(u0, cfg.m).total == pytest.approx(8.0, rel=1e-6)
    bad = _cfg(tmp_path, ic_family="e1_excited", ic_s0="1",
               ic_sigma="3", ic_target_energy="30.0")  # > 6m = 12
    with pytest.raises(ConfigurationError):
        build_initial_condition(bad, g)


def test_custom_samples_roundtrip(tmp_path):
    g = build_grid(1e-3, 1e2, 512)
    r = np.geomspace(1e-3, 1e2, 300)
    u = 0.5 * (r / (1 + r**2))  # decays at both ends, zero-degree
    path = tmp_path / "ic.txt"
    np.savetxt(path, np.column_stack([r, u]))
    cfg = _cfg(tmp_path, ic_family="custom_samples", ic_file=str(path))
    u0 = build_initial_condition(cfg, g)
    assert u0.inner_limit == 0.0
    mid = np.abs(np.log(g.nodes)).argmin()
    assert u0.values[mid] == pytest.approx(0.5 * g.nodes[mid]
                                           / (1 + g.nodes[mid] ** 2), rel=1e-3)


def test_custom_samples_missing_file(tmp_path):
    cfg = _cfg(tmp_path, ic_family="custom_samples",
               ic_file=str(tmp_path / "absent.txt"))
    g = build_grid(1e-3, 1e2, 512)
    with pytest.raises(ConfigurationError):
        build_initial_condition(cfg, g)


# ---- run artifacts -------------------------------------------------------

def test_run_artifacts_and_determinism(tmp_path):
    cfg = _cfg(tmp_path / "a")
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    assert run(cfg) == 0
    cfg2 = _cfg(tmp_path / "b")
    assert run(cfg2) == 0
    csv_a = (tmp_path / "a" / "fast_trajectory.csv").read_bytes()
    csv_b = (tmp_path / "b" / "fast_trajectory.csv").read_bytes()
    assert csv_a == csv_b  # bit-identical reruns
    header = csv_a.decode().splitlines()[0].split(",")
    assert header == CSV_COLUMNS
    summary = json.loads((tmp_path / "a" / "fast_summary.json").read_text())
    for key in ("scenario", "label", "status", "classification", "checks",
                "final_metrics", "dissipation_residual_history", "provenance"):
        assert key in summary
    assert summary["status"] == "Global"
    assert summary["provenance"]["grid"]["n"] == 512
    assert len(summary["dissipation_residual_history"]) >= 2


def test_trajectory_rows_consistent(tmp_path):
    cfg = _cfg(tmp_path)
    assert run(cfg) == 0
    rows = (tmp_path / "fast_trajectory.csv").read_text().splitlines()
    ncol = len(CSV_COLUMNS)
    data = np.array([[float(x) for x in row.split(",")]
                     for row in rows[1:]])
    assert data.shape[1] == ncol
    t = data[:, 0]
    assert t[0] == 0.0 and np.all(np.diff(t) > 0)
    e = data[:, 1]
    assert np.all(np.diff(e) <= 1e-8 * e[0])  # dissipation
    assert np.allclose(e, data[:, 2] + data[:, 3], rtol=1e-12)


def test_scenario_failure_exit_code(tmp_path):
    # an over-strict stationarity check: evolving a wide bump under the
    # stationarity scenario cannot keep the drift small
    cfg = build_run_config(
        {"scenario": "q_stationarity", "ic_family": "e0_bump", "ic_A": "1",
         "ic_sigma": "1", "n": "512", "r_min": "1e-3", "r_max": "1e2",
         "t_end": "0.5", "label": "drifty"},
        out_dir=str(tmp_path))
    assert run(cfg) == 3


def test_execute_classifies_decay(tmp_path):
    cfg = _cfg(tmp_path, ic_A="0.3", t_end="8", sample_every="0.5")
    res = execute(cfg)
    assert res.status == "Global"
    assert res.classification == "Decayed"


# ---- sweep ---------------------------------------------------------------

def test_parse_grid_file():
    axes = parse_grid_file("m = 1, 2\nic_A = 0.2, 0.4  # amplitudes\n")
    assert axes == [("m", ["1", "2"]), ("ic_A", ["0.2", "0.4"])]
    with pytest.raises(ConfigurationError):
        parse_grid_file("m = 1\nm = 2\n")
    with pytest.raises(ConfigurationError):
        parse_grid_file("bogus = 1\n")


def test_sweep_classifications(tmp_path):
    base = dict(FAST, t_end="8", sample_every="0.5", label="sw")
    axes = [("m", ["1", "2"]), ("ic_A", ["0.2", "0.4"])]
    sweep(base, axes, str(tmp_path), threads=1)
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert header[:3] == ["run_id", "m", "ic_A"]
    assert len(rows) == 5
    table = [dict(zip(header, r.split(","))) for r in rows[1:]]
    # small-amplitude data decays in every degree
    assert all(row["classification"] == "Decayed" for row in table)
    assert all(row["status"] == "Global" for row in table)


def test_sweep_empty_grid(tmp_path):
    sweep(dict(FAST), [("m", [])], str(tmp_path), threads=1)
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(rows) == 1  # header only


def test_sweep_records_failures(tmp_path):
    base = dict(FAST)
    axes = [("ic_A", ["0.3", "50.0"])]  # the huge amplitude exceeds E0 window
    sweep(base, axes, str(tmp_path), threads=1)
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    table = [dict(zip(rows[0].split(","), r.split(","))) for r in rows[1:]]
    assert table[0]["status"] == "Global"
    assert table[1]["status"] == "Failed"
    assert table[1]["error"] != ""


# ---- CLI -----------------------------------------------------------------

def _write_cfg(tmp_path, name="c.cfg", **over):
    raw = dict(FAST, **{k: str(v) for k, v in over.items()})
    text = "".join(f"{k} = {v}\n" for k, v in raw.items())
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_check_and_run(tmp_path):
    path = _write_cfg(tmp_path)
    assert cli_main(["check", path]) == 0
    assert cli_main(["--out", str(tmp_path), "run", path]) == 0
    assert (tmp_path / "fast_trajectory.csv").exists()


def test_cli_invalid_config(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("m = 0\n")
    assert cli_main(["check", str(p)]) == 1
    assert cli_main(["run", str(p)]) == 1


def test_cli_sweep(tmp_path):
    cfg = _write_cfg(tmp_path, t_end="0.2")
    grid = tmp_path / "grid.txt"
    grid.write_text("ic_A = 0.2, 0.4\n")
    assert cli_main(["--out", str(tmp_path), "sweep", cfg,
                     "--grid", str(grid)]) == 0
    assert (tmp_path / "sweep.csv").exists()
