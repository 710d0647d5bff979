"""Command-line front end: config parsing, subcommands, exit codes."""

import json

import pytest

from ddlab.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    main,
    parse_config,
    sweep_config_from_sections,
)


# ---------------------------------------------------------------------------
# config parsing


def _write(tmp_path, text):
    p = tmp_path / "cfg.ini"
    p.write_text(text)
    return p


def test_parse_config_basic(tmp_path):
    p = _write(tmp_path, """
# comment
[problem]
flux = burgers
t_end = 0.25   # trailing comment
[sweep]
epsilons = 0.04, 0.02
grids = 128,256
[output]
dir = out
""")
    sections = parse_config(p)
    assert sections["problem"]["flux"] == "burgers"
    assert sections["problem"]["t_end"] == 0.25
    assert sections["sweep"]["epsilons"] == (0.04, 0.02)
    assert sections["sweep"]["grids"] == (128, 256)
    assert sections["output"]["dir"] == "out"


def test_parse_config_unknown_section(tmp_path):
    p = _write(tmp_path, "[mystery]\nx = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(p)


def test_parse_config_unknown_key_lists_known(tmp_path):
    p = _write(tmp_path, "[sweep]\nepsilon = 0.1\n")
    with pytest.raises(ConfigError, match="known keys:.*epsilons"):
        parse_config(p)


def test_parse_config_bad_value(tmp_path):
    p = _write(tmp_path, "[sweep]\ngamma = three\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config(p)


def test_parse_config_key_outside_section(tmp_path):
    p = _write(tmp_path, "flux = burgers\n")
    with pytest.raises(ConfigError, match="outside"):
        parse_config(p)


def test_parse_config_missing_equals(tmp_path):
    p = _write(tmp_path, "[problem]\nflux burgers\n")
    with pytest.raises(ConfigError, match="key=value"):
        parse_config(p)


def test_sweep_config_from_sections(tmp_path):
    p = _write(tmp_path, """
[problem]
flux = burgers
initial = smoothed_riemann
uL = 1.0
uR = 0.0
w = 0.02
t_end = 0.3
[sweep]
epsilons = 0.04, 0.02
grids = 128, 256
gamma = 2.5
[diagnostics]
enabled = production
window_t_lo = 0.2
window_t_hi = 0.3
[output]
dir = somewhere
""")
    cfg = sweep_config_from_sections(parse_config(p))
    assert cfg.epsilons == (0.04, 0.02)
    assert cfg.grid_ns == (128, 256)
    assert cfg.t_end == 0.3
    assert cfg.diagnostics == ("production",)
    assert cfg.window_t == (0.2, 0.3)
    assert dict(cfg.initial_args) == {"uL": 1.0, "uR": 0.0, "w": 0.02}
    assert cfg.out_dir == "somewhere"
    cfg2 = sweep_config_from_sections(parse_config(p), out_override="other")
    assert cfg2.out_dir == "other"


def test_sweep_config_bad_gamma_fails_at_scaling(tmp_path):
    cfg = sweep_config_from_sections({"sweep": {"gamma": -1.0}})
    with pytest.raises(ValueError):
        cfg.scaling()


# ---------------------------------------------------------------------------
# subcommands through main()


def test_main_solve_writes_snapshots(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["solve", "--preset", "heat", "--epsilon", "0.1",
                 "--N", "64", "--T", "0.2", "--samples", "5",
                 "--out", str(out)])
    assert code == EXIT_OK
    snaps = sorted(out.glob("snapshot_*.csv"))
    assert len(snaps) == 5
    with open(out / "manifest.json") as fh:
        manifest = json.load(fh)
    assert manifest["N"] == 64
    assert not manifest["blowup"]


def test_main_solve_unknown_preset(tmp_path):
    assert main(["solve", "--preset", "nope",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_main_diagnose_on_stored_run(tmp_path, capsys):
    out = tmp_path / "run"
    main(["solve", "--preset", "heat", "--epsilon", "0.1", "--N", "64",
          "--T", "0.2", "--samples", "5", "--out", str(out)])
    code = main(["diagnose", "--run", str(out)])
    assert code == EXIT_OK
    lines = (out / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "diag,name,param,value,holds"
    assert any("balance_residual" in ln for ln in lines[1:])


def test_main_compare_identical_runs(tmp_path, capsys):
    a = tmp_path / "a"
    main(["solve", "--preset", "heat", "--epsilon", "0.1", "--N", "64",
          "--T", "0.2", "--samples", "3", "--out", str(a)])
    capsys.readouterr()  # drop the solve output
    code = main(["compare", "--a", str(a), "--b", str(a)])
    assert code == EXIT_OK
    outlines = capsys.readouterr().out.splitlines()
    dists = dict(ln.split() for ln in outlines)
    assert float(dists["L1"]) == 0.0
    assert float(dists["Linf"]) == 0.0


def test_main_classify(capsys):
    assert main(["classify", "--r", "2", "--m", "2", "--gamma", "1.5"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "thm31"
    assert main(["classify", "--r", "1", "--m", "1", "--gamma", "2.5"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "thm32"


def test_main_sweep_from_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("""
[problem]
t_end = 0.2
[sweep]
epsilons = 0.08, 0.04
grids = 64, 128
ref_n = 256
samples = 5
[diagnostics]
enabled = young
theta_t_center = 0.1
theta_t_radius = 0.08
kruzkov_t_center = 0.1
kruzkov_t_radius = 0.08
window_t_lo = 0.1
window_t_hi = 0.2
""")
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(cfg), "--out", str(out),
                 "--plot-data"])
    assert code == EXIT_OK
    assert (out / "records.csv").exists()
    assert (out / "summary.json").exists()
    plot = (out / "plot_L1.dat").read_text().splitlines()
    assert len(plot) == 2
    assert float(plot[0].split()[0]) == 0.08


def test_main_sweep_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[sweep]\nepsilon = 0.1\n")
    assert main(["sweep", "--config", str(cfg)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
