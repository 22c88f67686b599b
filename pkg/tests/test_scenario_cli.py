import json
import time

import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

from darkcavity import cli
from darkcavity.core import HBAR
from darkcavity.scenario import (
    BUNDLED, ScenarioError, bundled_path, fmt_energy, fmt_time, load_scenario, parse_quantity,
    read_csv, run_scenario, scenario_from_dict,
)

FIG2_PLATEAU = 0.901780410046  # 1 - |W_1|^2 / W_N^2 for the fig2 profile


def _run_cli(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# --- units -----------------------------------------------------------------------

@pytest.mark.parametrize("text,val,unit", [("120 meV", 120.0, "mev"), ("1.5eV", 1.5, "ev"),
                                           ("-3e2 ueV", -300.0, "uev"), ("20 fs", 20.0, "fs"),
                                           ("1000 /mu", 1000.0, "/mu"), (".5 ps", 0.5, "ps")])
def test_parse_quantity(text, val, unit):
    assert parse_quantity(text) == (val, unit)


@pytest.mark.parametrize("bad", [120, "120", "meV", "1 2 meV", True, None])
def test_parse_quantity_rejects(bad):
    with pytest.raises(ValueError):
        parse_quantity(bad)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_format_round_trip(x):
    assert parse_quantity(fmt_energy(x)) == (x, "mev")
    assert parse_quantity(fmt_time(x)) == (x, "fs")


@given(st.floats(0.1, 1e4), st.sampled_from([("meV", 1.0), ("eV", 1e3), ("ueV", 1e-3)]))
def test_energy_units_normalize(x, unit):
    name, scale = unit
    s = scenario_from_dict({"name": "u", "kind": "spectrum", "cavity": {"decay": f"{x!r} {name}"},
                            "spectrum": {"qubits": [2], "rabi": "1 meV",
                                         "nu": {"start": "-1 meV", "stop": "1 meV",
                                                "samples": 3}}})
    assert s.mu == pytest.approx(x * scale, rel=1e-12)


def test_lifetime_and_mu_multiples():
    s = load_scenario("fig3")
    assert s.mu == pytest.approx(HBAR / 20)
    assert s.times[-1] == pytest.approx(1000 * 20.0)
    assert len(s.times) == 4001


# --- bundled scenarios ----------------------------------------------------------------

def test_bundled_files_exist():
    for name in BUNDLED:
        assert bundled_path(name).is_file()


def test_fig2_contents():
    s = load_scenario("fig2")
    assert s.kind == "evolve" and s.ensemble.n == 21
    assert np.abs(s.ensemble.rabi).max() == pytest.approx(120.0)
    assert s.ensemble.is_resonant
    assert s.initial.c0[0] == 1
    assert s.times[0] == 0 and s.times[-1] == pytest.approx(1000.0)


def test_fig3_contents():
    s = load_scenario("fig3")
    assert s.kind == "inhomog" and s.seed == 0 and s.ensemble.n == 41
    assert np.abs(s.ensemble.detunings).max() <= 50.0
    assert s.ensemble.collective_rabi == pytest.approx(534.2787782964, rel=1e-9)
    assert load_scenario("fig3").config_hash == s.config_hash


# --- validation -------------------------------------------------------------------------

def _fig2_raw():
    return yaml.safe_load(bundled_path("fig2").read_text())


def test_missing_decay_names_field():
    raw = _fig2_raw()
    del raw["cavity"]
    with pytest.raises(ScenarioError) as ei:
        scenario_from_dict(raw)
    assert any(p == "cavity.decay" for p, _ in ei.value.errors)
    assert "cavity.decay" in str(ei.value)


def test_all_errors_enumerated():
    raw = _fig2_raw()
    raw["cavity"] = {"lifetime": "20 meV"}
    raw["time"]["samples"] = 0
    raw["ensemble"]["peak_rabi"] = "fast"
    raw["bogus"] = 1
    with pytest.raises(ScenarioError) as ei:
        scenario_from_dict(raw)
    paths = {p for p, _ in ei.value.errors}
    assert {"cavity.lifetime", "time.samples", "ensemble.peak_rabi", "bogus"} <= paths
    j = ei.value.to_json()
    assert j["error"] == "ScenarioError" and len(j["errors"]) == len(ei.value.errors)


def test_random_detunings_need_seed():
    raw = yaml.safe_load(bundled_path("fig3").read_text())
    del raw["seed"]
    with pytest.raises(ScenarioError, match="seed"):
        scenario_from_dict(raw)


def test_unreadable_file(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.scenario")
    bad = tmp_path / "bad.scenario"
    bad.write_text("name: [unclosed\n")
    with pytest.raises(ScenarioError, match="parse error"):
        load_scenario(bad)


# --- runs --------------------------------------------------------------------------------

@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_run_deterministic_and_fast(name, tmp_path):
    s = load_scenario(name)
    t0 = time.perf_counter()
    a = run_scenario(s, tmp_path / "a")
    assert time.perf_counter() - t0 < 60
    b = run_scenario(load_scenario(name), tmp_path / "b")
    assert a.manifest["outputs"] == b.manifest["outputs"]
    for f in a.files:
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        notes, cols, data = read_csv(f)
        assert notes["config-sha256"] == s.config_hash
        assert data.shape[1] == len(cols) and np.all(np.isfinite(data))
    # rebuild from the manifest alone
    c = run_scenario(load_scenario(a.out_dir / "manifest.json"), tmp_path / "c")
    assert c.manifest["outputs"] == a.manifest["outputs"]
    assert c.manifest["config_sha256"] == a.manifest["config_sha256"]


def test_fig2_plateau_from_csv(tmp_path):
    res = run_scenario(load_scenario("fig2"), tmp_path)
    _, cols, data = read_csv(tmp_path / "trajectory.csv")
    q = data[:, cols.index("qubit_total")]
    t = data[:, cols.index("t_fs")]
    late = t >= 500
    assert np.all(np.abs(q[late] - FIG2_PLATEAU) < 5e-3)
    assert res.manifest["seed"] is None


def test_spectra_three_columns(tmp_path):
    run_scenario(load_scenario("spectra"), tmp_path)
    _, cols, data = read_csv(tmp_path / "spectrum.csv")
    assert cols == ["nu_meV", "S_N5", "S_N10", "S_N20"]
    assert np.all(data[:, 1:] > 0)


def test_block_fig6_retained(tmp_path):
    run_scenario(load_scenario("block-fig6"), tmp_path)
    notes, cols, data = read_csv(tmp_path / "layers.csv")
    assert float(notes["retained_fraction"]) == pytest.approx(1 / 3)
    assert data[-1, cols.index("layer_p2")] == pytest.approx(1 / 3, abs=1e-3)


# --- command line ----------------------------------------------------------------------------

def test_cli_version(capsys):
    from darkcavity import __version__
    code, out, _ = _run_cli(["--version"], capsys)
    assert code == 0 and out.strip() == __version__


def test_cli_evolve_bundled(tmp_path, capsys):
    code, out, _ = _run_cli(["evolve", "fig2", "--out", str(tmp_path / "r")], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["status"] == "ok" and summary["files"] == ["trajectory.csv"]


def test_cli_env_root(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    code, out, _ = _run_cli(["field", "--z0", "1.5", "--samples", "11"], capsys)
    assert code == 0
    assert (tmp_path / "field" / "manifest.json").is_file()


def test_cli_modes_from_evolve(tmp_path, capsys):
    code, out, _ = _run_cli(["modes", "fig2", "--out", str(tmp_path)], capsys)
    assert code == 0
    _, cols, data = read_csv(tmp_path / "modes.csv")
    assert cols == ["re_p_meV", "im_p_meV"] and len(data) == 22
    assert data[:, 0].sum() == pytest.approx(-HBAR / 20 / 2, rel=1e-9)


def test_cli_flag_commands(tmp_path, capsys):
    for argv in (["spectrum", "--n-qubits", "5", "20", "--rabi", "10", "--mu", "20"],
                 ["block", "--n-qubits", "4", "--m-photons", "2", "--rabi", "100", "--mu", "32.9",
                  "--samples", "21"],
                 ["sse", "--trajectories", "20", "--mu", "32.9", "--rabi", "20", "15",
                  "--gamma-el", "5", "--dt", "0.4", "--t-max", "40", "--samples", "5"]):
        code, out, err = _run_cli(argv + ["--out", str(tmp_path / argv[0])], capsys)
        assert code == 0, err


def test_cli_scenario_error_exit_2(tmp_path, capsys):
    raw = _fig2_raw()
    del raw["cavity"]
    p = tmp_path / "x.scenario"
    p.write_text(yaml.safe_dump(raw))
    code, out, err = _run_cli(["evolve", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and out == ""
    j = json.loads(err)
    assert j["error"] == "ScenarioError"
    assert any(e["path"] == "cavity.decay" for e in j["errors"])


def test_cli_usage_errors(capsys, tmp_path):
    for argv in ([], ["nope"], ["field"], ["block", "--n-qubits", "4", "--m-photons", "2",
                                          "--rabi", "1", "--mu", "1", "--initial", "zzz"],
                 ["evolve", "spectra", "--out", str(tmp_path)]):
        code, _, err = _run_cli(argv, capsys)
        assert code == 2
        assert json.loads(err)["error"] == "UsageError"


def test_cli_runtime_error_exit_1(tmp_path, capsys):
    code, _, err = _run_cli(["sse", "--mu", "32.9", "--rabi", "20", "--dt", "50",
                             "--out", str(tmp_path)], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "StabilityError"


def test_cli_reproduce_all_subset(tmp_path, capsys):
    code, out, _ = _run_cli(["reproduce-all", "--out", str(tmp_path), "--only", "spectra",
                             "block-fig6"], capsys)
    assert code == 0
    assert [r["name"] for r in json.loads(out)["runs"]] == ["spectra", "block-fig6"]


def test_cli_numeric_spectrum_matches_analytic(tmp_path, capsys):
    base = ["spectrum", "--n-qubits", "5", "10", "--rabi", "10", "--mu", "20", "--samples", "201"]
    assert _run_cli(base + ["--numeric", "--out", str(tmp_path / "n")], capsys)[0] == 0
    assert _run_cli(base + ["--out", str(tmp_path / "a")], capsys)[0] == 0
    _, _, num = read_csv(tmp_path / "n" / "spectrum.csv")
    _, _, ana = read_csv(tmp_path / "a" / "spectrum.csv")
    assert np.abs(num[:, 1:] - ana[:, 1:]).max() < 1e-3 * ana[:, 1:].max()
