import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collective_qo import cli
from collective_qo.cli import PRESETS, ConfigError, ResultTable, ScenarioConfig, main, run_config, tolerance_overrides
from collective_qo.errors import NumericalError
from collective_qo import liouville

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read_csv(path):
    lines = path.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("# ")]
    body = list(csv.reader(io.StringIO("\n".join(ln for ln in lines if not ln.startswith("# ")))))
    return meta, body[0], body[1], body[2:]


@settings(max_examples=40, deadline=None)
@given(omega=st.floats(0.01, 50, allow_nan=False), delta=st.floats(-20, 20, allow_nan=False),
       seed=st.integers(0, 2**31 - 1), n=st.integers(1, 5))
def test_toml_round_trip(omega, delta, seed, n):
    cfg = ScenarioConfig("tls", {"Omega": omega, "Delta": delta}, ("steady_state", "spectrum"),
                         {"Delta": tuple(np.linspace(-1, 1, n))}, seed=seed, tolerances={"p_floor": 1e-11})
    back = ScenarioConfig.from_toml(cfg.to_toml())
    assert back == cfg and back.digest == cfg.digest


def test_linspace_sweep_expansion():
    cfg = ScenarioConfig.from_dict({"kind": "tls", "params": {"Omega": 1.0},
                                    "sweep": {"Omega": {"start": 0, "stop": 2, "num": 5}}})
    assert cfg.sweep["Omega"] == (0.0, 0.5, 1.0, 1.5, 2.0)


@pytest.mark.parametrize("text", [
    'kind = "tls"\nbogus = 1\n',
    'kind = "nope"\n',
    'kind = "tls"\n[params]\nJ = 1.0\n',
    'kind = "tls"\noutputs = ["concurrence"]\n',
    'kind = "tls"\n[tolerances]\nmystery = 1.0\n',
    'kind = "dimer_free_space"\n[params]\ngamma12 = 2.0\n',
    'kind = "tls"\n[params]\nOmega = 1.0\n[sweep]\nOmega = {start = 0, stop = 1, num = 20000}\n',
    'kind = "tls"\nnot toml at all [\n',
])
def test_invalid_configs_exit_2(tmp_path, text):
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    path = _write(tmp_path, 'kind = "tls"\noutputs = ["spectrum"]\nplots = false\n[params]\nOmega = 0.0\n')
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 3
    assert (tmp_path / "o" / "diagnostic.log").exists()


def test_csv_layout_and_provenance(tmp_path):
    cfg = ScenarioConfig("tls", {"Omega": 1.0}, ("steady_state",), {"Omega": (0.5, 1.0)}, seed=3, plots=False)
    run_config(cfg, tmp_path)
    raw = (tmp_path / "steady_state.csv").read_bytes()
    assert b"\r\n" in raw
    meta, cols, units, rows = _read_csv(tmp_path / "steady_state.csv")
    assert any(m.startswith("# config_sha256: " + cfg.digest) for m in meta)
    assert any(m == "# seed: 3" for m in meta)
    assert cols[0] == "Omega" and len(units) == len(cols) and len(rows) == 2
    # resonant TLS excited population 4 Omega^2/(1 + 8 Omega^2)
    pe = [float(r[cols.index("p_1")]) for r in rows]
    assert np.allclose(pe, [4 * o**2 / (1 + 8 * o**2) for o in (0.5, 1.0)], rtol=1e-8)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["points"] == 2 and "wall_time_s" in man
    assert ScenarioConfig.from_toml((tmp_path / "config.toml").read_text()) == cfg


def test_two_dimensional_sweep_gives_heatmap(tmp_path):
    cfg = ScenarioConfig("tls", {"Omega": 1.0, "Delta": 0.0}, ("steady_state",),
                         {"Omega": (0.5, 1.0, 2.0), "Delta": (-1.0, 0.0)}, plots=False)
    tables = run_config(cfg, tmp_path)
    heat = [n for n in tables if n != "steady_state"]
    assert heat
    t = tables[heat[0]]
    assert len(t.rows) in (2, 3) and len(t.columns) in (3, 4)


def test_physical_units_are_normalized():
    cfg = ScenarioConfig("tls", {"Omega": 16.0, "t_max": 1e-6}, unit="MHz", gamma_value=8.0, cyclic=True)
    p = cfg.normalized()
    assert np.isclose(p["Omega"], 2.0) and np.isclose(p["gamma"], 1.0)
    assert np.isclose(p["t_max"], 1e-6 * 2 * np.pi * 8e6)


def test_nan_is_rejected_outside_reports():
    with pytest.raises(NumericalError):
        ResultTable(("x",), ("1",), ((float("nan"),),), {"output": "steady_state"})
    ResultTable(("x",), ("1",), ((float("nan"),),), {"output": "mechanism_report"})


def test_tolerance_override_is_scoped():
    old = liouville.ZERO_TOL
    with tolerance_overrides({"zero_tol": 1e-9}):
        assert liouville.ZERO_TOL == 1e-9
    assert liouville.ZERO_TOL == old
    with pytest.raises(ConfigError):
        cli._parse_tol(["zero_tol"])


def test_parallel_sweep_is_deterministic(tmp_path):
    text = ('kind = "tls"\nseed = 5\nplots = false\noutputs = ["dynamics"]\n'
            '[params]\nOmega = 1.0\ndynamics_method = "mcwf"\nn_traj = 20\nn_t = 11\nt_max = 2.0\n'
            '[sweep]\nOmega = [0.5, 1.0, 1.5, 2.0]\n')
    path = _write(tmp_path, text)
    assert main(["sweep", path, "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(["sweep", path, "--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    for f in ("dynamics.csv",):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("name", PRESETS)
def test_presets_run(tmp_path, name):
    assert main(["figure", name, "--out", str(tmp_path)]) == 0
    assert list(tmp_path.glob("*.csv"))
    cfg = cli.preset(name)
    if cfg.sweep or set(cfg.outputs) & cli.CURVE_OUTPUTS:
        assert list(tmp_path.glob("*.svg"))


def test_unknown_preset_exit_2(tmp_path):
    assert main(["figure", "nope", "--out", str(tmp_path)]) == 2
