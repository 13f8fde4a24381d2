import json
import subprocess
import sys
import time

import numpy as np
import pytest
import sympy as sp

from qmx.cli import EXIT_CONFIG, main
from qmx.grid import FieldState, GridSpec
from qmx.io import (
    ENERGY_HEADER,
    NORM_HEADER,
    DumpFormatError,
    RunManifest,
    csv_text,
    decode_dump,
    encode_dump,
    read_dump,
    sha256_file,
    write_dump,
)
from qmx.sources import SympySource


def test_dump_round_trip(tmp_path):
    g = GridSpec((3, 4, 5), (0.1, 0.2, 0.3), boundary=("periodic", "open", "pec_bottom_open_top"))
    vals = np.random.default_rng(0).standard_normal((6,) + g.shape)
    write_dump(tmp_path / "f.qmxf", FieldState(g, 0.125, vals))
    d = read_dump(tmp_path / "f.qmxf")
    assert np.array_equal(d.values, vals) and d.time == 0.125
    assert d.shape == g.shape and d.spacing == g.spacing
    assert d.periodic == (True, False, False) and d.has_pec


def test_dump_rejects_corruption():
    g = GridSpec.box(2)
    raw = encode_dump(FieldState(g, 0.0, g.zeros()))
    with pytest.raises(DumpFormatError):
        decode_dump(b"XXXX" + raw[4:])
    with pytest.raises(DumpFormatError):
        decode_dump(raw[:-8])
    with pytest.raises(DumpFormatError):
        decode_dump(raw[:10])


def test_csv_and_manifest(tmp_path):
    text = csv_text(NORM_HEADER, [(0.1, "sobolev", 2, 0.0, 1.0 / 3)])
    assert text.splitlines() == ["t,norm_kind,order,gamma,value", "0.10000000000000001,sobolev,2,0,0.33333333333333331"]
    assert ENERGY_HEADER == ["t", "energy", "source_norm", "boundary_norm", "ratio"]
    m1 = RunManifest({"a": 1}, "1.0", 2.5, 10, "horizon_reached", {"x.csv": "abc"})
    m2 = RunManifest({"a": 1}, "1.0", 9.0, 3, "nonfinite", {})
    assert m1.config_hash() == m2.config_hash()
    assert m1.config_hash() != RunManifest({"a": 2}, "1.0", 0, 0, "", {}).config_hash()
    m1.write(tmp_path)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["steps"] == 10 and doc["files"] == {"x.csv": "abc"} and doc["config_hash"] == m1.config_hash()


def test_sympy_source_accepts_plain_symbols():
    # expressions built from assumption-free symbols must still differentiate in t and x
    g = GridSpec.box(4)
    t, x1 = sp.symbols("t x1")
    src = SympySource([t**2 * x1, 0, 0, 0, 0, 0], g)
    x = g.mesh()[0]
    assert np.allclose(src(1.0, 1)[0], 2 * x)
    with pytest.raises(ValueError):
        SympySource([sp.Symbol("y") * t, 0, 0, 0, 0, 0], g)


def run_cli(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_list_show_terms_compat(capsys):
    code, out = run_cli(["list"], capsys)
    assert code == 0 and "kerr_ode_blowup" in out.out
    code, out = run_cli(["show", "kerr_pulse"], capsys)
    assert code == 0 and 'name = "kerr_pulse"' in out.out
    code, out = run_cli(["terms", "--alpha", "2,0,0,0"], capsys)
    assert code == 0
    code, out = run_cli(["compat", "--scenario", "kerr_pulse", "--grid", "16"], capsys)
    assert code == 0 and "PASS" in out.out


def test_config_errors_exit_64(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[scenario]\nname = "vacuum_pulse"\n[solver]\ncfl = 1.5\n')
    code, out = run_cli(["run", str(bad)], capsys)
    assert code == EXIT_CONFIG and "solver.cfl" in out.err
    code, out = run_cli(["solve", "--scenario", "nope"], capsys)
    assert code == EXIT_CONFIG
    code, out = run_cli(["run", str(tmp_path / "missing.toml")], capsys)
    assert code == EXIT_CONFIG


def test_vacuum_smoke(tmp_path, capsys):
    start = time.perf_counter()
    code, out = run_cli(["solve", "--scenario", "vacuum_pulse", "--horizon", "0.05", "--dump-every", "5",
                         "--out", str(tmp_path)], capsys)
    assert time.perf_counter() - start < 10
    assert code == 0 and "status: horizon_reached" in out.out
    assert "slab t=" in out.err
    for name in ("norms.csv", "energy.csv", "slabs.csv", "compatibility.csv", "summary.txt", "manifest.json"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "norms.csv").read_text().splitlines()[0] == ",".join(NORM_HEADER)
    assert (tmp_path / "energy.csv").read_text().splitlines()[0] == ",".join(ENERGY_HEADER)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        assert sha256_file(tmp_path / name) == digest
    assert any(n.endswith(".qmxf") for n in manifest["files"])
    assert read_dump(tmp_path / "field_000000.qmxf").time == 0.0


def test_blowup_exit_code(tmp_path, capsys):
    code, out = run_cli(["solve", "--scenario", "kerr_ode_blowup", "--out", str(tmp_path)], capsys)
    assert code == 2 and "status: blowup_lipschitz" in out.out


def test_runs_are_bit_identical(tmp_path, capsys):
    cfg = tmp_path / "k.toml"
    cfg.write_text('[scenario]\nname = "kerr_pulse"\n[grid]\ncells = [8, 8, 8]\n[solver]\nhorizon = 0.05\n')
    for d in ("a", "b"):
        assert run_cli(["run", str(cfg), "--out", str(tmp_path / d)], capsys)[0] == 0
    for name in ("norms.csv", "energy.csv", "slabs.csv", "divergence.csv", "cone.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "qmx.cli", "list"], capture_output=True, text=True, timeout=60)
    assert res.returncode == 0 and "vacuum_pulse" in res.stdout
