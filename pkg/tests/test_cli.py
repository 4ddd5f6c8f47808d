import json
import math
import subprocess
import sys

import pytest

from herglotz_enclosure.cli import config_hash, main
from herglotz_enclosure.geometry import CrackSet, PolygonalObstacle, write_scene

from .conftest import L_CRACK, SQUARE


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_scene(PolygonalObstacle([SQUARE], R=1.0), root / "square.json")
    write_scene(CrackSet(L_CRACK, R=1.0), root / "crack.json")
    return root


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def forward(files, capsys, name, scene="square.json", d="1 0", extra=()):
    path = files / name
    if not path.exists():
        code, _, err = run(["forward", "--scene", files / scene, "--k", 1, "--d", d, "--out", path, *extra], capsys)
        assert code == 0, err
    return path


def test_selftest_passes(capsys, tmp_path):
    code, out, _ = run(["selftest", "--out", tmp_path / "s.json"], capsys)
    assert code == 0
    assert out.count("pass") == 5 and "FAIL" not in out
    assert json.loads((tmp_path / "s.json").read_text())["passed"] is True


def test_forward_writes_dataset(files, capsys):
    out_path = files / "fwd_check.json"
    code, out, _ = run(["forward", "--scene", files / "square.json", "--k", 1, "--d", "0 1", "--n", 512, "--selfcheck", "--out", out_path], capsys)
    assert code == 0
    diag = json.loads(out)
    assert diag["reciprocity_max_residual"] < 1e-5 and diag["condition"] > 1
    doc = json.loads(out_path.read_text())
    assert doc["n"] == 512 and len(doc["values"]) == 512 and doc["d"] == [0.0, 1.0]
    assert len(doc["metadata"]["config_hash"]) == 16


def test_input_errors(files, capsys, tmp_path, monkeypatch):
    code, _, err = run(["forward", "--scene", tmp_path / "missing.json", "--k", 1, "--out", tmp_path / "x.json"], capsys)
    assert code == 2 and json.loads(err)["exit_code"] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"type": "obstacle", "R": 1}')
    code, _, err = run(["forward", "--scene", bad, "--k", 1, "--out", tmp_path / "x.json"], capsys)
    assert code == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scene": str(files / "square.json"), "k": 1, "wavenumber": 2}))
    code, _, err = run(["forward", "--config", cfg, "--out", tmp_path / "x.json"], capsys)
    assert code == 2 and "wavenumber" in json.loads(err)["message"]
    code, _, err = run(["forward", "--scene", files / "square.json", "--out", tmp_path / "x.json"], capsys)
    assert code == 2 and "'k'" in json.loads(err)["message"]
    monkeypatch.setenv("HERGLOTZ_THREADS", "many")
    code, _, err = run(["selftest"], capsys)
    assert code == 2 and "HERGLOTZ_THREADS" in json.loads(err)["message"]


def test_config_file_and_flag_precedence(files, capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scene": str(files / "square.json"), "k": 1, "n": 64}))
    code, _, _ = run(["forward", "--config", cfg, "--n", 32, "--out", tmp_path / "a.json"], capsys)
    assert code == 0 and json.loads((tmp_path / "a.json").read_text())["n"] == 32


def test_config_hash_ignores_output_location():
    a = config_hash("enclose", {"R": 1.0, "out": "a"})
    assert a == config_hash("enclose", {"R": 1.0, "out": "b"})
    assert a != config_hash("enclose", {"R": 2.0, "out": "a"})


def test_enclose_deterministic_with_provenance(files, capsys, tmp_path):
    data = forward(files, capsys, "sq.json")
    args = ["enclose", "--data", data, "--R", 1, "--directions", 8, "--n-max", 160, "--classify", 0.4, 0.8]
    code, _, err = run(args + ["--out", tmp_path / "a"], capsys)
    assert code == 0, err
    run(args + ["--out", tmp_path / "b"], capsys)
    ra, rb = (tmp_path / "a" / "result.json").read_bytes(), (tmp_path / "b" / "result.json").read_bytes()
    assert ra == rb
    doc = json.loads(ra)
    h = doc["config_hash"]
    assert doc["spectrum_routes"] == ["sources"] and len(doc["estimates"]) >= 6
    for e in doc["estimates"]:
        th = e["theta"]
        assert e["h"] == pytest.approx(0.5 * (abs(math.cos(th)) + abs(math.sin(th))), abs=0.1)
    for name in ("trace_00.csv", "trace_00.dat", "hull.dat"):
        assert (tmp_path / "a" / name).read_text().startswith(f"# config_hash {h}")
    assert f"<!-- config_hash {h}" in (tmp_path / "a" / "hull.svg").read_text()
    assert "class_t=0.4" in (tmp_path / "a" / "trace_00.csv").read_text()


def test_enclose_crack_rules(files, capsys, tmp_path):
    c1 = forward(files, capsys, "crack_x.json", "crack.json", "1 0")
    code, _, err = run(["enclose", "--data", c1, "--R", 1, "--out", tmp_path / "c"], capsys)
    assert code == 2 and "two datasets" in json.loads(err)["message"]
    s1 = forward(files, capsys, "sq.json")
    s2 = forward(files, capsys, "sq_minus.json", d="-1 0")
    code, _, err = run(["enclose", "--data", s1, s2, "--R", 1, "--out", tmp_path / "d"], capsys)
    assert code == 2 and "independent" in json.loads(err)["message"]


def test_aperture_arc(files, capsys, tmp_path):
    data = forward(files, capsys, "sq_arc.json", extra=["--arc", f"0 {math.pi}", "--n", 128])
    out = tmp_path / "ap.json"
    code, _, err = run(["aperture", "--data", data, "--R", 1, "--taus", "1 3 5", "--directions", 4, "--origin-outside", "--out", out], capsys)
    assert code == 0, err
    assert "origin outside" in err
    doc = json.loads(out.read_text())
    assert doc["delta_rule"].startswith("0.001") and doc["origin_outside"] is True
    assert len(doc["estimates"]) == 4 and "full_circle_crosscheck" not in doc
    assert all(len(e["alpha"]) == 5 for e in doc["estimates"])


def test_aperture_full_circle_crosscheck(files, capsys, tmp_path):
    data = forward(files, capsys, "sq_full128.json", extra=["--n", 128])
    out = tmp_path / "full.json"
    code, _, err = run(["aperture", "--data", data, "--R", 1, "--taus", "1 2 5", "--directions", 2, "--delta", 1e-4, "--out", out], capsys)
    assert code == 0, err
    doc = json.loads(out.read_text())
    assert doc["delta_rule"] == "absolute"
    assert doc["full_circle_crosscheck"]["relative_gap"] < 1e-2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "herglotz_enclosure", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
