import json

import pytest

from cascade_scope.cli import main, parse_scales, UsageError


def run(tmp_path, *args, sub="out"):
    out = tmp_path / sub
    code = main(list(args) + ["--out", str(out)])
    return code, out


def test_scale_parsing():
    s = parse_scales("1e-2:1e1:40log")
    assert len(s) == 40 and s[0] == pytest.approx(1e-2) and s[-1] == pytest.approx(10.0)
    assert parse_scales("0.5,1,2") == [0.5, 1.0, 2.0]
    assert parse_scales("1:2:3lin") == [1.0, 1.5, 2.0]
    for bad in ("a,b", "-1,2", "2:1:4log", ""):
        with pytest.raises(UsageError):
            parse_scales(bad)


def test_sweep_rows(tmp_path):
    code, out = run(tmp_path, "sweep", "--gen", "demo1d", "--scales", "1e-2:1e1:40log", "--budget", "5")
    assert code == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 41


def test_outputs_reproducible(tmp_path):
    args = ("sweep", "--gen", "demo1d", "--scales", "0.1,1,5", "--budget", "10", "--seed", "4")
    _, a = run(tmp_path, *args, sub="same")
    first = {p.name: p.read_bytes() for p in a.iterdir()}
    _, b = run(tmp_path, *args, sub="same")
    assert {p.name: p.read_bytes() for p in b.iterdir()} == first
    _, c = run(tmp_path, *args, sub="other")
    ja = json.loads(first["sweep.json"])
    jc = json.loads((c / "sweep.json").read_text())
    assert ja["run_config"].pop("out") != jc["run_config"].pop("out")
    assert ja == jc


def test_cover_json(tmp_path):
    code, out = run(tmp_path, "cover", "--R", "1", "--K1", "3", "--K2", "3")
    assert code == 0
    rep = json.loads((out / "cover.json").read_text())
    assert len(rep["cover"]["centers"]) == 10
    assert rep["validity"]["valid"]


def test_infeasible_cover_exit(tmp_path):
    code, _ = run(tmp_path, "cover", "--R0", "1", "--R", "0.5", "--dim", "3", "--K1", "1", "--K2", "40")
    assert code == 2


def test_usage_errors(tmp_path):
    assert run(tmp_path, "sweep", "--gen", "demo1d", "--rho1", "0.3")[0] == 2
    assert run(tmp_path, "sweep", "--gen", "demo1d", "--scales", "20")[0] == 2
    assert run(tmp_path, "nonsense")[0] == 2
    assert run(tmp_path, "diagnose")[0] == 2


def test_bad_file_exit(tmp_path):
    bad = tmp_path / "junk.cscope"
    bad.write_bytes(b"not a field")
    assert run(tmp_path, "diagnose", "--in", str(bad), "--T", "1")[0] == 3
    assert run(tmp_path, "diagnose", "--in", str(tmp_path / "missing.cscope"), "--T", "1")[0] == 3


def test_generate_then_diagnose_zero(tmp_path):
    code, gen = run(tmp_path, "generate", "--gen", "single_mode", "--params", '{"A": 0.0}',
                    "--dim", "2", "--resolution", "16", "--nsteps", "0", "--field", "vorticity",
                    sub="gen")
    assert code == 0
    files = sorted(str(p) for p in gen.glob("*.cscope"))
    code, out = run(tmp_path, "diagnose", "--in", *files, "--T", "1", "--R0", "1")
    assert code == 0
    rep = json.loads((out / "diagnose.json").read_text())
    assert rep["diagnostics"]["sigma0"] is None


def test_cascade_empty_range(tmp_path):
    code, out = run(tmp_path, "cascade", "--gen", "random_multiscale", "--params", '{"kmax": 6}',
                    "--resolution", "32", "--nsteps", "2", "--T", "0.05", "--scales", "0.5,1")
    assert code == 0
    rep = json.loads((out / "cascade.json").read_text())
    assert rep["run_config"]["scales"] == [0.5, 1.0]
    assert rep["verdict"]["empty_range"] and not rep["verdict"]["verified"]
    assert rep["verdict"]["message"].startswith("empty inertial range")
    assert (out / "cascade.csv").exists() and (out / "cascade.svg").exists()


def test_cutoff_verify(tmp_path):
    code, out = run(tmp_path, "cutoff-verify", "--samples", "5000")
    assert code == 0
    rep = json.loads((out / "cutoff_verify.json").read_text())
    assert rep["eta"]["bounded"] and rep["psi"]["bounded"]


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"R0": 10.0, "K1": 3, "K2": 3}))
    code, out = run(tmp_path, "cover", "--config", str(cfg), "--R", "2")
    assert code == 0
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(tmp_path, "cover", "--config", str(cfg), "--R", "2")[0] == 2
