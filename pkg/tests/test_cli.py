import io
import json
from fractions import Fraction

import pytest

from gcf_lab.cli import parse_alpha_range, parse_config_file, run
from gcf_lab.records import SCHEMA_VERSION, RunConfig


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_constants_stdout():
    code, out, err = call("constants", "--n", "2", "--alpha", "0.1")
    assert code == 0
    rec = json.loads(out)
    assert rec["constants"]["sigma"] == pytest.approx(0.8, abs=1e-15)
    assert rec["schema_version"] == SCHEMA_VERSION
    assert rec["config_hash"] == RunConfig("constants", rec["config"]).hash()
    assert err.count("\n") == 1 and "sigma=0.8" in err


@pytest.mark.parametrize(
    "argv",
    [
        ("constants", "--n", "2", "--alpha", "0.6"),
        ("constants", "--bogus"),
        (),
        ("nope",),
        ("shrinker", "--N", "100"),
        ("sweep", "--alphas", "0.2:0.1:0.01"),
        ("spectrum", "--n", "3"),
    ],
)
def test_validation_exit_2(argv):
    assert call(*argv)[0] == 2


def test_solver_failure_exit_3():
    code, _, err = call("shrinker", "--alpha", "0.2", "--k", "3")
    assert code == 3 and "NoNontrivialSolution" in err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# constants run\nn = 3\nalpha = 0.15\n")
    assert parse_config_file(cfg) == {"n": "3", "alpha": "0.15"}
    _, out, _ = call("constants", "--config", str(cfg))
    assert json.loads(out)["config"] == {"alpha": 0.15, "n": 3}
    _, out, _ = call("constants", "--config", str(cfg), "--alpha", "0.2")
    assert json.loads(out)["config"]["alpha"] == 0.2


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert call("constants", "--config", str(bad))[0] == 2
    bad.write_text("just words\n")
    assert call("constants", "--config", str(bad))[0] == 2


def test_alpha_range_exact():
    vals = parse_alpha_range("0.05:0.25:0.01")
    assert len(vals) == 21 and vals[0] == 0.05 and vals[-1] == 0.25


def staircase(alpha):
    a = Fraction(alpha).limit_denominator(1000)
    if a >= Fraction(1, 4):
        return 3
    ell = 2
    while not (Fraction(1, (ell + 1) ** 2) <= a < Fraction(1, ell**2)):
        ell += 1
    return 2 * ell + 1


def test_sweep_staircase(tmp_path, monkeypatch):
    monkeypatch.setenv("GCF_LAB_WORKERS", "1")
    code, out, _ = call("sweep", "--alphas", "0.05:0.25:0.01", "--n", "2", "--what", "K", "--csv", str(tmp_path / "k.csv"))
    assert code == 0
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "alpha,K"
    rows = [(float(a), int(k)) for a, k in (ln.split(",") for ln in lines[1:])]
    assert len(rows) == 21
    assert all(k == staircase(a) for a, k in rows)


def test_sweep_parallel_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("GCF_LAB_WORKERS", "1")
    call("sweep", "--alphas", "0.05:0.3:0.05", "--what", "constants", "--out", str(tmp_path / "a.json"))
    monkeypatch.setenv("GCF_LAB_WORKERS", "3")
    call("sweep", "--alphas", "0.05:0.3:0.05", "--what", "constants", "--out", str(tmp_path / "b.json"))
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a.replace(b"1 worker", b"") == b.replace(b"3 worker", b"")


def test_bad_worker_env(monkeypatch):
    monkeypatch.setenv("GCF_LAB_WORKERS", "many")
    assert call("sweep", "--alphas", "0.1:0.2:0.05")[0] == 2


def test_byte_identical_outputs(tmp_path):
    for name in ("a", "b"):
        assert call("shrinker", "--alpha", "0.1", "--k", "3", "--out", str(tmp_path / f"{name}.json"))[0] == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.meta.json").exists()


def test_shrinker_then_spectrum(tmp_path):
    shr = tmp_path / "shr.json"
    assert call("shrinker", "--alpha", "0.1", "--k", "3", "--out", str(shr))[0] == 0
    rec = json.loads(shr.read_text())
    assert {"n", "alpha", "k", "N", "samples", "residual"} <= set(rec)
    assert rec["residual"] < 1e-8
    code, out, _ = call("spectrum", "--profile", str(shr))
    spec = json.loads(out)
    assert code == 0 and spec["K"] == 5 and spec["k"] == 3
    assert {"lambdas", "betas", "K", "c_norms"} <= set(spec)
    assert spec["lambdas"][0] == pytest.approx(1.0, abs=1e-6)


def test_spectrum_bad_profile(tmp_path):
    p = tmp_path / "junk.json"
    p.write_text("{not json")
    assert call("spectrum", "--profile", str(p))[0] == 2


def test_radial_outputs(tmp_path):
    code, out, _ = call("radial", "--alpha", "0.1", "--M", "1", "--l-max", "1e5", "--csv", str(tmp_path / "r.csv"))
    assert code == 0
    rec = json.loads(out)
    assert rec["c_sign"] == 1 and abs(rec["A_ratio"] - 1) < 1e-3
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "l,f,f_l"


def test_exterior_record():
    code, out, _ = call("exterior", "--R", "8", "--N", "64", "--slice-stride", "100")
    rec = json.loads(out)
    assert code == 0
    assert {"R", "S_max", "gamma", "contraction_ratios", "residual", "field"} <= set(rec)
    assert max(rec["contraction_ratios"]) < 0.5 and rec["residual"] < 1e-7


def test_march_outputs(tmp_path):
    code, _, _ = call(
        "march", "--N", "64", "--decades", "1", "--csv", str(tmp_path / "m.csv"), "--out", str(tmp_path / "m.json")
    )
    assert code == 0
    diag = json.loads((tmp_path / "m.json").read_text())["diagnostics"]
    assert diag["decreasing"] is True
    header = (tmp_path / "m.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "l" and len(header) == 65


def test_report_empty(tmp_path):
    (tmp_path / "in").mkdir()
    code, out, _ = call("report", "--records", str(tmp_path / "in"), "--out-dir", str(tmp_path / "out"))
    assert code == 0
    for name in ("constants", "spectrum", "radial", "exterior", "march", "staircase"):
        assert len((tmp_path / "out" / f"{name}.csv").read_text().splitlines()) == 1


def test_report_tables(tmp_path, caplog):
    src = tmp_path / "in"
    call("radial", "--alpha", "0.1", "--l-max", "1e5", "--out", str(src / "rad.json"))
    call("constants", "--n", "3", "--alpha", "0.15", "--out", str(src / "c3.json"))
    call("constants", "--n", "2", "--alpha", "0.2", "--out", str(src / "c2b.json"))
    call("constants", "--n", "2", "--alpha", "0.1", "--out", str(src / "c2a.json"))
    call("sweep", "--alphas", "0.1:0.3:0.1", "--out", str(src / "sw.json"))
    (src / "broken.json").write_text("{")
    code, _, _ = call("report", "--records", str(src), "--out-dir", str(tmp_path / "out"))
    assert code == 0 and "broken.json" in caplog.text
    rad = (tmp_path / "out" / "radial.csv").read_text().splitlines()
    assert "A_fit_over_A" in rad[0].split(",") and len(rad) == 2
    ratio = float(rad[1].split(",")[rad[0].split(",").index("A_fit_over_A")])
    assert abs(ratio - 1) < 1e-3
    cons = [ln.split(",")[:2] for ln in (tmp_path / "out" / "constants.csv").read_text().splitlines()[1:]]
    assert [(int(n), float(a)) for n, a in cons] == [(2, 0.1), (2, 0.2), (3, 0.15)]
    stair = (tmp_path / "out" / "staircase.csv").read_text().splitlines()
    assert stair[1:] == ["2,0.10000000000000001,7", "2,0.20000000000000001,5", "2,0.29999999999999999,3"]
    # a second report is byte-identical
    call("report", "--records", str(src), "--out-dir", str(tmp_path / "out2"))
    for name in ("radial", "constants", "staircase"):
        assert (tmp_path / "out" / f"{name}.csv").read_bytes() == (tmp_path / "out2" / f"{name}.csv").read_bytes()


def test_report_refuses_mixed_schema(tmp_path):
    src = tmp_path / "in"
    call("constants", "--out", str(src / "a.json"))
    rec = json.loads((src / "a.json").read_text())
    rec["schema_version"] = SCHEMA_VERSION + 1
    (src / "b.json").write_text(json.dumps(rec))
    assert call("report", "--records", str(src), "--out-dir", str(tmp_path / "out"))[0] == 2


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "gcf_lab", "constants", "--alpha", "0.25"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["constants"]["sigma"] == 0.5
