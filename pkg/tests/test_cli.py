import csv
import io
import json

import pytest

from rydqed.cli import EXIT_ERROR, EXIT_FLAGGED, EXIT_OK, EXIT_USAGE, main, parse_range, rows_to_csv


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_parse_range():
    assert parse_range("10:14") == [10, 11, 12, 13, 14]
    assert parse_range("10:30:10") == [10, 20, 30]
    assert parse_range("7") == [7]
    assert parse_range("5:3") == []
    for bad in ("a:b", "1:2:3:4", "0:3", "10:70", "1:5:0"):
        with pytest.raises(Exception):
            parse_range(bad)


def test_csv_formatting():
    text = rows_to_csv([{"n": 3, "x": 0.1, "ok": True}])
    assert text == "n,x,ok\n3,0.1,true\n"
    assert rows_to_csv([]) == ""


def test_integrals_quarter(tmp_path, capsys):
    out = tmp_path / "q.csv"
    assert main(["integrals", "--check", "quarter", "-o", str(out)]) == EXIT_OK
    assert "0.2500 PASS" in capsys.readouterr().err
    rows = read_csv(out)
    assert all(r["pass"] == "true" for r in rows)
    assert abs(float(rows[-1]["mass_ratio"]) - 1836.15) < 0.01
    man = json.loads((tmp_path / "q.csv.manifest.json").read_text())
    assert man["argv"] == ["integrals", "--check", "quarter", "-o", str(out)]
    for key in ("settings", "atom", "constants", "tolerances", "cutoffs", "cache", "summary",
                "exit_status", "wall_time_s", "timestamp", "version"):
        assert key in man
    assert man["exit_status"] == EXIT_OK


def test_integrals_renorm_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["integrals", "--check", "renorm", "--format", "json", "-o", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    row = data["rows"][0]
    assert row["pass"] is True
    assert abs(row["quadrature"] / row["closed_form"] - 1) < 1e-6
    assert "-0.04655 PASS" in capsys.readouterr().err


def test_polarizability_output(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["polarizability", "--n", "10:12", "-o", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert [int(r["n"]) for r in rows] == [10, 11, 12]
    assert all(abs(float(r["deviation_pct"])) < 2 for r in rows)


def test_sweep_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--channel", "kappa2", "--n", "6:8"]
    assert main(args + ["-o", str(a)]) == EXIT_OK
    assert main(args + ["-o", str(b), "--workers", "2"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    rows = read_csv(a)
    assert list(rows[0]) == ["n", "kappa_abs", "kappa_signed", "fit_residual", "sign_vs_PA", "basis_cutoff",
                             "converged"]


def test_unconverged_sweep_exits_flagged(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["sweep", "--channel", "kappa1a", "--n", "10", "-o", str(out)]) == EXIT_FLAGGED
    row = read_csv(out)[0]
    assert row["converged"] == "false" and "f_n" in row


def test_empty_range_is_not_an_error(tmp_path, caplog):
    out = tmp_path / "e.csv"
    assert main(["sweep", "--channel", "kappa2", "--n", "5:3", "-o", str(out)]) == EXIT_OK
    assert out.read_text() == ""
    assert "empty n range" in caplog.text


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[fields]\nE0 = 50\nB0 = 2e-5\n[basis]\ncutoff_margin = 11\n")
    out = tmp_path / "c.csv"
    assert main(["integrals", "--check", "quarter", "--config", str(cfg), "--E0", "75", "-o", str(out)]) == 0
    s = json.loads((tmp_path / "c.csv.manifest.json").read_text())["settings"]
    assert s["E0"] == 75.0 and s["B0"] == 2e-5 and s["cutoff_margin"] == 11


def test_usage_errors(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[x]\nbogus = 1\n")
    assert main(["integrals", "--check", "quarter", "--config", str(cfg)]) == EXIT_USAGE
    assert main(["integrals", "--check", "quarter", "--config", str(tmp_path / "missing.ini")]) == EXIT_USAGE
    assert main(["sweep", "--channel", "kappa2", "--n", "0:3"]) == EXIT_USAGE
    assert main(["sweep", "--channel", "kappa1a", "--n", "45"]) == EXIT_USAGE
    assert main(["integrals", "--check", "quarter", "--cutoff-margin", "5"]) == EXIT_USAGE
    assert main(["ac", "--E0", "0"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == EXIT_USAGE


def test_hard_errors_exit_one(tmp_path):
    assert main(["abraham", "--n", "2"]) == EXIT_ERROR
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["integrals", "--check", "quarter", "-o", str(blocker / "out.csv")]) == EXIT_ERROR


def test_ac_command(tmp_path):
    out = tmp_path / "ac.json"
    assert main(["ac", "--n", "50", "--E0", "1", "--samples", "4", "--format", "json", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data["rows"]) == 4
    assert data["summary"]["diagnostics"]["force_within_band"] is True
    assert all(abs(r["Pz"]) < 1e-45 for r in data["rows"])


def test_cache_info_and_clear(tmp_path):
    from rydqed import matelem
    saved = matelem.get_cache()
    private = matelem.RadialCache(tmp_path)
    private.put(matelem.RadialIntegralKey(2, 0, 2, 1, 1), -5.196)
    matelem.set_cache(private)
    try:
        out = tmp_path / "cache.json"
        assert main(["cache", "info", "--format", "json", "-o", str(out)]) == 0
        assert json.loads(out.read_text())["rows"][0]["entries"] == 1
        assert main(["cache", "clear", "--format", "json", "-o", str(out)]) == 0
        assert json.loads(out.read_text())["rows"][0]["entries"] == 0
    finally:
        matelem.set_cache(saved)
