import csv
import json

import pytest

from teqsci.cli import SCHEMA_VERSION, SWEEP_COLUMNS, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fci_h6(capsys):
    code, out, _ = run(capsys, "run", "--workflow", "fci", "--fixture", "h6")
    assert code == 0
    d = json.loads(out)
    assert d["result"]["energy_hartree"] == pytest.approx(-3.2361, abs=1e-3)
    assert d["metadata"]["units"]["energy"] == "Hartree"
    assert d["metadata"]["config"]["tolerance"] == 1e-3


def test_te_single_h6(capsys):
    code, out, _ = run(capsys, "run", "--workflow", "te-single", "--fixture", "h6", "--t", "1.4",
                       "--evolution", "exact", "--top-r", "90")
    assert code == 0
    assert json.loads(out)["result"]["energy_error_mha"] == pytest.approx(0.93, abs=0.3)


def test_seeded_runs_byte_identical(tmp_path):
    args = ["run", "--workflow", "te-single", "--fixture", "h4", "--t", "1.0", "--evolution", "trotter",
            "--dt", "0.1", "--top-r", "10", "--shots", "2000", "--seed", "7", "--n-repeats", "3"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    d = json.loads(a.read_text())["result"]
    assert len(d["energy_error_mha_all"]) == 3


def test_metadata_echo_reproduces_run(tmp_path):
    first = tmp_path / "first.json"
    again = tmp_path / "again.json"
    assert main(["run", "--workflow", "gs-qsci", "--fixture", "h4", "--top-r", "9", "-o", str(first)]) == 0
    assert main(["run", "--config", str(first), "-o", str(again)]) == 0
    assert first.read_bytes() == again.read_bytes()


def test_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("workflow = gs-qsci\nfixture = h4\ntop_r = 5  # small\n")
    code, out, _ = run(capsys, "run", "--config", str(cfg), "--top-r", "9")
    assert code == 0
    assert json.loads(out)["result"]["r"] == 9


def test_fixture_env_var(tmp_path, monkeypatch, capsys):
    from teqsci.cli import fixture_path

    (tmp_path / "h4_sto3g_1.0A.fcidump").write_text(fixture_path("h4").read_text())
    monkeypatch.setenv("TEQSCI_FIXTURES", str(tmp_path))
    assert fixture_path("h4") == tmp_path / "h4_sto3g_1.0A.fcidump"


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.fcidump"
    bad.write_text("&FCI NORB=1,NELEC=2,MS2=0,\n&END\n 1.0 1 1 1\n")
    assert run(capsys, "run", "--workflow", "fci", "--fixture", str(bad))[0] == 3
    assert run(capsys, "run", "--workflow", "gs-qsci", "--fixture", "h4", "--top-r", "999")[0] == 5
    with pytest.raises(SystemExit) as exc:
        main(["run", "--workflow", "nope", "--fixture", "h4"])
    assert exc.value.code == 2
    assert run(capsys, "run", "--workflow", "fci")[0] == 2


def test_resources_workflow(capsys):
    code, out, _ = run(capsys, "run", "--workflow", "resources", "--fixture", "h2,h4,h6,h8")
    d = json.loads(out)["result"]
    assert [c["n_qubits"] for c in d["counts"]] == [4, 8, 12, 16]
    assert 4 < d["fit_cnot"]["exponent"] < 6


def test_sweep_csv_schema(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--workflow", "te-single", "--fixture", "h4", "--top-r", "10", "--axis", "t",
                 "--values", "0.5,1.0,1.5", "--csv", str(out)])
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["schema_version", *SWEEP_COLUMNS]
    assert [r[2] for r in rows[1:]] == ["0.5", "1.0", "1.5"]
    assert all(r[0] == str(SCHEMA_VERSION) and r[3] == "ok" for r in rows[1:])


def test_sweep_records_failed_rows(tmp_path):
    out = tmp_path / "sweep.csv"
    main(["sweep", "--workflow", "gs-qsci", "--fixture", "h4", "--axis", "R", "--values", "5,40", "--csv", str(out)])
    rows = list(csv.DictReader(out.open()))
    assert [r["status"] for r in rows] == ["ok", "failed"]
    assert rows[1]["error_tag"].startswith("CapacityError")


def test_sweep_rejects_unsorted(capsys):
    assert run(capsys, "sweep", "--workflow", "te-single", "--fixture", "h4", "--top-r", "5",
               "--axis", "t", "--values", "1.0,0.5")[0] == 2


def test_pmu_and_trotter_workflows(capsys, tmp_path):
    code, out, _ = run(capsys, "run", "--workflow", "pmu-scan", "--fixture", "h4", "--r-rank", "30",
                       "--csv", str(tmp_path / "p.csv"))
    assert code == 0 and "slopes" in json.loads(out)["result"]
    code, out, _ = run(capsys, "run", "--workflow", "trotter-diag", "--fixture", "h4", "--t", "0.4",
                       "--dts", "0.2,0.1")
    rows = json.loads(out)["result"]["rows"]
    assert rows[1]["infidelity"] < rows[0]["infidelity"]


def test_te_average_and_threshold_scan(capsys):
    code, out, _ = run(capsys, "run", "--workflow", "te-average", "--fixture", "h4", "--t-start", "0.5",
                       "--t-end", "1.0", "--t-spacing", "0.5", "--evolution", "exact", "--top-r", "12",
                       "--shots", "4000", "--n-repeats", "2")
    d = json.loads(out)["result"]
    assert code == 0 and d["shots_per_time"] == 2000 and len(d["seeds"]) == 2
    code, out, _ = run(capsys, "run", "--workflow", "threshold-scan", "--fixture", "h4", "--t", "1.0")
    d = json.loads(out)["result"]
    assert code == 0 and d["r_gs"] == 12 and d["ratio"] == d["r_te"] / d["r_gs"]


def test_te_average_needs_grid(capsys):
    assert run(capsys, "run", "--workflow", "te-average", "--fixture", "h4", "--top-r", "5", "--shots", "10")[0] == 2
