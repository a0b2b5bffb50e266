"""Command-line behaviors: verbs, exit codes, file emission."""

import csv

import numpy as np
import pytest

from afcprep.cli import main


def run(*argv):
    return main(list(argv))


def test_comb_optimize_prints_reference_numbers(capsys):
    assert run("comb", "optimize", "--d", "2.75") == 0
    out = capsys.readouterr().out
    assert "F_opt = 2.7124" in out
    assert "eta = 0.2333" in out


def test_comb_efficiency_with_background(capsys):
    assert run("comb", "efficiency", "--d", "2.75", "--finesse", "2.7124", "--d0", "0.085") == 0
    assert "eta = 0.2142" in capsys.readouterr().out


def test_comb_decay_flag_aliases(capsys):
    assert run("comb", "decay", "--eta0", "0.202", "--t2", "348e-6", "--time", "125e-6") == 0
    first = capsys.readouterr().out
    assert "0.0480137" in first
    assert run("comb", "decay", "--eta0", "0.202", "--t2-s", "348e-6", "--time-s", "125e-6") == 0
    assert capsys.readouterr().out == first


def test_synth_writes_waveform_set(tmp_path, capsys):
    out = tmp_path / "wf.bin"
    rc = run(
        "synth", "--delta-hz", "10e6", "--bandwidth-hz", "250e6", "--finesse", "2.45",
        "--duration-s", "500e-6", "--sample-rate-hz", "320e6", "--out", str(out),
    )
    assert rc == 0
    assert out.exists()
    assert (tmp_path / "wf.bin.json").exists()
    assert (tmp_path / "wf.bin.metrics.csv").exists()
    assert (tmp_path / "wf.png").exists()
    assert "wrote 160000 samples" in capsys.readouterr().out


def test_synth_no_figure(tmp_path):
    out = tmp_path / "wf.bin"
    rc = run(
        "synth", "--delta-hz", "10e6", "--bandwidth-hz", "250e6", "--finesse", "2.45",
        "--duration-s", "500e-6", "--sample-rate-hz", "320e6",
        "--out", str(out), "--no-figure",
    )
    assert rc == 0
    assert not (tmp_path / "wf.png").exists()


def test_synth_validation_failure_writes_nothing(tmp_path, capsys):
    out = tmp_path / "bad.bin"
    rc = run(
        "synth", "--delta-hz", "10e6", "--bandwidth-hz", "247e6", "--finesse", "2.45",
        "--duration-s", "500e-6", "--sample-rate-hz", "320e6", "--out", str(out),
    )
    assert rc == 3
    assert "error: validation:" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_synth_exact_alias(tmp_path, capsys):
    out = tmp_path / "wf.bin"
    rc = run(
        "synth", "--delta-hz", "10e6", "--bandwidth-hz", "250e6", "--finesse", "2.45",
        "--duration-s", "500e-6", "--sample-rate-hz", "320e6",
        "--method", "exact", "--out", str(out), "--no-figure",
    )
    assert rc == 0
    assert "exact-envelope" in capsys.readouterr().out


def test_missing_output_directory_is_config_error(tmp_path, capsys):
    rc = run(
        "synth", "--delta-hz", "10e6", "--bandwidth-hz", "250e6", "--finesse", "2.45",
        "--duration-s", "500e-6", "--sample-rate-hz", "320e6",
        "--out", str(tmp_path / "nowhere" / "wf.bin"),
    )
    assert rc == 2
    assert "error: config:" in capsys.readouterr().err


def test_fit_decay_round_trip(tmp_path, capsys):
    t = np.linspace(10e-6, 250e-6, 12)
    y = 0.202 * np.exp(-4 * t / 348e-6)
    src = tmp_path / "decay.csv"
    with open(src, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "efficiency"])
        writer.writerows(zip(t.tolist(), y.tolist()))
    report = tmp_path / "fit.txt"
    rc = run("fit", "decay", "--in", str(src), "--out", str(report))
    assert rc == 0
    out = capsys.readouterr().out
    assert "eta0,0.202" in out
    assert "t2_afc_s,0.000348" in out
    assert report.exists()
    assert (tmp_path / "fit.png").exists()


def test_fit_malformed_csv_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,y\n1.0,zebra\n2.0,3.0\n")
    rc = run("fit", "decay", "--in", str(bad))
    assert rc == 2
    assert "error: config:" in capsys.readouterr().err
    rc = run("fit", "decay", "--in", str(tmp_path / "missing.csv"))
    assert rc == 2


def test_fit_comb_from_csv(tmp_path, capsys):
    f = np.arange(-20.0, 20.0, 0.01)
    x = np.mod(f, 2.0)
    x = np.minimum(x, 2.0 - x)
    vals = 0.085 + np.where(x < 0.4, 2.75, 0.0)
    src = tmp_path / "comb.csv"
    with open(src, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_mhz", "od"])
        writer.writerows(zip(f.tolist(), vals.tolist()))
    rc = run("fit", "comb", "--in", str(src), "--delta-hz", "2.0")
    assert rc == 0
    out = capsys.readouterr().out
    assert "d,2.75" in out
    assert "d0,0.085" in out


def test_pump_simulate_unpumped_peak(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    rc = run(
        "pump", "simulate", "--repetitions", "0", "--grid-step-mhz", "4",
        "--probe-min-mhz", "-100", "--probe-max-mhz", "100",
        "--out", str(out), "--no-figure",
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "unpumped 0.9" in text
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["frequency_mhz", "od_pumped", "od_unpumped", "od_selected"]
    assert len(rows) == 1 + 50


def test_pump_bwlimit_reports_knee(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    rc = run(
        "pump", "bwlimit", "--bandwidths-mhz", "284,288",
        "--out", str(out), "--no-figure",
    )
    assert rc == 0
    assert "knee_mhz = 288" in capsys.readouterr().out


def test_pump_lifetime_fit_recovers_defaults(tmp_path, capsys):
    out = tmp_path / "life.csv"
    rc = run("pump", "lifetime", "--out", str(out), "--no-figure")
    assert rc == 0
    text = capsys.readouterr().out
    assert "t1_fast_s,0.37" in text
    assert "t1_slow_s,4.7" in text
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["time_s", "d_rel"]


def test_bench_writes_table(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    rc = run(
        "bench", "--n-teeth", "25", "--methods", "dirac-sum",
        "--duration-s", "100e-6", "--sample-rate-hz", "320e6",
        "--out", str(out), "--no-figure",
    )
    assert rc == 0
    rows = list(csv.reader(open(out)))
    assert rows[0][0] == "method"
    assert rows[1][0] == "dirac-sum"
    assert "dirac-sum" in capsys.readouterr().out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run("--version")
    assert exc.value.code == 0
