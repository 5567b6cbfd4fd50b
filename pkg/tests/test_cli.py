import re

import numpy as np
import pytest

from u1bethe import cli
from u1bethe import weights as W
from u1bethe.errors import ConfigError

from conftest import ETA


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture()
def six_cfg(tmp_path):
    return write(tmp_path / "six.cfg",
                 "model = six_vertex\nN = 2\neta = 0.4375\nL = 4\n")


@pytest.fixture()
def spin1_cfg(tmp_path):
    return write(tmp_path / "s1.cfg",
                 "# spin-1 chain\nmodel = higher_spin_xxz\nN = 3\n"
                 "eta = 0.4375\nL = 2\n"
                 "inhomogeneities = [0.0, 0.05+0.02j]\n")


def run(args):
    return cli.main(args)


def strip_timestamp(text):
    return re.sub(r'"timestamp": "[^"]*"', '"timestamp": "X"', text)


def test_check_r_pass(six_cfg, tmp_path):
    out = tmp_path / "r.json"
    code = run(["check-r", "--config", six_cfg, "--samples", "25",
                "--out", str(out), "--quiet"])
    assert code == 0
    text = out.read_text()
    assert '"pass": true' in text
    assert '"check": "yang_baxter"' in text


def test_report_determinism(six_cfg, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["check-r", "--config", six_cfg, "--samples", "10",
                    "--seed", "7", "--out", str(path), "--quiet"]) == 0
    assert strip_timestamp(a.read_text()) == strip_timestamp(b.read_text())


def test_seed_changes_report(six_cfg, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["check-r", "--config", six_cfg, "--samples", "10", "--seed", "7",
         "--out", str(a), "--quiet"])
    run(["check-r", "--config", six_cfg, "--samples", "10", "--seed", "8",
         "--out", str(b), "--quiet"])
    assert strip_timestamp(a.read_text()) != strip_timestamp(b.read_text())


def test_identities_command(spin1_cfg, tmp_path):
    out = tmp_path / "id.json"
    code = run(["identities", "--config", spin1_cfg, "--samples", "8",
                "--tol", "1e-9", "--out", str(out), "--quiet"])
    assert code == 0
    assert '"identity": "wanted_term_assembly"' in out.read_text()


def test_identities_zero_samples_rejected(spin1_cfg, capsys):
    assert run(["identities", "--config", spin1_cfg, "--samples", "0",
                "--quiet"]) == 2
    assert "InvalidOption" in capsys.readouterr().err


def test_solve_with_spectrum_and_csv(six_cfg, tmp_path):
    out, csv = tmp_path / "s.json", tmp_path / "s.csv"
    code = run(["solve", "--config", six_cfg, "--n", "2", "--spectrum",
                "--seeds", "30", "--out", str(out), "--csv", str(csv),
                "--quiet"])
    assert code == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "sector,index,re,im"
    assert len(lines) == 1 + 2 ** 4
    text = out.read_text()
    assert '"spectrum_distance"' in text and '"pass": true' in text


def test_solve_n0_trace(six_cfg, tmp_path):
    out = tmp_path / "t.json"
    assert run(["solve", "--config", six_cfg, "--n", "0",
                "--out", str(out), "--quiet"]) == 0
    assert '"trace_residuals"' in out.read_text()


def test_solve_spectrum_dimension_guard(tmp_path, capsys):
    cfg = write(tmp_path / "big.cfg",
                "model = six_vertex\neta = 0.4375\nL = 13\n")
    assert run(["solve", "--config", cfg, "--n", "1", "--spectrum",
                "--quiet"]) == 2
    assert "DimensionTooLarge" in capsys.readouterr().err


def test_csv_requires_spectrum(six_cfg, tmp_path, capsys):
    assert run(["solve", "--config", six_cfg, "--n", "1",
                "--csv", str(tmp_path / "x.csv"), "--quiet"]) == 2
    assert "InvalidOption" in capsys.readouterr().err


def test_offshell_command(spin1_cfg, tmp_path):
    out = tmp_path / "o.json"
    code = run(["offshell", "--config", spin1_cfg,
                "--root=0.41,-0.23", "--root=-0.37,0.52",
                "--lam", "0.29,0.17", "--tol", "1e-8",
                "--out", str(out), "--quiet"])
    assert code == 0
    assert '"unwanted_over_wanted"' in out.read_text()


def test_offshell_random_roots(spin1_cfg, tmp_path):
    assert run(["offshell", "--config", spin1_cfg, "--n", "2",
                "--tol", "1e-8", "--out", str(tmp_path / "o.json"),
                "--quiet"]) == 0


def test_offshell_coincident_roots(spin1_cfg, capsys):
    assert run(["offshell", "--config", spin1_cfg,
                "--root", "0.3,0.1", "--root", "0.3,0.1", "--quiet"]) == 2
    assert "Singularity" in capsys.readouterr().err


def test_rules_command(spin1_cfg, tmp_path):
    out = tmp_path / "rules.json"
    code = run(["rules", "--config", spin1_cfg, "--out", str(out), "--quiet"])
    assert code == 0
    text = out.read_text()
    assert '"counts_match": true' in text
    assert '"family": "annihilation_creation"' in text


def test_config_diagnostics(tmp_path):
    bad = write(tmp_path / "bad.cfg", "model = six_vertex\nL equals 2\n")
    with pytest.raises(ConfigError) as err:
        cli.parse_config(bad)
    assert err.value.line == 2
    assert run(["check-r", "--config", bad, "--quiet"]) == 2
    dup = write(tmp_path / "dup.cfg", "model = six_vertex\nmodel = table\n")
    with pytest.raises(ConfigError) as err:
        cli.parse_config(dup)
    assert err.value.line == 2


def test_custom_model_rejected_in_config(tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", "model = custom\nL = 2\n")
    assert run(["check-r", "--config", cfg, "--quiet"]) == 2
    assert "library-level" in capsys.readouterr().err


def test_table_model_checks(tmp_path):
    six = W.six_vertex(ETA)
    lam, mu = 0.31 + 0.0j, -0.22 + 0.0j
    rec = [(lam, mu, six.eval_r(lam, mu)), (mu, lam, six.eval_r(mu, lam)),
           (lam, lam, six.eval_r(lam, lam))]
    table = tmp_path / "w.tab"
    W.write_table_file(table, rec)
    cfg = write(tmp_path / "t.cfg",
                f"model = table\ntable_file = {table}\nL = 2\n")
    out = tmp_path / "t.json"
    assert run(["check-r", "--config", cfg, "--tol", "1e-12",
                "--out", str(out), "--quiet"]) == 0
    assert '"check": "regularity"' in out.read_text()


def test_table_model_missing_pair_exits(tmp_path, capsys):
    six = W.six_vertex(ETA)
    lam, mu = 0.31 + 0.0j, -0.22 + 0.0j
    table = tmp_path / "w.tab"
    # unitarity needs the swapped pair, which is deliberately absent
    W.write_table_file(table, [(lam, mu, six.eval_r(lam, mu))])
    cfg = write(tmp_path / "t.cfg",
                f"model = table\ntable_file = {table}\nL = 2\n")
    assert run(["check-r", "--config", cfg, "--quiet"]) == 2
    assert "UnknownGridPoint" in capsys.readouterr().err


def test_table_model_failing_weights_located(tmp_path):
    six = W.six_vertex(ETA)
    lam, mu = 0.31 + 0.0j, -0.22 + 0.0j
    broken = six.eval_r(lam, mu).with_injected_entry(
        1, 2, 2, 1, six.eval_r(lam, mu).entry(1, 2, 2, 1) + 1e-3)
    rec = [(lam, mu, broken), (mu, lam, six.eval_r(mu, lam)),
           (lam, lam, six.eval_r(lam, lam))]
    table = tmp_path / "w.tab"
    W.write_table_file(table, rec)
    cfg = write(tmp_path / "t.cfg",
                f"model = table\ntable_file = {table}\nL = 2\n")
    out = tmp_path / "t.json"
    assert run(["check-r", "--config", cfg, "--out", str(out),
                "--quiet"]) == 1
    text = out.read_text()
    assert '"pass": false' in text
    assert '"worst_sample"' in text


def test_worker_pool_does_not_change_reports(spin1_cfg, tmp_path, monkeypatch):
    serial, threaded = tmp_path / "s.json", tmp_path / "t.json"
    monkeypatch.setenv("BETHE_THREADS", "1")
    run(["rules", "--config", spin1_cfg, "--seed", "3",
         "--out", str(serial), "--quiet"])
    monkeypatch.setenv("BETHE_THREADS", "4")
    run(["rules", "--config", spin1_cfg, "--seed", "3",
         "--out", str(threaded), "--quiet"])
    assert strip_timestamp(serial.read_text()) == \
        strip_timestamp(threaded.read_text())


def test_report_float_precision(six_cfg, tmp_path):
    out = tmp_path / "p.json"
    run(["solve", "--config", six_cfg, "--n", "1", "--seeds", "20",
         "--out", str(out), "--quiet"])
    # roots are serialized with 17 significant digits
    m = re.search(r'"roots": \[\[(-?\d+\.\d{13,})', out.read_text())
    assert m is not None
