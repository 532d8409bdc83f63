import json

import numpy as np
import pytest
import sympy as sp

from crossdiff import cli
from crossdiff import config as C
from crossdiff.experiments import barenblatt


def test_minimal_preset_resolves_with_defaults():
    cfg = C.parse_config('preset = "heat_1d"')
    assert cfg.scenario == "single"
    assert cfg["controls"]["dt"] == 1e-4 and cfg["controls"]["newton_atol"] == 1e-10
    assert cfg["monitors"]["q1"] == 1.5 and cfg["seed"] == 0
    assert cfg["out"] == "crossdiff-out/heat_1d"


def test_out_of_range_names_field():
    with pytest.raises(C.ValidationError) as exc:
        C.parse_config('preset = "heat_1d"\n[model]\nk = -1\n')
    assert exc.value.field == "model.k"


@pytest.mark.parametrize("text,field", [
    ('preset = "heat_1d"\nbogus = 1\n', "bogus"),
    ('preset = "heat_1d"\n[grid]\nspacing = 2\n', "grid.spacing"),
    ('preset = "heat_1d"\n[controls]\ndt = "fast"\n', "controls.dt"),
    ('preset = "heat_1d"\n[controls]\ndt = 0.03\n', "controls.dt"),
    ('seed = 1\n', "preset"),
])
def test_validation_errors(text, field):
    with pytest.raises(C.ValidationError) as exc:
        C.parse_config(text)
    assert exc.value.field == field


def test_parse_error_has_position():
    with pytest.raises(C.ParseError) as exc:
        C.parse_config('preset = "heat_1d"\nx = = 2\n')
    assert exc.value.line == 2 and exc.value.column is not None


@pytest.mark.parametrize("name", sorted(C.PRESETS))
def test_emit_reparse_roundtrip(name):
    cfg = C.preset_config(name)
    again = C.parse_config(cfg.emit())
    assert again.values == cfg.values


def test_barenblatt_profile_solves_pme_symbolically():
    x, t, Cc = sp.symbols("x t C", positive=True)
    for k in (1, 2):
        a = sp.Rational(1, k + 2)
        kappa = a * k / (2 * (k + 1))
        u = t ** (-a) * (Cc - kappa * x**2 * t ** (-2 * a)) ** sp.Rational(1, k)
        res = sp.diff(u, t) - sp.diff(u ** (k + 1), x, 2)
        assert sp.simplify(res) == 0
    # the numeric helper agrees with the closed form inside the support
    xs = np.linspace(-0.5, 0.5, 11)
    expect = 1.3 ** (-1 / 3) * (0.1 - xs**2 / 12 * 1.3 ** (-2 / 3))
    np.testing.assert_allclose(barenblatt(xs, 1.3, 1.0, 0.1), np.maximum(expect, 0), rtol=1e-13)


# ---------------------------------------------------------------------------
# command line


def _write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    return str(p)


def test_cli_validation_exit_2(tmp_path, capsys):
    assert cli.main(["run", _write(tmp_path, 'preset = "heat_1d"\n[model]\nk = -1\n')]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["kind"] == "validation" and err["field"] == "model.k"


def test_cli_parse_exit_2(tmp_path, capsys):
    assert cli.main(["run", _write(tmp_path, "a = = 1")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["kind"] == "parse" and err["line"] == 1


def test_cli_check_inadmissible(tmp_path, capsys):
    path = _write(tmp_path, 'preset = "structure_check"\n[model]\na21 = 4.0\n')
    assert cli.main(["check", path]) == 1
    rep = json.loads(capsys.readouterr().out)
    assert "skt_admissible" in rep["failures"]
    assert rep["tables"]["ellipticity"]["conditions"][0]["witness_u"] is not None


def test_run_structure_preset_writes_artifacts(tmp_path):
    cfg = C.preset_config("structure_check", str(tmp_path / "s"))
    status, report = cli.run_experiment(cfg)
    assert status == 0 and report["status"] == "pass"
    for name in ("report.json", "manifest.json", "config.toml"):
        assert (tmp_path / "s" / name).exists()
    manifest = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert "wall_time_s" in manifest and "numpy" in manifest["versions"]
    assert "wall_time_s" not in (tmp_path / "s" / "report.json").read_text()


def test_exit_status_matches_verdicts(tmp_path):
    cfg = C.parse_config('preset = "structure_check"\n[model]\na21 = 4.0\n')
    status, report = cli.run_experiment(cfg, tmp_path / "bad")
    assert status == 1
    assert report["failures"] == sorted(k for k, v in report["verdicts"].items() if v != "pass")


def test_locked_directory(tmp_path):
    from filelock import FileLock

    out = tmp_path / "busy"
    out.mkdir()
    with FileLock(str(out / ".crossdiff.lock")):
        status, report = cli.run_experiment(C.preset_config("structure_check"), out)
    assert status == 3 and report["status"] == "error"


def test_runner_error_is_reported(tmp_path):
    # the Barenblatt scenario needs a scalar porous medium model
    cfg = C.parse_config('preset = "pme_barenblatt_1d"\n[model]\nname = "heat"\n')
    status, report = cli.run_experiment(cfg, tmp_path / "e")
    assert status == 2 and report["status"] == "error" and "ValueError" in report["error"]


def test_plotdata_missing_report(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    with pytest.raises(cli.MissingReport):
        cli.emit_plotdata(tmp_path / "empty")
    assert cli.main(["plotdata", str(tmp_path / "empty")]) == 2


def test_plotdata_single_ledger(tmp_path):
    cfg = C.parse_config('preset = "heat_1d"\n[controls]\nT = 0.01\ndt = 1e-3\nstride = 1\n'
                         '[monitors]\nrefine = []\n')
    status, _ = cli.run_experiment(cfg, tmp_path / "h")
    assert status == 0
    files = cli.emit_plotdata(tmp_path / "h")
    ledgers = [p for p in files if p.name.startswith("ledger_")]
    assert len(ledgers) == 1
    assert ledgers[0].read_text().splitlines()[0] == "t,E1,E2,E3,E4,E5"


def test_plotdata_cascade_matches_distances(tmp_path):
    cfg = C.parse_config('preset = "porous_media_cascade_1d"\n[grid]\nn = [32]\n'
                         '[controls]\nT = 0.02\ndt = 0.002\nstride = 5\n[cascade]\ncount = 4\n'
                         'cauchy_start = 0\n')
    cli.run_experiment(cfg, tmp_path / "c")
    files = cli.emit_plotdata(tmp_path / "c")
    cauchy = [p for p in files if p.name.startswith("cauchy_")][0]
    rows = [r.split(",") for r in cauchy.read_text().splitlines()]
    assert rows[0] == ["n", "lambda", "dist_to_last"]
    dist = {}
    for line in (tmp_path / "c" / "cascade" / "distances.csv").read_text().splitlines()[1:]:
        i, j, d = line.split(",")
        dist[(int(i), int(j))] = float(d)
    for n, _, d in rows[1:]:
        assert float(d) == dist[(int(n), 3)]
