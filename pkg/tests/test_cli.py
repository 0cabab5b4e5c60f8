import numpy as np
import pytest

from quenchflow.cli import (CONFIG_KEYS, MissingKey, TypeMismatch, UnknownKey, build_parser, main,
                            parse_config)
from quenchflow.expr import parse_expr
from quenchflow.records import load_record

A2 = "f = 0.5-0.1*cos(2*pi*x)\ng = 0.8-0.2*cos(2*pi*x)\n"


def test_parse_keeps_expression_text():
    cfg = parse_config("# demo\nf = 1 + 0.5*cos(2*pi*x)  # forcing\ng = 1\nJ = 64\nrescaled = yes\n")
    assert cfg["f"] == "1 + 0.5*cos(2*pi*x)"
    assert cfg["J"] == 64 and cfg["rescaled"] is True
    assert cfg["eps"] == CONFIG_KEYS["eps"][1]
    assert cfg.lines["J"] == 4
    spec = cfg.spec()
    assert spec.J == 64 and spec.f == parse_expr("1 + 0.5*cos(2*pi*x)")


def test_parse_errors_carry_line():
    with pytest.raises(TypeMismatch) as err:
        parse_config("J = 0\nf = 1\ng = 1\n")
    assert err.value.line == 1
    with pytest.raises(TypeMismatch) as err:
        parse_config("f = 1\ng = 1\nJ = 17\n")
    assert err.value.line == 3
    with pytest.raises(TypeMismatch):
        parse_config("f = 1\ng = 1\neps = small\n")
    with pytest.raises(TypeMismatch):
        parse_config("f = 1 +\ng = 1\n")
    with pytest.raises(TypeMismatch):
        parse_config("f = 1\nf = 2\ng = 1\n")
    with pytest.raises(UnknownKey) as err:
        parse_config("f = 1\ng = 1\nepsilon = 0.1\n")
    assert err.value.line == 3
    with pytest.raises(MissingKey):
        parse_config("")
    with pytest.raises(MissingKey):
        parse_config("f = 1\n")


def _write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", str(_write(tmp_path, A2))]) == 0
    assert main(["validate", str(_write(tmp_path, "f = 1\ng = -1\n", "bad.cfg"))]) == 1
    assert main(["validate", str(_write(tmp_path, "f = 1\ng = 1\nfoo = 2\n", "u.cfg"))]) == 1
    assert "UnknownKey" in capsys.readouterr().err


def test_run_and_export(tmp_path, capsys):
    cfg = _write(tmp_path, "f = 1\ng = 0.5\nJ = 64\nsnapshot_stride = 20\n")
    assert main(["run", str(cfg)]) == 0
    out = capsys.readouterr().out
    T = float(next(ln.split()[1] for ln in out.splitlines() if ln.startswith("T*_estimate")))
    assert abs(T - (np.log(2) - 0.5)) / (np.log(2) - 0.5) < 0.02
    rec = load_record(tmp_path / "c.run")
    assert rec.verdict == "Quenched"
    t = rec.snapshots[1][0]
    assert main(["export-mesh", str(tmp_path / "c.run"), repr(t), str(tmp_path / "m.obj"), "--K", "8"]) == 0
    assert sum(ln.startswith("v ") for ln in (tmp_path / "m.obj").read_text().splitlines()) == 64 * 8
    assert main(["export-mesh", str(tmp_path / "c.run"), "99", str(tmp_path / "n.obj")]) == 2
    assert main(["export-mesh", str(tmp_path / "missing"), "0", str(tmp_path / "n.obj")]) == 2


def test_locate_rejects_constant_g(tmp_path, capsys):
    cfg = _write(tmp_path, "f = 0.5\ng = 1\nJ = 32\n")
    assert main(["locate", str(cfg)]) == 1
    assert "HypothesisViolated" in capsys.readouterr().err


def test_sweep_and_limit(tmp_path):
    cfg = _write(tmp_path, "f = 1\ng = 1\nalpha = 2\nJ = 16\nsweep_values = 0.2, 0.1\n")
    assert main(["sweep", str(cfg)]) == 0
    lines = (tmp_path / "c_sweep" / "regime.csv").read_text().splitlines()
    assert len(lines) == 3 and all(",Quenched," in ln for ln in lines[1:])
    cfg = _write(tmp_path, "f = 0.5\ng = 1\nJ = 16\nlimit_eps = 0.5, 0.25\nlimit_times = 4\n", "l.cfg")
    assert main(["limit", str(cfg)]) == 0
    assert len((tmp_path / "l_limit.csv").read_text().splitlines()) == 3
    no_values = _write(tmp_path, "f = 1\ng = 1\n", "s.cfg")
    assert main(["sweep", str(no_values)]) == 1


def test_help_lists_every_key(capsys):
    with pytest.raises(SystemExit) as ex:
        build_parser().parse_args(["--help"])
    assert ex.value.code == 0
    text = capsys.readouterr().out
    for key in CONFIG_KEYS:
        assert f"  {key} " in text
    assert "exit codes" in text
