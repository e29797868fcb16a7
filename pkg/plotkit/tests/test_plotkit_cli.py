"""The one-command interface: render, --list, and exit codes."""

import pytest

from plotkit import FIGURES
from plotkit.cli import main


def test_list_names_every_figure(capsys):
    assert main(["--list"]) == 0
    out = capsys.readouterr().out
    for name in FIGURES:
        assert name in out


def test_render_via_cli(studies, tmp_path, capsys):
    code = main([str(studies["exp4_bifurcation"]), "exp4_bifurcation",
                 "--out", str(tmp_path), "--format", "svg"])
    assert code == 0
    target = tmp_path / "exp4_bifurcation.svg"
    assert target.is_file() and target.stat().st_size > 0
    assert str(target) in capsys.readouterr().out


def test_default_format_is_png(studies, tmp_path):
    code = main([str(studies["nsweep"]), "nsweep", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "nsweep.png").is_file()


def test_missing_table_exits_one_and_names_the_file(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main([str(empty), "ablation", "--out", str(tmp_path / "out")])
    assert code == 1
    err = capsys.readouterr().err
    assert "missing table" in err and "ablation.csv" in err


def test_unknown_figure_id_is_a_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        main([str(tmp_path), "exp9_panels"])
    assert excinfo.value.code == 2
    # argparse's choices message doubles as discoverability
    assert "exp4_bifurcation" in capsys.readouterr().err


def test_no_arguments_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2
    assert "--list" in capsys.readouterr().err
