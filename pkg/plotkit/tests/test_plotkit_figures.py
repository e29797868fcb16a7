"""Renderers: every figure id draws from its study, deterministically."""

import pytest
from conftest import make_nsweep, write_csv, write_summary

from plotkit import FIGURES, FigureSpec, MissingTableError, PlotkitError, render

ALL_IDS = tuple(FIGURES)


@pytest.mark.parametrize("figure_id", ALL_IDS)
def test_every_figure_renders_nonempty(studies, figure_id, tmp_path):
    target = render(FigureSpec(studies[figure_id], figure_id, "png"),
                    out_dir=tmp_path)
    assert target == tmp_path / f"{figure_id}.png"
    assert target.stat().st_size > 2000


@pytest.mark.parametrize("out_format", ["png", "svg", "pdf"])
def test_rerender_is_byte_identical(studies, tmp_path, out_format):
    spec = FigureSpec(studies["exp4_bifurcation"], "exp4_bifurcation",
                      out_format)
    first = render(spec, out_dir=tmp_path / "a")
    second = render(spec, out_dir=tmp_path / "b")
    assert first.read_bytes() == second.read_bytes()


def test_trajectory_rerender_is_byte_identical(studies, tmp_path):
    spec = FigureSpec(studies["exp1_panels"], "exp1_panels", "png")
    first = render(spec, out_dir=tmp_path / "a")
    second = render(spec, out_dir=tmp_path / "b")
    assert first.read_bytes() == second.read_bytes()


def test_render_leaves_the_study_untouched(studies, tmp_path):
    study = studies["nsweep"]
    before = {path: path.stat().st_mtime_ns
              for path in sorted(study.rglob("*")) if path.is_file()}
    render(FigureSpec(study, "nsweep", "png"), out_dir=tmp_path)
    after = {path: path.stat().st_mtime_ns
             for path in sorted(study.rglob("*")) if path.is_file()}
    assert before == after


@pytest.mark.parametrize("figure_id", ALL_IDS)
def test_empty_directory_raises_missing_table(figure_id, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(MissingTableError) as err:
        render(FigureSpec(empty, figure_id, "png"), out_dir=tmp_path / "out")
    message = str(err.value)
    assert message.startswith("missing table:")
    assert str(empty) in message
    assert not (tmp_path / "out").exists()


def test_missing_run_table_is_named(tmp_path):
    # concentration.csv alone is not enough for nsweep: the trajectory
    # panel needs the per-run aggregates
    partial = tmp_path / "partial"
    write_csv(partial / "concentration.csv",
              ["n_firms", "hhi_final", "one_over_n", "ratio"],
              [(2, 0.9, 0.5, 1.8)])
    write_summary(partial, "nsweep")
    with pytest.raises(MissingTableError) as err:
        render(FigureSpec(partial, "nsweep", "png"), out_dir=tmp_path / "out")
    assert str(partial / "runs" / "N=2" / "aggregates.csv") in str(err.value)


def test_schema_mismatch_names_file_and_column(tmp_path, studies):
    broken = tmp_path / "broken"
    write_csv(broken / "bifurcation.csv", ["eta_over_mu", "hhi_final"],
              [(0.5, 0.25)])
    write_summary(broken, "exp4")
    with pytest.raises(PlotkitError) as err:
        render(FigureSpec(broken, "exp4_bifurcation", "png"),
               out_dir=tmp_path / "out")
    message = str(err.value)
    assert "above_threshold" in message and "bifurcation.csv" in message


def test_incomplete_phase_grid_rejected(tmp_path):
    broken = tmp_path / "gappy"
    write_csv(broken / "phase.csv",
              ["g_A", "xi_cann", "health_t15", "output_t15", "alive_t15"],
              [(0.0, 0.0, 1.0, 10.0, 50.0),
               (0.1, 0.0, 1.0, 10.0, 50.0),
               (0.0, 0.4, 0.8, 9.0, 50.0)])  # (0.1, 0.4) cell missing
    write_summary(broken, "exp5")
    with pytest.raises(PlotkitError, match="incomplete"):
        render(FigureSpec(broken, "exp5_phase", "png"),
               out_dir=tmp_path / "out")


def test_figure_spec_rejects_unknown_id(tmp_path):
    with pytest.raises(ValueError, match="figure_id"):
        FigureSpec(tmp_path, "exp9_panels", "png")


def test_figure_spec_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError, match="out_format"):
        FigureSpec(tmp_path, "nsweep", "jpg")


def test_every_figure_has_a_description():
    for name, figure in FIGURES.items():
        assert figure.description, name
        assert callable(figure.build), name


def test_different_data_changes_the_bytes(tmp_path):
    # not a tautology: it pins that the renderer actually draws the
    # study's numbers rather than some fixed template
    a_dir = make_nsweep(tmp_path / "a")
    b_dir = make_nsweep(tmp_path / "b")
    table = (b_dir / "concentration.csv").read_text()
    (b_dir / "concentration.csv").write_text(table.replace("0.97", "0.55"))
    a_png = render(FigureSpec(a_dir, "nsweep", "png"), out_dir=tmp_path / "oa")
    b_png = render(FigureSpec(b_dir, "nsweep", "png"), out_dir=tmp_path / "ob")
    assert a_png.read_bytes() != b_png.read_bytes()
