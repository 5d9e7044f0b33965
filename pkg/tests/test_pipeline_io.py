"""I/O and orchestration tests: matrix loading, subsampling, config
parsing, result serialization, plots, and the command-line interface."""
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tweedie_screen import ExpressionMatrix, RegimeShift, ScreenConfig, load_matrix, save_matrix, subsample
from tweedie_screen.cli import main
from tweedie_screen.config import parse_columns, read_config_file
from tweedie_screen.matrix_io import MatrixFormatError
from tweedie_screen.pipeline import PGAM0_HEADER, emit_plots, run_screen, write_results
from tweedie_screen.simulate import SimSpec, generate


@pytest.fixture(scope="module")
def toy_matrix():
    Xc, Xt, labels = generate(SimSpec(n_rows=8, m_control=6, m_test=6, seed=5))
    ids = tuple(f"g{i}" for i in range(8))
    cols = tuple(f"c{j}" for j in range(6)) + tuple(f"t{j}" for j in range(6))
    return ExpressionMatrix(ids, cols, np.hstack([Xc, Xt]))


@pytest.fixture(scope="module")
def toy_run(toy_matrix):
    cfg = ScreenConfig(control_cols=tuple(range(1, 7)), test_cols=tuple(range(7, 13)),
                       shift=RegimeShift(2.0, 20.0, 1.0), ngridpts=4, prune=0.0)
    return run_screen(toy_matrix, cfg, workers=1), cfg


class TestLoadSave:
    def test_round_trip(self, toy_matrix, tmp_path):
        path = tmp_path / "m.csv"
        save_matrix(toy_matrix, path)
        loaded = load_matrix(path)
        assert loaded.row_ids == toy_matrix.row_ids
        assert loaded.col_ids == toy_matrix.col_ids
        assert np.array_equal(loaded.values, toy_matrix.values)

    def test_tab_delimited(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("id\ta\tb\nr1\t1\t2\nr2\t0\t3.5\n")
        m = load_matrix(path)
        assert m.shape == (2, 2)
        assert m.values[1, 1] == 3.5

    def test_negative_cell_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,a,b\nr1,1,-2\n")
        with pytest.raises(MatrixFormatError, match=r"bad.csv:2: column 3"):
            load_matrix(path)

    def test_unparseable_cell_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,a,b\nr1,1,x\n")
        with pytest.raises(MatrixFormatError, match=r"column 3.*'x'"):
            load_matrix(path)

    def test_duplicate_row_ids(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("id,a\nr1,1\nr1,2\n")
        with pytest.raises(MatrixFormatError, match="duplicate"):
            load_matrix(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("id,a,b\nr1,1\n")
        with pytest.raises(MatrixFormatError, match="expected 3 fields"):
            load_matrix(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(MatrixFormatError):
            load_matrix(path)


@pytest.fixture(scope="module")
def wide():
    rng = np.random.default_rng(2)
    vals = rng.uniform(0, 10, size=(50, 92))
    return ExpressionMatrix(tuple(f"g{i}" for i in range(50)),
                            tuple(f"s{j}" for j in range(92)), vals)


class TestSubsample:
    def test_full_fractions_identity(self, wide):
        cfg = ScreenConfig(control_cols=tuple(range(1, 45)), test_cols=tuple(range(45, 93)))
        Xc, Xt, rows, cids, tids = subsample(wide, cfg)
        assert Xc.shape == (50, 44) and Xt.shape == (50, 48)
        assert rows == wide.row_ids
        assert np.array_equal(Xc, wide.values[:, :44])

    def test_fraction_rounding(self, wide):
        cfg = ScreenConfig(control_cols=tuple(range(1, 45)), test_cols=tuple(range(45, 93)),
                           row_fraction=0.1, control_fraction=0.2, test_fraction=0.2, seed=7)
        Xc, Xt, rows, cids, tids = subsample(wide, cfg)
        assert len(rows) == 5
        assert len(cids) == round(0.2 * 44) == 9
        assert len(tids) == round(0.2 * 48) == 10

    def test_seed_determinism(self, wide):
        cfg = ScreenConfig(control_cols=tuple(range(1, 45)), test_cols=tuple(range(45, 93)),
                           row_fraction=0.3, seed=11)
        a = subsample(wide, cfg)
        b = subsample(wide, cfg)
        assert a[2] == b[2] and np.array_equal(a[0], b[0])

    def test_out_of_range_column(self, wide):
        cfg = ScreenConfig(control_cols=(1, 2), test_cols=(93,))
        with pytest.raises(ValueError):
            subsample(wide, cfg)


class TestConfig:
    def test_overlapping_columns_rejected(self):
        with pytest.raises(ValueError):
            ScreenConfig(control_cols=(1, 2), test_cols=(2, 3))

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            ScreenConfig(row_fraction=0.0)
        with pytest.raises(ValueError):
            ScreenConfig(row_fraction=1.5)

    def test_default_grid_has_999_points(self):
        pts = ScreenConfig().pi0_points()
        assert pts.size == 999
        assert pts[0] == pytest.approx(0.001)
        assert pts[-1] == pytest.approx(0.999)

    def test_parse_columns(self):
        assert parse_columns("1-4") == (1, 2, 3, 4)
        assert parse_columns("1,3,7-9") == (1, 3, 7, 8, 9)
        with pytest.raises(ValueError):
            parse_columns("5-3")
        with pytest.raises(ValueError):
            parse_columns("0-2")

    def test_config_file_round_trip(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text(
            "control_cols = 1-6\ntest_cols = 7-12\nseed = 3\n"
            "shift = 2 20 1\nprune = 0.1  # trailing comment\n"
        )
        kw = read_config_file(path)
        cfg = ScreenConfig.from_dict({**kw, "shift": RegimeShift(*kw["shift"])})
        assert cfg.seed == 3 and cfg.prune == 0.1
        assert cfg.shift.delta == 20.0

    def test_config_file_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("bogus = 1\n")
        with pytest.raises(ValueError, match="unknown config key"):
            read_config_file(path)

    def test_to_from_dict_round_trip(self):
        cfg = ScreenConfig(control_cols=(1, 2), test_cols=(3, 4),
                           shift=RegimeShift(3.0, 5.0, 2.0), zeta=4.0)
        again = ScreenConfig.from_dict(cfg.to_dict())
        assert again == cfg


class TestWriteResults:
    def test_file_set_and_header(self, toy_run, tmp_path):
        run, cfg = toy_run
        written = write_results(run.ct, run.tc, run.tables, cfg, tmp_path, timings=run.timings)
        names = {p.name for p in written}
        expected = {"pgam0.csv", "pi0_curves.csv", "run_manifest.json"} | {
            f"diffs_{p}_{v}.csv" for p in ("11", "12") for v in (0, 1, 2)
        }
        assert expected <= names
        header = (tmp_path / "pgam0.csv").read_text().splitlines()[0]
        assert header == ",".join(PGAM0_HEADER)
        assert header == "gene,Lik_Rat_CT,P.gam.eq.0_CT,Lik_Rat_TC,P.gam.eq.0_TC"

    def test_rounding_at_digits(self, toy_run, tmp_path):
        run, cfg = toy_run
        write_results(run.ct, run.tc, run.tables, cfg, tmp_path)
        for line in (tmp_path / "pgam0.csv").read_text().splitlines()[1:]:
            for field in line.split(",")[1:]:
                whole, frac = field.split(".")
                assert len(frac) == cfg.digits

    def test_manifest_contents(self, toy_run, tmp_path):
        run, cfg = toy_run
        write_results(run.ct, run.tc, run.tables, cfg, tmp_path, timings=run.timings)
        manifest = json.loads((tmp_path / "run_manifest.json").read_text())
        assert manifest["n_rows"] == 8
        assert manifest["config"]["ngridpts"] == 4
        assert manifest["seed"] == cfg.seed
        assert "version" in manifest and "timings" in manifest

    def test_rewrite_is_byte_identical(self, toy_run, tmp_path):
        run, cfg = toy_run
        write_results(run.ct, run.tc, run.tables, cfg, tmp_path / "a")
        write_results(run.ct, run.tc, run.tables, cfg, tmp_path / "b")
        for name in ("pgam0.csv", "diffs_12_2.csv", "pi0_curves.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestEmitPlots:
    def test_svg_well_formed(self, toy_run, tmp_path):
        run, _ = toy_run
        emit_plots(run.ct, run.tc, tmp_path)
        for name in ("pi0_density.svg", "pi0_cdf.svg"):
            root = ET.parse(tmp_path / name).getroot()
            assert root.tag.endswith("svg")

    def test_backing_csv_normalized(self, toy_run, tmp_path):
        run, _ = toy_run
        emit_plots(run.ct, run.tc, tmp_path)
        rows = (tmp_path / "pi0_curves.csv").read_text().splitlines()[1:]
        grid = np.array([float(r.split(",")[0]) for r in rows])
        dens = np.array([float(r.split(",")[1]) for r in rows])
        step = grid[1] - grid[0]
        assert float(dens.sum() * step) == pytest.approx(1.0, abs=1e-9)


class TestCli:
    def test_dist_density_at_zero(self, capsys):
        assert main(["dist", "--xi", "1.5", "--mu", "1", "--phi", "1", "--x", "0"]) == 0
        assert capsys.readouterr().out.strip() == "0.135335"

    def test_dist_cdf(self, capsys):
        assert main(["dist", "--xi", "2", "--mu", "1", "--phi", "1",
                     "--x", "1", "--cdf"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-6)

    def test_missing_input_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["screen", "--out", "x"])
        assert exc.value.code != 0

    def test_simulate_writes_files(self, tmp_path, capsys):
        code = main(["simulate", "--out", str(tmp_path), "--n-rows", "6",
                     "--m-control", "4", "--m-test", "4", "--seed", "2"])
        assert code == 0
        for name in ("control.csv", "test.csv", "labels.csv"):
            assert (tmp_path / name).exists()
        labels = (tmp_path / "labels.csv").read_text().splitlines()
        assert labels[0] == "gene,different_process"
        assert len(labels) == 7

    def test_screen_end_to_end(self, toy_matrix, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("TWEEDIE_SCREEN_THREADS", "1")
        inp = tmp_path / "matrix.csv"
        save_matrix(toy_matrix, inp)
        code = main(["screen", "--input", str(inp), "--out", str(tmp_path / "run"),
                     "--control-cols", "1-6", "--test-cols", "7-12",
                     "--shift", "2,20,1", "--ngridpts", "4", "--prune", "0"])
        assert code == 0
        assert (tmp_path / "run" / "pgam0.csv").exists()
        assert (tmp_path / "run" / "pi0_density.svg").exists()
        assert "E[pi0]" in capsys.readouterr().out

    def test_fit_subcommand(self, toy_matrix, tmp_path, capsys):
        inp = tmp_path / "matrix.csv"
        save_matrix(toy_matrix, inp)
        assert main(["fit", "--input", str(inp), "--control-cols", "1-6"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert 1.0 < out["xi"] < 2.0 and out["mu"] > 0

    def test_error_reported_to_stderr(self, tmp_path, capsys):
        code = main(["screen", "--input", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path), "--control-cols", "1-2", "--test-cols", "3-4"])
        assert code == 1
        assert "error:" in capsys.readouterr().err
