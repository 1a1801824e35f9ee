import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from indirgof.cli import (
    RunConfig,
    anscombe,
    anscombe_inverse,
    load_csv,
    load_image_section,
    main,
    read_config_file,
    read_image,
    run,
    write_dataset_csv,
)
from indirgof.errors import DataFormatError, InsufficientDataError
from indirgof.simulation import generate, paper_model, poisson_count_image


class TestAnscombe:
    def test_reference_values(self):
        assert anscombe(0.0) == pytest.approx(1.2247449, abs=1e-7)
        assert anscombe(1.0) == pytest.approx(2.3452079, abs=1e-7)

    def test_inverse_round_trip(self):
        for y in (0.0, 1.0, 255.0):
            assert anscombe_inverse(anscombe(y)) == pytest.approx(y, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            anscombe(-0.5)
        with pytest.raises(ValueError):
            anscombe(np.array([1.0, -2.0]))


class TestCsvIo:
    def test_small_round_trip(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x1,x2,y\n0.1,0.2,1.5\n0.3,0.4,-2.0\n0.5,0.6,0.0\n")
        data = load_csv(path)
        assert data.n == 3 and data.m == 2
        assert_allclose(data.y, [1.5, -2.0, 0.0])

    def test_bit_identical_round_trip(self, tmp_path):
        rng = np.random.default_rng(401)
        data = generate(paper_model("normal", "uniform"), 50, rng)
        path = tmp_path / "rt.csv"
        write_dataset_csv(data, path)
        back = load_csv(path)
        assert_array_equal(back.x, data.x)
        assert_array_equal(back.y, data.y)

    def test_empty_data_section(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("x1,y\n")
        with pytest.raises(InsufficientDataError):
            load_csv(path)

    def test_out_of_range_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,y\n0.5,1.0\n1.5,2.0\n")
        with pytest.raises(DataFormatError, match="row 3"):
            load_csv(path)

    def test_non_numeric_names_location(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("x1,y\n0.5,1.0\n0.7,oops\n")
        with pytest.raises(DataFormatError, match="row 3.*oops"):
            load_csv(path)

    def test_header_must_match(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("a,b\n0.1,0.2\n")
        with pytest.raises(DataFormatError, match="header"):
            load_csv(path)


def _write_pgm_p2(path, mat, maxval=255):
    lines = [f"P2\n# comment row\n{mat.shape[1]} {mat.shape[0]}\n{maxval}\n"]
    lines.append("\n".join(" ".join(str(v) for v in row) for row in mat))
    path.write_text("".join(lines) + "\n")


def _write_pgm_p5(path, mat, maxval=255):
    header = f"P5\n{mat.shape[1]} {mat.shape[0]}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    path.write_bytes(header + mat.astype(dtype).tobytes())


class TestImageIo:
    def test_p2_and_p5_agree(self, tmp_path):
        rng = np.random.default_rng(402)
        mat = rng.integers(0, 256, size=(40, 40))
        p2, p5 = tmp_path / "a.pgm", tmp_path / "b.pgm"
        _write_pgm_p2(p2, mat)
        _write_pgm_p5(p5, mat)
        assert_array_equal(read_image(p2), read_image(p5))

    def test_sixteen_bit_p5(self, tmp_path):
        rng = np.random.default_rng(403)
        mat = rng.integers(0, 65536, size=(8, 8))
        path = tmp_path / "wide.pgm"
        _write_pgm_p5(path, mat, maxval=65535)
        assert_array_equal(read_image(path), mat)

    def test_csv_matrix_fallback(self, tmp_path):
        path = tmp_path / "m.csv"
        np.savetxt(path, np.arange(12).reshape(3, 4), delimiter=",")
        assert read_image(path).shape == (3, 4)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n12 nope\n255\n")
        with pytest.raises(DataFormatError):
            read_image(path)

    def test_truncated_raster(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(7))
        with pytest.raises(DataFormatError, match="shorter"):
            read_image(path)

    def test_section_to_dataset(self, tmp_path):
        rng = np.random.default_rng(404)
        mat = rng.integers(0, 256, size=(64, 64))
        path = tmp_path / "img.pgm"
        _write_pgm_p5(path, mat)
        data = load_image_section(path, 0, 0, 32)
        assert data.n == 1024
        assert data.x[0, 0] == pytest.approx(0.5 / 32)  # pixel (1, 1)
        assert data.x[0, 1] == pytest.approx(0.5 / 32)
        assert data.y[0] == pytest.approx(anscombe(float(mat[0, 0])))
        full = load_image_section(path, 0, 0, 64)
        assert full.n == 4096

    def test_section_bounds_checked(self, tmp_path):
        mat = np.zeros((16, 16), dtype=int)
        path = tmp_path / "small.pgm"
        _write_pgm_p5(path, mat)
        with pytest.raises(DataFormatError, match="outside"):
            load_image_section(path, 8, 8, 16)


class TestConfigFile:
    def test_parse_and_alias(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# scenario file\nalpha = 0.1\nnull = gaussian\n"
            "n = 50,100\nscenarios = normal,laplace\ncv-grid = 1,2\n"
        )
        values = read_config_file(cfg)
        assert values["alpha"] == "0.1"
        assert values["n"] == "50,100"

    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("alpha = 0.1\nreps = 4\n")
        data_file = tmp_path / "d.csv"
        rng = np.random.default_rng(405)
        write_dataset_csv(generate(paper_model("normal", "uniform"), 60, rng),
                          data_file)
        out = tmp_path / "r.json"
        rc = main(["test", str(data_file), "--config", str(cfg),
                   "--alpha", "0.2", "--out", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["alpha"] == 0.2

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("alpha 0.1\n")
        with pytest.raises(DataFormatError):
            read_config_file(cfg)

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "odd.cfg"
        cfg.write_text("bandwidth = 3\n")
        rc = main(["simulate", "--config", str(cfg)])
        assert rc == 1


class TestTestCommand:
    def test_report_schema_and_exports(self, tmp_path):
        rng = np.random.default_rng(406)
        data = generate(paper_model("normal", "uniform"), 120, rng)
        src = tmp_path / "d.csv"
        write_dataset_csv(data, src)
        out = tmp_path / "report.json"
        trace = tmp_path / "trace.csv"
        qq = tmp_path / "qq.csv"
        rc = main(["test", str(src), "--seed", "9", "--out", str(out),
                   "--trace-out", str(trace), "--qq-out", str(qq)])
        assert rc == 0
        report = json.loads(out.read_text())
        for key in ("schema_version", "statistic", "t0", "q_alpha", "alpha",
                    "reject", "n", "sigma_hat", "chosen_radius", "seed",
                    "cv", "ks_diagnostic"):
            assert key in report
        assert report["schema_version"] == 1
        assert report["n"] == 120
        assert report["seed"] == 9
        assert len(qq.read_text().strip().splitlines()) == 121
        header, first = trace.read_text().splitlines()[:2]
        assert header == "t,xi"
        float(first.split(",")[1])  # parses

    def test_level_property_over_seeded_repeats(self, tmp_path):
        """On null data the test accepts in at least 90% of repeats."""
        model = paper_model("normal", "uniform")
        accepted = 0
        reps = 100
        src = tmp_path / "d.csv"
        out = tmp_path / "r.json"
        for rep in range(reps):
            rng = np.random.default_rng([500, rep])
            write_dataset_csv(generate(model, 100, rng), src)
            rc = main(["test", str(src), "--alpha", "0.05", "--out", str(out)])
            assert rc == 0
            accepted += not json.loads(out.read_text())["reject"]
        assert accepted >= 90

    def test_error_json_on_failure(self, tmp_path):
        err = tmp_path / "err.json"
        rc = main(["test", str(tmp_path / "missing.csv"),
                   "--error-json", str(err)])
        assert rc == 1
        assert "error" in json.loads(err.read_text())

    def test_missing_input_is_error(self):
        assert main(["test"]) == 1

    def test_unknown_null_is_error(self, tmp_path):
        src = tmp_path / "d.csv"
        rng = np.random.default_rng(410)
        write_dataset_csv(generate(paper_model("normal", "uniform"), 40, rng), src)
        assert main(["test", str(src), "--null", "pareto"]) == 1

    def test_output_paths_checked_before_compute(self, tmp_path):
        src = tmp_path / "d.csv"
        rng = np.random.default_rng(411)
        write_dataset_csv(generate(paper_model("normal", "uniform"), 40, rng), src)
        rc = main(["test", str(src), "--out",
                   str(tmp_path / "no" / "such" / "dir" / "r.json")])
        assert rc == 1


class TestEstimateCommand:
    def test_exports(self, tmp_path):
        rng = np.random.default_rng(407)
        data = generate(paper_model("normal", "uniform"), 80, rng)
        src = tmp_path / "d.csv"
        write_dataset_csv(data, src)
        grid_out = tmp_path / "grid.csv"
        res_out = tmp_path / "res.csv"
        data_out = tmp_path / "data.csv"
        rc = main(["estimate", str(src), "--radius", "2",
                   "--grid-points", "5", "--out", str(grid_out),
                   "--residuals-out", str(res_out), "--data-out", str(data_out)])
        assert rc == 0
        grid_lines = grid_out.read_text().strip().splitlines()
        assert grid_lines[0] == "x1,x2,fitted"
        assert len(grid_lines) == 26  # 5x5 grid plus header
        res_lines = res_out.read_text().strip().splitlines()
        assert res_lines[0] == "x1,x2,y,fitted,residual,z"
        assert len(res_lines) == 81
        back = load_csv(data_out)
        assert_array_equal(back.x, data.x)
        assert_array_equal(back.y, data.y)


class TestSimulateCommand:
    def test_minimal_config(self, tmp_path):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text(
            "scenarios = normal\ndesign = uniform\nn = 40\nreps = 2\n"
            "seed = 12\ncv-grid = 1,2\n"
        )
        out = tmp_path / "table.csv"
        rc = main(["simulate", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 2  # header plus one row
        assert lines[1].startswith("normal,uniform,40,2,")

    def test_json_output(self, tmp_path):
        out = tmp_path / "t.json"
        rc = main(["simulate", "--scenarios", "normal", "--n", "40",
                   "--reps", "2", "--seed", "1", "--cv-grid", "1",
                   "--json-out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["rows"][0]["n"] == 40


class TestImageCommand:
    def test_end_to_end_poisson_image(self, tmp_path):
        model = paper_model("zero", "uniform")
        img = poisson_count_image(model, 32, np.random.default_rng(408), scale=40.0)
        path = tmp_path / "img.pgm"
        _write_pgm_p2(path, img, maxval=int(img.max()))
        out = tmp_path / "rep.json"
        qq = tmp_path / "qq.csv"
        recon = tmp_path / "recon.csv"
        rc = main(["image", str(path), "--size", "32", "--out", str(out),
                   "--qq-out", str(qq), "--fitted-out", str(recon)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["n"] == 1024
        assert report["caveats"]  # grid-design caveat recorded
        assert len(qq.read_text().strip().splitlines()) == 1025
        recon_mat = np.loadtxt(recon, delimiter=",")
        assert recon_mat.shape == (32, 32)

    def test_exit_zero_for_both_outcomes(self, tmp_path):
        # decision direction must not leak into the exit status
        model = paper_model("laplace", "uniform")
        rng = np.random.default_rng(409)
        src = tmp_path / "d.csv"
        write_dataset_csv(generate(model, 300, rng), src)
        out = tmp_path / "r.json"
        rc = main(["test", str(src), "--out", str(out)])
        assert rc == 0


def test_scan_grid_flag_respected(tmp_path):
    rng = np.random.default_rng(412)
    src = tmp_path / "d.csv"
    write_dataset_csv(generate(paper_model("normal", "uniform"), 80, rng), src)
    coarse, fine = tmp_path / "c.json", tmp_path / "f.json"
    assert main(["test", str(src), "--scan-grid", "512",
                 "--out", str(coarse)]) == 0
    assert main(["test", str(src), "--scan-grid", "8192",
                 "--out", str(fine)]) == 0
    a = json.loads(coarse.read_text())["statistic"]
    b = json.loads(fine.read_text())["statistic"]
    assert a == pytest.approx(b, abs=5e-3)
    assert a != b  # the knob actually reached the scan


def test_run_config_validates_alpha():
    with pytest.raises(ValueError):
        RunConfig(command="test", alpha=1.2)


def test_run_rejects_unknown_input(tmp_path):
    cfg = RunConfig(command="test", input=str(tmp_path / "nope.csv"))
    assert run(cfg) == 1
