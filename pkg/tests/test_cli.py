import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from coverimpact.cli import main
from coverimpact.imagery import read_image
from coverimpact.series import CoverageSeries, read_series_csv, write_series_csv
from coverimpact.synth import SynthSeriesSpec, gen_series

SVG = "{http://www.w3.org/2000/svg}"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def assert_error(capsys, argv, code_name):
    code, _, err = run(capsys, *argv)
    assert code == 1
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"error: {code_name}: ")
    return lines[0]


def points(el):
    return [tuple(map(float, p.split(","))) for p in el.get("points").split()]


@pytest.fixture
def kinked_csv(tmp_path):
    series = gen_series(SynthSeriesSpec(30, pre_slope=0.0, post_slope=-0.03, level0=0.8, change_at=12,
                                        noise_sd=0.003, seed=4, start_epoch=1990))
    path = tmp_path / "series.csv"
    write_series_csv(series, path)
    return path


class TestSynthAndSegment:
    def test_single_image_fraction(self, tmp_path, capsys):
        code, out, _ = run(capsys, "synth", "--fraction", 0.5, "--size", "10x10", "--name", "1984.png", "--out", tmp_path)
        assert code == 0 and "0.500000" in out
        code, _, _ = run(capsys, "segment", tmp_path / "1984.png", "--out", tmp_path / "seg")
        assert code == 0
        assert (tmp_path / "seg" / "series.csv").read_text() == "epoch,coverage\n1984,0.500000\n"
        mask = read_image(tmp_path / "seg" / "1984.mask.png")
        assert set(np.unique(mask.pixels)) == {0, 255}

    def test_two_images(self, tmp_path, capsys):
        run(capsys, "synth", "--fraction", 1.0, "--size", "8x8", "--name", "img_2001.png", "--out", tmp_path)
        run(capsys, "synth", "--fraction", 0.5, "--size", "8x8", "--name", "img_2000.png", "--out", tmp_path, "--seed", 3)
        code, _, _ = run(capsys, "segment", "--pattern", tmp_path / "img_*.png", "--out", tmp_path)
        assert code == 0
        assert (tmp_path / "series.csv").read_text() == "epoch,coverage\n2000,0.500000\n2001,1.000000\n"

    def test_series_kink(self, tmp_path, capsys):
        run(capsys, "synth", "--series", "--n", 10, "--change-at", 5, "--noise", 0, "--pre-slope", 0.01,
            "--post-slope", -0.05, "--level0", 0.5, "--out", tmp_path)
        y = read_series_csv(tmp_path / "series.csv").values
        steps = np.diff(y)
        assert np.allclose(steps[:4], 0.01) and np.allclose(steps[4:], -0.05)

    def test_images_match_truth_and_jobs_independent(self, tmp_path, capsys):
        run(capsys, "synth", "--images", "--n", 6, "--change-at", 3, "--size", "16x16", "--start-epoch", 2000,
            "--seed", 2, "--out", tmp_path / "imgs")
        run(capsys, "segment", "--pattern", tmp_path / "imgs" / "*.png", "--out", tmp_path / "a")
        run(capsys, "segment", "--pattern", tmp_path / "imgs" / "*.png", "--out", tmp_path / "b", "--jobs", 4)
        truth = (tmp_path / "imgs" / "truth.csv").read_text()
        assert (tmp_path / "a" / "series.csv").read_text() == truth
        assert (tmp_path / "b" / "series.csv").read_text() == truth
        for e in range(2000, 2006):
            assert (tmp_path / "a" / f"{e}.mask.png").read_bytes() == (tmp_path / "b" / f"{e}.mask.png").read_bytes()

    def test_epoch_regex_failure_names_file(self, tmp_path, capsys):
        run(capsys, "synth", "--fraction", 0.5, "--size", "4x4", "--name", "forest.png", "--out", tmp_path)
        line = assert_error(capsys, ["segment", tmp_path / "forest.png"], "epoch")
        assert "forest.png" in line

    def test_duplicate_epochs(self, tmp_path, capsys):
        for name in ("a_1990.png", "b_1990.png"):
            run(capsys, "synth", "--fraction", 0.5, "--size", "4x4", "--name", name, "--out", tmp_path)
        assert_error(capsys, ["segment", "--pattern", tmp_path / "*.png"], "duplicate-epoch")

    def test_no_match(self, tmp_path, capsys):
        assert_error(capsys, ["segment", "--pattern", tmp_path / "*.png"], "no-match")

    def test_unreadable_image(self, tmp_path, capsys):
        bad = tmp_path / "1999.png"
        bad.write_bytes(b"\x89PNG\r\n\x1a\n garbage")
        line = assert_error(capsys, ["segment", bad], "decode")
        assert "1999.png" in line

    def test_synth_needs_mode(self, tmp_path, capsys):
        assert_error(capsys, ["synth", "--out", tmp_path], "parameter")


class TestCalibrate:
    def test_grid_outputs(self, tmp_path, capsys):
        run(capsys, "synth", "--fraction", 0.25, "--size", "20x20", "--name", "scene.png", "--out", tmp_path)
        code, out, _ = run(capsys, "calibrate", tmp_path / "scene.png", "--range", "55,75,30:205,255,255",
                           "--range", "0,0,0:255,255,255", "--out", tmp_path / "cal")
        assert code == 0
        rows = [line.split("\t") for line in out.strip().splitlines()[1:]]
        assert [r[2] for r in rows] == ["0.250000", "1.000000"]
        assert (tmp_path / "cal" / "scene.mask.0.png").exists() and (tmp_path / "cal" / "scene.mask.1.png").exists()
        assert (tmp_path / "cal" / "scene.calibration.txt").read_text() == out

    def test_bad_range(self, tmp_path, capsys):
        run(capsys, "synth", "--fraction", 0.25, "--size", "4x4", "--name", "s.png", "--out", tmp_path)
        assert_error(capsys, ["calibrate", tmp_path / "s.png", "--range", "1,2:3,4"], "parameter")


class TestChangepoint:
    def test_kink_detected(self, kinked_csv, tmp_path, capsys):
        code, out, _ = run(capsys, "changepoint", kinked_csv, "--out", tmp_path)
        doc = json.loads((tmp_path / "changepoint.json").read_text())
        assert code == 0 and doc["rejected"] and abs(doc["tau_hat"] - 12) <= 1
        assert "changepoint detected" in out

    def test_manual_tau(self, kinked_csv, tmp_path, capsys):
        code, _, _ = run(capsys, "changepoint", kinked_csv, "--tau", 7, "--out", tmp_path)
        doc = json.loads((tmp_path / "changepoint.json").read_text())
        assert code == 0 and doc["tau_hat"] == 7

    def test_constant_series(self, tmp_path, capsys):
        path = tmp_path / "flat.csv"
        write_series_csv(CoverageSeries.from_values(np.full(10, 0.4)), path)
        assert_error(capsys, ["changepoint", path, "--statistic", "mean_and_variance"], "degenerate")

    def test_csv_error_has_line_number(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("epoch,coverage\n1,0.5\n2,oops\n")
        line = assert_error(capsys, ["changepoint", path], "format")
        assert "bad.csv" in line and "3" in line

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["changepoint", "x.csv", "--statistic", "median"])
        assert exc.value.code == 2
        assert capsys.readouterr().err.startswith("error: usage: ")


class TestImpactAndReport:
    def impact(self, capsys, series_csv, out, *extra):
        return run(capsys, "impact", series_csv, "--n-iter", 600, "--burn-in", 200, "--seed", 5, "--out", out, *extra)

    def test_injected_drop_is_negative(self, tmp_path, capsys):
        y = 0.7 + np.random.default_rng(0).normal(0, 0.003, 30)
        y[20:] -= 0.1
        write_series_csv(CoverageSeries.from_values(y, 1990), tmp_path / "s.csv")
        code, _, _ = self.impact(capsys, tmp_path / "s.csv", tmp_path, "--intervention", 20, "--component", "local_level")
        doc = json.loads((tmp_path / "impact.json").read_text())
        assert code == 0 and doc["summary"]["average_effect"]["upper"] < 0

    def test_zero_effect_and_report(self, tmp_path, capsys):
        y = 0.7 + np.random.default_rng(1).normal(0, 0.01, 30)
        write_series_csv(CoverageSeries.from_values(y, 1990), tmp_path / "s.csv")
        self.impact(capsys, tmp_path / "s.csv", tmp_path / "first", "--intervention", 20)
        cf = json.loads((tmp_path / "first" / "impact.json").read_text())["post"]["counterfactual"]["mean"]
        y[20:] = cf
        write_series_csv(CoverageSeries.from_values(y, 1990), tmp_path / "zero.csv")
        code, _, _ = self.impact(capsys, tmp_path / "zero.csv", tmp_path, "--intervention", 20)
        doc = json.loads((tmp_path / "impact.json").read_text())
        avg = doc["summary"]["average_effect"]
        assert code == 0 and avg["lower"] < 0 < avg["upper"]

        code, _, _ = run(capsys, "report", tmp_path / "impact.json", tmp_path / "zero.csv", "--out", tmp_path)
        assert code == 0
        root = ET.parse(tmp_path / "report.svg").getroot()
        panels = [g for g in root.iter(f"{SVG}g") if g.get("class") == "panel"]
        assert [p.get("id") for p in panels] == ["panel-1", "panel-2", "panel-3"]
        for p in panels:
            assert sum(1 for el in p.iter(f"{SVG}line") if el.get("class") == "intervention") == 1

        p2 = panels[1]
        band = points(next(el for el in p2.iter(f"{SVG}polygon")))
        zero_y = float(next(el for el in p2.iter(f"{SVG}line") if el.get("class") == "zero").get("y1"))
        h = len(band) // 2
        upper, lower = band[:h], band[h:][::-1]
        assert h == 10
        assert all(u[1] <= zero_y <= l[1] for u, l in zip(upper, lower))

        rule_x = float(next(el for el in p2.iter(f"{SVG}line") if el.get("class") == "intervention").get("x1"))
        for p in panels[1:]:
            for poly in p.iter(f"{SVG}polygon"):
                assert min(x for x, _ in points(poly)) > rule_x

    def test_changepoint_json_input(self, kinked_csv, tmp_path, capsys):
        run(capsys, "changepoint", kinked_csv, "--out", tmp_path)
        code, _, _ = self.impact(capsys, kinked_csv, tmp_path, "--changepoint", tmp_path / "changepoint.json")
        doc = json.loads((tmp_path / "impact.json").read_text())
        cpt = json.loads((tmp_path / "changepoint.json").read_text())
        assert code == 0 and doc["intervention_index"] == cpt["tau_hat"]

    def test_intervention_too_early(self, kinked_csv, tmp_path, capsys):
        assert_error(capsys, ["impact", kinked_csv, "--intervention", 2, "--out", tmp_path], "parameter")

    def test_report_mismatch(self, kinked_csv, tmp_path, capsys):
        self.impact(capsys, kinked_csv, tmp_path, "--intervention", 10)
        other = tmp_path / "other.csv"
        write_series_csv(CoverageSeries.from_values(np.linspace(0.2, 0.8, 30), 1700), other)
        assert_error(capsys, ["report", tmp_path / "impact.json", other], "mismatch")


class TestConfig:
    def test_config_and_set_override(self, kinked_csv, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[changepoint]\nstatistic = mean\nthreshold = 1e9\n\n[output]\ndir = %s\n" % (tmp_path / "o"))
        run(capsys, "changepoint", kinked_csv, "--config", cfg)
        doc = json.loads((tmp_path / "o" / "changepoint.json").read_text())
        assert doc["threshold"] == 1e9 and not doc["rejected"]
        run(capsys, "changepoint", kinked_csv, "--config", cfg, "--set", "changepoint.threshold=sic")
        doc = json.loads((tmp_path / "o" / "changepoint.json").read_text())
        assert doc["threshold"] == pytest.approx(2 * np.log(30))

    def test_flag_beats_config(self, kinked_csv, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[changepoint]\nthreshold = 1e9\n")
        run(capsys, "changepoint", kinked_csv, "--config", cfg, "--threshold", "5", "--out", tmp_path)
        assert json.loads((tmp_path / "changepoint.json").read_text())["threshold"] == 5.0

    def test_unknown_key(self, kinked_csv, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[changepoint]\ncolour = blue\n")
        assert_error(capsys, ["changepoint", kinked_csv, "--config", cfg], "format")

    def test_malformed_set(self, kinked_csv, capsys):
        assert_error(capsys, ["changepoint", kinked_csv, "--set", "novalue"], "format")


def test_golden_pipeline(tmp_path, capsys):
    steps = [
        ("synth", "--images", "--n", 35, "--change-at", 11, "--pre-slope", -0.003, "--post-slope", -0.03,
         "--level0", 0.8, "--noise", 0.002, "--start-epoch", 1984, "--size", "128x128", "--seed", 1,
         "--out", tmp_path / "imgs"),
        ("segment", "--pattern", tmp_path / "imgs" / "*.png", "--out", tmp_path),
        ("changepoint", tmp_path / "series.csv", "--out", tmp_path),
        ("impact", tmp_path / "series.csv", "--changepoint", tmp_path / "changepoint.json", "--n-iter", 800,
         "--burn-in", 200, "--seed", 1, "--out", tmp_path),
        ("report", tmp_path / "impact.json", tmp_path / "series.csv", "--out", tmp_path),
    ]
    for argv in steps:
        code, _, err = run(capsys, *argv)
        assert code == 0, err
    assert json.loads((tmp_path / "changepoint.json").read_text())["tau_hat"] == 11
    ET.parse(tmp_path / "report.svg")
