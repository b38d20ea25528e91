import csv
import io

import numpy as np
import pytest

from riseval.cli import HEADER, PRESETS, SweepSpec, UsageError, compare, main, parse_sweep, run
from riseval.config import SystemParams

P = SystemParams()


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestSweepSpec:
    def test_parse(self):
        spec = parse_sweep("snr_db=-10,0,10;metric=sinr_cov;engines=analytic,montecarlo;schemes=noma_ris,oma_ris")
        assert spec.values == (-10.0, 0.0, 10.0)
        assert spec.engines == ("analytic", "montecarlo")
        assert spec.schemes == ("noma_ris", "oma_ris")

    @pytest.mark.parametrize("text", ["snr_db=", "snr_db=1,1", "snr_db=1,3,2", "speed=1,2", "snr_db=1;metric=x",
                                      "snr_db=1;engines=", "snr_db=a,b"])
    def test_rejects(self, text):
        with pytest.raises(UsageError):
            parse_sweep(text)

    def test_decreasing_allowed(self):
        assert SweepSpec("lambda_b", (5, 3, 1), "assoc").values == (5, 3, 1)

    def test_presets(self):
        assert sorted(PRESETS) == ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"]
        assert [s.label for s in PRESETS["fig2"].series] == ["lambda_r=50", "lambda_r=200", "lambda_r=400"]
        assert dict(PRESETS["fig6"].base_overrides)["tau_t"] == pytest.approx(10 ** -0.5)


class TestRun:
    def test_header_and_rows(self):
        buf = io.StringIO()
        run(P, parse_sweep("snr_db=0,10;metric=sinr_cov;engines=analytic,montecarlo"), buf, realizations=2000)
        text = buf.getvalue()
        assert text.splitlines()[0] == ",".join(HEADER)
        rows = rows_of(text)
        assert {r["engine"] for r in rows} == {"analytic", "montecarlo"}
        assert [r["value"] for r in rows if r["engine"] == "montecarlo"] == ["0", "10"]
        est = rows[0]["estimate"]
        assert len(est.replace(".", "").replace("-", "").lstrip("0").split("e")[0]) <= 9

    def test_byte_identical(self):
        spec = parse_sweep("snr_db=0,20;metric=rate_cov;engines=montecarlo;schemes=noma_ris,noma_macro")
        a, b = io.StringIO(), io.StringIO()
        run(P, spec, a, realizations=1500, seed=3)
        run(P, spec, b, realizations=1500, seed=3)
        assert a.getvalue() == b.getvalue()

    def test_jobs_do_not_change_output(self):
        spec = SweepSpec("lambda_b", (5, 10), "assoc", ("analytic", "montecarlo"),
                         series=PRESETS["fig2"].series)
        a, b = io.StringIO(), io.StringIO()
        run(P, spec, a, realizations=1000, jobs=1)
        run(P, spec, b, realizations=1000, jobs=2)
        assert a.getvalue() == b.getvalue()

    def test_fig2_columns(self):
        spec = SweepSpec("lambda_b", (5, 10), "assoc", ("analytic",), series=PRESETS["fig2"].series[:1])
        buf = io.StringIO()
        run(P, spec, buf)
        metrics = {r["metric"] for r in rows_of(buf.getvalue())}
        assert metrics == {"assoc_L", "assoc_R", "P_L", "P_N"}

    def test_fig5_interior_maximum(self):
        buf = io.StringIO()
        run(P, PRESETS["fig5"], buf)
        rows = rows_of(buf.getvalue())
        cov = np.array([float(r["estimate"]) for r in rows if r["metric"] == "sinr_cov"])
        asym = float(next(r["estimate"] for r in rows if r["metric"] == "sinr_cov_asymptote"))
        k = int(np.argmax(cov))
        assert 0 < k < cov.size - 1
        assert cov[k] > cov[-1]
        assert abs(cov[-1] - asym) < 0.01


class TestCompare:
    def test_infeasible_both_zero(self):
        out = io.StringIO()
        p = P.replace(tau_t=10.0, tau_c=10.0)
        assert compare(p, "sinr_cov", realizations=2000, out=out)
        assert "PASS" in out.getvalue()

    def test_rate_reports_both_modes(self):
        out = io.StringIO()
        compare(P, "rate_cov", realizations=2000, out=out)
        text = out.getvalue()
        assert "rate_cov_exact" in text and "rate_cov_meanload" in text

    def test_assoc_passes(self):
        out = io.StringIO()
        assert compare(P, "assoc", realizations=50000, out=out)


class TestMain:
    def test_run_to_file(self, tmp_path):
        path = tmp_path / "out.csv"
        code = main(["run", "--sweep", "lambda_b=5,10;metric=assoc", "--out", str(path)])
        assert code == 0
        assert path.read_text().startswith(",".join(HEADER))

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "p.cfg"
        cfg.write_text("lambda_r_per_km2 = 400\n")
        path = tmp_path / "out.csv"
        assert main(["run", "--config", str(cfg), "--sweep", "snr_db=10;metric=assoc", "--out", str(path)]) == 0

    @pytest.mark.parametrize("argv", [
        ["run", "--sweep", "snr_db=;metric=assoc", "--out", "-"],
        ["run", "--preset", "fig9", "--out", "-"],
        ["bogus"],
        ["run", "--sweep", "snr_db=1", "--out", "-", "--jobs", "0"],
        ["compare", "--metric", "assoc", "--set", "gamma=1"],
    ])
    def test_usage_errors_exit_one(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            raise SystemExit(main(argv))
        assert exc.value.code == 1

    def test_missing_config_exit_one(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg"), "--sweep", "snr_db=1", "--out", "-"]) == 1

    def test_unwritable_output_exit_two(self, tmp_path):
        code = main(["run", "--sweep", "lambda_b=5;metric=assoc", "--out", str(tmp_path / "no" / "x.csv")])
        assert code == 2

    def test_compare_command(self, capsys):
        assert main(["compare", "--metric", "sinr_cov", "--set", "tau_t_db=10", "--set", "tau_c_db=10",
                     "--realizations", "1000"]) == 0
        assert "PASS" in capsys.readouterr().out
