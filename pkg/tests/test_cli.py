import numpy as np
import pytest

from necplus import engine, kvtext
from necplus.cli import main


def write_config(path, **overrides):
    spec = engine.ModelSpec(layers=1, hidden=4, batch_size=16, volume=30,
                            seed=0, patience=2)
    kwargs = dict(
        h=12, f=4, epsilon=1.5, gmm_components=2,
        n=spec,
        e=engine.ModelSpec(layers=1, hidden=4, batch_size=16, volume=30,
                           oversampling_os=1.0, seed=1, patience=2),
        c=engine.ModelSpec(layers=1, hidden=4, batch_size=16, volume=30,
                           oversampling_os=1.0, seed=2, patience=2),
        holdout_sections=2, val_ranges=((200, 600),),
        test_ranges=((1000, 1600),), max_epochs=2)
    kwargs.update(overrides)
    config = engine.NecConfig(**kwargs)
    kvtext.write(path, engine.config_to_pairs(config))
    return config


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Full desk-scale run: synth -> preprocess -> fit-gmm -> train."""
    root = tmp_path_factory.mktemp("pipeline")
    csv = root / "series.csv"
    data = root / "data"
    run = root / "run"
    config = root / "config"
    assert main(["synth", "--seed", "42", "--length", "2000",
                 "--spike-rate", "0.01", "--out", str(csv)]) == 0
    assert main(["preprocess", "--input", str(csv), "--out-dir", str(data),
                 "--epsilon", "1.5"]) == 0
    assert main(["fit-gmm", "--in-dir", str(data), "--components", "2",
                 "--seed", "0"]) == 0
    write_config(config)
    assert main(["train", "--config", str(config), "--data", str(data),
                 "--out", str(run)]) == 0
    return root, csv, data, run, config


class TestExitCodes:
    def test_no_arguments_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_domain_error_returns_one(self, tmp_path, capsys):
        code = main(["synth", "--spike-rate", "1.5", "--length", "100",
                     "--out", str(tmp_path / "x.csv")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestPipeline:
    def test_run_directory_contents(self, pipeline):
        run = pipeline[3]
        for name in ("config", "gmm.model", "transform.meta", "n.ckpt",
                     "e.ckpt", "c.ckpt", "train.log", "split.csv"):
            assert (run / name).exists(), name

    def test_preprocess_roundtrip_reported(self, pipeline, capsys):
        root, csv, data = pipeline[:3]
        assert main(["preprocess", "--input", str(csv),
                     "--out-dir", str(root / "data2"),
                     "--epsilon", "1.5"]) == 0
        out = capsys.readouterr().out
        assert "roundtrip max error" in out
        error = float(out.rsplit("roundtrip max error", 1)[1])
        assert error < 1e-9

    def test_predict_writes_forecast(self, pipeline, tmp_path):
        _, csv, _, run, _ = pipeline
        out = tmp_path / "forecast.csv"
        assert main(["predict", "--run-dir", str(run), "--input", str(csv),
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "step,n,e,c_prob,gate,composed,raw"
        assert len(lines) == 1 + 4
        for line in lines[1:]:
            _, n, e, c, gate, composed, raw = line.split(",")
            want = e if int(gate) else n
            assert composed == want
            assert 0.0 < float(c) < 1.0
            assert np.isfinite(float(raw))

    def test_predict_rejects_unexpected_exogenous(self, pipeline, capsys):
        _, csv, _, run, _ = pipeline
        code = main(["predict", "--run-dir", str(run), "--input", str(csv),
                     "--exog", str(csv)])
        assert code == 1
        assert "exogenous" in capsys.readouterr().err

    def test_evaluate_emits_report(self, pipeline, capsys):
        _, _, data, run, _ = pipeline
        assert main(["evaluate", "--run-dir", str(run), "--data", str(data),
                     "--split", "test", "--baseline", "--wilcoxon"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("run_id,sensor,rmse_total")
        fields = lines[1].split(",")
        assert fields[0] == "run"
        assert float(fields[2]) > 0  # rmse_total
        assert int(fields[6]) == 2 * 4  # two sections of f=4 points
        assert lines[2].startswith("persistence,")
        assert lines[3].startswith("wilcoxon,")

    def test_plotdata_aligned_columns(self, pipeline, tmp_path):
        _, _, data, run, _ = pipeline
        out = tmp_path / "plot.csv"
        assert main(["plotdata", "--run-dir", str(run), "--data", str(data),
                     "--section", "0", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "timestamp,truth,nec_plus,baseline"
        assert len(lines) == 1 + 4
        truth = [float(l.split(",")[1]) for l in lines[1:]]
        assert all(900.0 < t < 1300.0 for t in truth)

    def test_plotdata_section_out_of_range(self, pipeline, capsys):
        _, _, data, run, _ = pipeline
        assert main(["plotdata", "--run-dir", str(run), "--data", str(data),
                     "--section", "99"]) == 1

    def test_train_epsilon_mismatch(self, pipeline, tmp_path, capsys):
        _, _, data, _, _ = pipeline
        bad = tmp_path / "config"
        write_config(bad, epsilon=2.0)
        code = main(["train", "--config", str(bad), "--data", str(data),
                     "--out", str(tmp_path / "run")])
        assert code == 1
        assert "epsilon" in capsys.readouterr().err
