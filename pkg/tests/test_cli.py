"""End-to-end runs of every subcommand against a small configuration."""

import pytest

from resonet.cli import main
from resonet.dataset import load_manifest

FAST_CONF = """
corpus.kind = synthetic
corpus.synth_seed = 1001
filter.kind = spectro_exp
filter.alpha = 2.0
node.kind = stno
node.n_theta = 16
eval.train_subsets = 9
eval.workers = 4
sweep.alphas = 0.0,2.0
strat.test_snrs = inf,10
strat.test_noise_types = synthetic-white
"""


@pytest.fixture()
def conf(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(FAST_CONF + f"output.dir = {tmp_path / 'out'}\n")
    return path


def test_synth_corpus_writes_manifest(conf, tmp_path, capsys):
    assert main(["synth-corpus", "--config", str(conf)]) == 0
    manifest = load_manifest(tmp_path / "out" / "manifest.csv")
    assert len(manifest) == 500
    assert "500 clips" in capsys.readouterr().out


def test_featurize_writes_and_reuses_cache(conf, tmp_path, capsys):
    assert main(["featurize", "--config", str(conf)]) == 0
    out = capsys.readouterr().out
    assert "500 written" in out
    cache = list((tmp_path / "out" / "cache").rglob("*.rnbf"))
    assert len(cache) == 500
    assert main(["featurize", "--config", str(conf)]) == 0
    assert "500 already current" in capsys.readouterr().out


def test_bench_writes_reports(conf, tmp_path, capsys):
    assert main(["bench", "--config", str(conf)]) == 0
    out_dir = tmp_path / "out"
    for name in ("report_baseline.csv", "report_total.csv", "summary.md"):
        assert (out_dir / name).exists(), name
    header = (out_dir / "report_baseline.csv").read_text().splitlines()[0]
    assert header.startswith("# config ")
    models = list((out_dir / "models").glob("fold_*.rnbm"))
    assert len(models) == 10
    text = capsys.readouterr().out
    assert "gain" in text


def test_bench_is_deterministic_across_runs(conf, tmp_path):
    assert main(["bench", "--config", str(conf), "--out", str(tmp_path / "a")]) == 0
    assert main(["bench", "--config", str(conf), "--out", str(tmp_path / "b")]) == 0
    for name in ("report_baseline.csv", "report_total.csv", "summary.md"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name


def test_seed_override_changes_the_mask(conf, tmp_path):
    assert main(["bench", "--config", str(conf), "--out", str(tmp_path / "a"),
                 "--seed-override", "mask_seed=1"]) == 0
    assert main(["bench", "--config", str(conf), "--out", str(tmp_path / "b"),
                 "--seed-override", "mask_seed=99"]) == 0
    a = (tmp_path / "a" / "report_total.csv").read_text()
    b = (tmp_path / "b" / "report_total.csv").read_text()
    assert a != b
    # the baseline route has no mask, so it is untouched
    a0 = (tmp_path / "a" / "report_baseline.csv").read_text()
    b0 = (tmp_path / "b" / "report_baseline.csv").read_text()
    assert a0.splitlines()[2:] == b0.splitlines()[2:]  # same rows, new hash


def test_sweep_writes_csv(conf, tmp_path, capsys):
    assert main(["sweep", "--config", str(conf)]) == 0
    text = (tmp_path / "out" / "sweep.csv").read_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert lines[0] == "alpha,wsr_mean,wsr_std"
    assert len(lines) == 3
    assert lines[1].startswith("0.0,")
    assert lines[2].startswith("2.0,")


def test_sweep_parity_diagnostic_at_huge_alpha(conf, tmp_path):
    assert main(["sweep", "--config", str(conf), "--alphas", "1,1000"]) == 0
    parity = (tmp_path / "out" / "parity.csv").read_text().splitlines()
    header = [ln for ln in parity if not ln.startswith("#")][0]
    assert header == "clip_id,digit,n_plus_one,n_minus_one,max_other"
    row = [ln for ln in parity if not ln.startswith("#")][1].split(",")
    # the normalized extremum survives the huge exponent exactly
    assert int(row[2]) + int(row[3]) >= 1
    assert 0.0 <= float(row[4]) < 1.0


def test_export_features_row_count(conf, tmp_path, capsys):
    assert main(["export-features", "--config", str(conf)]) == 0
    text = (tmp_path / "out" / "features.csv").read_text().splitlines()
    data = [ln for ln in text if not ln.startswith("#")]
    n_frames = len(data) - 1  # minus the column header
    assert n_frames % 500 == 0
    out = capsys.readouterr().out
    assert f"wrote {n_frames} feature rows" in out


def test_stratified_writes_grid(conf, tmp_path):
    assert main(["stratified", "--config", str(conf)]) == 0
    text = (tmp_path / "out" / "conditions.md").read_text()
    assert "| SNR (dB) |" in text
    assert "clean" in text


def test_missing_config_gives_exit_code_2(tmp_path, capsys):
    code = main(["bench", "--config", str(tmp_path / "none.conf")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_bad_manifest_gives_exit_code_3(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    manifest = tmp_path / "m.csv"
    manifest.write_text("clip_id,path,digit,speaker,utterance,noise_type,snr_db\n"
                        "a,synth:12:0:0:random,2,s0,0,clean,inf\n")
    conf.write_text(f"corpus.kind = manifest\ncorpus.manifest = {manifest}\n"
                    f"output.dir = {tmp_path / 'out'}\n")
    code = main(["bench", "--config", str(conf)])
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_cache_dir_env_override(conf, tmp_path, monkeypatch):
    cache_root = tmp_path / "elsewhere"
    monkeypatch.setenv("RESONET_CACHE_DIR", str(cache_root))
    assert main(["featurize", "--config", str(conf)]) == 0
    assert len(list(cache_root.rglob("*.rnbf"))) == 500
