import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import run
from batchnorm import BnParams
from config import Config, TrainConfig
from helpers.errors import ConfigError
from nn import Affine, Mode, NetworkSpec, Sigmoid, batch_normalize_network, build_mlp, load_checkpoint
from tasks.compare import stability
from tasks.gradcheck import run_checks
from tasks.train import SeedStreams, eval_steps, load_data, probe_inputs, probe_percentiles, train
from tests.conftest import train_args

METRICS_HEADER = "step,test_accuracy,train_loss,p15,p50,p85"


def test_config_defaults_and_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("BN_DATA_DIR", str(tmp_path / "from-env"))
    config = Config(["train", "--quiet"])
    assert config.command == "train"
    assert config.train.steps == 50000 and config.train.batch_size == 60
    assert config.train.hidden == (100, 100, 100) and config.train.bn
    assert (config.train.probe_layer, config.train.probe_unit) == (2, 0)
    assert config.train.data_dir == str(tmp_path / "from-env")

    settings = tmp_path / "run.cfg"
    settings.write_text("# experiment\nsteps = 1200\nbatch_size=32\nbn=off\nprobe=0:7\n\n")
    config = Config(["train", "--config", str(settings), "--steps", "300", "--data-dir", "elsewhere", "--quiet"])
    assert config.train.steps == 300
    assert config.train.batch_size == 32 and not config.train.bn
    assert config.train.probe == (0, 7)
    assert config.train.data_dir == "elsewhere"


@pytest.mark.parametrize("argv", [
    ["train", "--bn", "on", "--batch-size", "1"],
    ["train", "--steps", "0"],
    ["train", "--probe", "3:0"],
    ["train", "--probe", "0:100"],
    ["train", "--threshold", "1.5"],
])
def test_config_violations(argv):
    with pytest.raises(ConfigError):
        Config(argv + ["--quiet"])


def test_unknown_config_file_key(tmp_path):
    settings = tmp_path / "run.cfg"
    settings.write_text("learning_rate=0.1\n")
    with pytest.raises(ConfigError):
        Config(["train", "--config", str(settings), "--quiet"])


@pytest.mark.parametrize("flag, expected", [
    ("3x100", (100, 100, 100)),
    ("100,100,100", (100, 100, 100)),
    ("2x100,50", (100, 100, 50)),
    ("64", (64,)),
])
def test_hidden_layout(flag, expected):
    assert Config(["train", "--hidden", flag, "--quiet"]).train.hidden == expected


def test_config_file_comments_and_quotes(tmp_path):
    settings = tmp_path / "run.cfg"
    settings.write_text('# layout\nhidden="3x20"\nbatch-size = 16  # smaller batches\n\nout=\'runs/x.csv\'\n')
    config = Config(["train", "--config", str(settings), "--quiet"]).train
    assert config.hidden == (20, 20, 20)
    assert config.batch_size == 16
    assert config.out == "runs/x.csv"


def test_config_file_entry_without_value(tmp_path):
    settings = tmp_path / "run.cfg"
    settings.write_text("steps\n")
    with pytest.raises(ConfigError):
        Config(["train", "--config", str(settings), "--quiet"])


def test_config_errors_exit_with_2():
    assert run.main(["train", "--steps", "0", "--quiet"]) == 2


def test_sidecar_text_round_trips(tmp_path):
    config = replace(TrainConfig(), steps=77, hidden=(8, 4), bn=False, out=str(tmp_path / "m.csv"))
    settings = tmp_path / "echo.cfg"
    settings.write_text(config.as_text())
    parsed = Config(["train", "--config", str(settings), "--quiet"]).train
    assert parsed.steps == 77 and parsed.hidden == (8, 4) and not parsed.bn
    assert config.sidecar_path == tmp_path / "m.config.txt"


def test_eval_steps():
    assert eval_steps(30, 10) == [10, 20, 30]
    assert eval_steps(25, 10) == [10, 20, 25]
    assert eval_steps(5, 10) == [5]


def test_train_writes_metrics_and_checkpoints(small_config):
    assert run.main(["train"] + train_args(small_config)) == 0

    metrics_path = Path(small_config.out)
    assert metrics_path.read_text().splitlines()[0] == METRICS_HEADER
    metrics = pd.read_csv(metrics_path)
    assert metrics["step"].tolist() == [10, 20, 30]
    assert metrics["test_accuracy"].between(0.0, 1.0).all()
    assert (metrics["p15"] <= metrics["p50"]).all() and (metrics["p50"] <= metrics["p85"]).all()

    sidecar = small_config.sidecar_path.read_text()
    assert "steps=30" in sidecar and "bn=on" in sidecar
    train_net, meta = load_checkpoint(small_config.checkpoint_path)
    assert meta["step"] == 30 and train_net.mode is Mode.TRAIN
    inference_net, _ = load_checkpoint(small_config.inference_path)
    assert inference_net.mode is Mode.INFERENCE
    assert all(layer.stats.batches_seen == 5 for _, layer in inference_net.batchnorm_layers())


def test_same_config_and_seed_give_identical_bytes(small_config, tmp_path):
    first = replace(small_config, out=str(tmp_path / "a" / "metrics.csv"))
    second = replace(small_config, out=str(tmp_path / "b" / "metrics.csv"))
    assert run.main(["train"] + train_args(first)) == 0
    assert run.main(["train"] + train_args(second)) == 0
    assert Path(first.out).read_bytes() == Path(second.out).read_bytes()

    third = replace(small_config, out=str(tmp_path / "c" / "metrics.csv"))
    assert run.main(["train", "--seed", "1"] + train_args(third)) == 0
    assert Path(third.out).read_bytes() != Path(first.out).read_bytes()


@pytest.mark.parametrize("eval_stats", ["ema", "population"])
def test_training_learns_the_synthetic_classes(small_config, eval_stats):
    config = replace(small_config, steps=300, eval_every=100, eval_stats=eval_stats)
    train_set, test_set = load_data(config)
    result = train(config, train_set, test_set, progress=False)
    accuracies = result.metrics()["test_accuracy"]
    assert accuracies.iloc[-1] > 0.5
    assert result.inference_network is not None


def test_baseline_arm_has_no_inference_network(small_config):
    config = replace(small_config, bn=False)
    train_set, test_set = load_data(config)
    result = train(config, train_set, test_set, progress=False)
    assert result.inference_network is None
    assert not result.network.batchnorm_layers()


def test_compare_writes_both_arms(small_config):
    assert run.main(["compare"] + train_args(small_config)) == 0
    for arm in ("baseline", "bn"):
        metrics = pd.read_csv(small_config.arm_path(arm))
        assert metrics["step"].tolist() == [10, 20, 30]


def test_stability_uses_the_last_half():
    metrics = pd.DataFrame({"p50": [10.0, -10.0, 1.0, 3.0]})
    assert stability(metrics) == pytest.approx(1.0)


def test_percentiles_over_snapshots(small_config):
    assert run.main(["train", "--snapshots", "on"] + train_args(small_config)) == 0
    snapshots = small_config.snapshot_dir
    assert sorted(p.name for p in snapshots.iterdir()) == [
        "step_0000010.npz", "step_0000020.npz", "step_0000030.npz"]

    assert run.main(["percentiles", str(snapshots)] + train_args(small_config)) == 0
    table = pd.read_csv(small_config.percentiles_path)
    assert list(table.columns) == ["step", "p15", "p50", "p85"]
    assert table["step"].tolist() == [10, 20, 30]
    assert (table["p15"] <= table["p50"]).all() and (table["p50"] <= table["p85"]).all()

    # the last snapshot holds the weights the final metrics row was measured with
    metrics = pd.read_csv(small_config.out)
    np.testing.assert_allclose(table["p50"].iloc[-1], metrics["p50"].iloc[-1], rtol=1e-8)


def test_percentiles_reject_a_probe_outside_the_network(small_config, tmp_path):
    assert run.main(["train"] + train_args(small_config)) == 0
    argv = ["percentiles", str(small_config.checkpoint_path)] + train_args(small_config)
    assert run.main(argv + ["--hidden", "6,5,4", "--probe", "2:0"]) == 2
    assert run.main(["percentiles", str(tmp_path / "missing")] + train_args(small_config)) == 3


def test_constant_network_has_degenerate_percentiles(rng):
    net = NetworkSpec([Affine(np.zeros((4, 3))), Sigmoid(), Affine(np.zeros((3, 2)))], num_classes=2)
    p15, p50, p85 = probe_percentiles(probe_inputs(net, rng.normal(size=(50, 4)), 0, 1, 10))
    assert p15 == p50 == p85 == 0.0


def test_batchnorm_probe_median_sits_at_beta(rng):
    net = batch_normalize_network(build_mlp(8, (4,), 2, "sigmoid", 0.5, rng))
    _, bn = net.batchnorm_layers()[0]
    bn.params = BnParams(np.full(4, 1.5), np.array([0.7, -0.3, 0.0, 2.0]))
    x = rng.normal(size=(2000, 8))
    values = probe_inputs(net, x, 0, 0, chunk=1000)
    assert len(values) == 2000
    _, p50, _ = probe_percentiles(values)
    assert abs(p50 - 0.7) < 0.1


def test_probe_set_is_fixed_by_the_seed(mnist_dir):
    from data import load_split
    from tasks.train import probe_set

    test = load_split(mnist_dir, "test", image_shape=(8, 8))
    a = probe_set(test, 20, SeedStreams.from_seed(3).probe)
    b = probe_set(test, 20, SeedStreams.from_seed(3).probe)
    assert a.images == b.images and len(a) == 20
    assert len(probe_set(test, 1000, SeedStreams.from_seed(3).probe)) == len(test)


def test_fold_command(small_config, tmp_path):
    assert run.main(["train"] + train_args(small_config)) == 0
    folded_path = tmp_path / "folded.npz"
    argv = ["fold", str(small_config.inference_path), str(folded_path)] + train_args(small_config)
    assert run.main(argv) == 0
    folded, meta = load_checkpoint(folded_path)
    assert not folded.batchnorm_layers() and meta["step"] == 30

    twice = tmp_path / "twice.npz"
    assert run.main(["fold", str(folded_path), str(twice)] + train_args(small_config)) == 0
    again, _ = load_checkpoint(twice)
    for (_, _, a), (_, _, b) in zip(folded.parameters(), again.parameters()):
        assert a == b

    assert run.main(["fold", str(small_config.checkpoint_path), str(tmp_path / "x.npz")]
                    + train_args(small_config)) == 2


def test_fold_of_a_baseline_checkpoint_keeps_it_unchanged(small_config, tmp_path):
    baseline = replace(small_config, bn=False)
    assert run.main(["train", "--bn", "off"] + train_args(baseline)) == 0
    assert not baseline.inference_path.exists()
    folded_path = tmp_path / "folded.npz"
    argv = ["fold", str(baseline.checkpoint_path), str(folded_path)] + train_args(baseline)
    assert run.main(argv) == 0
    original, _ = load_checkpoint(baseline.checkpoint_path)
    folded, meta = load_checkpoint(folded_path)
    assert meta["step"] == 30 and folded.mode is Mode.INFERENCE
    for (_, _, a), (_, _, b) in zip(original.parameters(), folded.parameters()):
        assert a == b


def test_fold_without_test_data_uses_gaussian_inputs(small_config, tmp_path):
    assert run.main(["train"] + train_args(small_config)) == 0
    argv = ["fold", str(small_config.inference_path), str(tmp_path / "folded.npz")] + train_args(small_config)
    assert run.main(argv + ["--data-dir", str(tmp_path / "nowhere")]) == 0


def test_eval_command(small_config):
    assert run.main(["train"] + train_args(small_config)) == 0
    assert run.main(["eval", str(small_config.inference_path)] + train_args(small_config)) == 0
    assert run.main(["eval", str(small_config.checkpoint_path)] + train_args(small_config)) == 0


def test_missing_data_exits_with_3(small_config, tmp_path):
    argv = ["train"] + train_args(small_config) + ["--data-dir", str(tmp_path / "nowhere")]
    assert run.main(argv) == 3


def test_wrong_image_size_exits_with_3(small_config):
    assert run.main(["train"] + train_args(small_config) + ["--image-size", "28"]) == 3


def test_gradcheck_passes_and_flags_a_corrupted_gradient():
    results = run_checks(seed=0, trials=5)
    assert all(r.passed for r in results), [(r.op, r.max_rel_error) for r in results]
    assert {r.op for r in results} >= {"bn_backward", "bn_conv_backward", "affine", "sigmoid", "relu",
                                       "softmax_cross_entropy", "network"}

    corrupted = run_checks(seed=0, trials=5, corrupt="bn_backward")
    assert [r.op for r in corrupted if not r.passed] == ["bn_backward"]
    assert run.main(["gradcheck", "--trials", "3", "--corrupt", "affine", "--quiet"]) == 4
    assert run.main(["gradcheck", "--trials", "3", "--quiet"]) == 0


@pytest.mark.parametrize("corrupt, op", [
    ("bn_backward:dgamma", "bn_backward"),
    ("bn_backward:dbeta", "bn_backward"),
    ("bn_conv_backward:dgamma", "bn_conv_backward"),
    ("bn_conv_backward:dbeta", "bn_conv_backward"),
    ("affine:dW", "affine"),
    ("affine:db", "affine"),
])
def test_gradcheck_covers_parameter_gradients(corrupt, op):
    results = run_checks(seed=0, trials=3, corrupt=corrupt)
    assert [r.op for r in results if not r.passed] == [op]


MNIST_DIR = os.getenv("BN_DATA_DIR", "mnist")


@pytest.mark.slow
@pytest.mark.skipif(not Path(MNIST_DIR, "train-images-idx3-ubyte.gz").exists()
                    and not Path(MNIST_DIR, "train-images-idx3-ubyte").exists(),
                    reason="MNIST files not available")
def test_batchnorm_beats_the_baseline_on_mnist(tmp_path):
    base = replace(TrainConfig(), steps=10000, eval_every=500, data_dir=MNIST_DIR, freeze_batches=100,
                   out=str(tmp_path / "metrics.csv"))
    train_set, test_set = load_data(base)
    results = {bn: train(replace(base, bn=bn), train_set, test_set, progress=False) for bn in (False, True)}
    metrics = {bn: result.metrics() for bn, result in results.items()}
    assert len(metrics[True]) == 20
    assert metrics[True]["test_accuracy"].iloc[-1] > metrics[False]["test_accuracy"].iloc[-1]
    assert stability(metrics[True]) < stability(metrics[False])
