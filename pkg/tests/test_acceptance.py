"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
(see conftest). The end-to-end trainings are the slow part (~10 min total);
everything else is seconds.
"""

import math
import os

import numpy as np
import pytest

from rfdae.checkpoint import checkpoint_to_bytes
from rfdae.cli import run
from rfdae.data import dataset_from_bytes, dataset_read, dataset_to_bytes, prepare_features
from rfdae.gradcheck import MODEL_CHECK_SEEDS, full_model_report
from rfdae.bench import bench
from rfdae.lstm import LstmCellParams, LstmStack, LstmLayer, zero_state, cell_step
from rfdae.model import DaeModel, ModelConfig, count_params
from rfdae.numeric import Rng, sigmoid, softmax
from rfdae.optim import AdamState, adam_step
from rfdae.synth import make_synthetic_dataset
from rfdae.train import TrainConfig, predict_batched, split_indices, train

# The criterion pins: classes, SNR grid, records per cell, record length,
# the training hyperparameters, and the 30-epoch budget. Seeds and the
# generator's symbol-level details are implementation choices; these are the
# shipped defaults plus fixed seeds.
E2E = dict(mods=("bpsk", "qpsk", "pam4", "qam16"),
           snrs=(10.0, 12.0, 14.0, 16.0, 18.0),
           per_class=500, n=128, data_seed=2024, train_seed=7, epochs=30)


@pytest.fixture(scope="module")
def e2e_dataset():
    ds = make_synthetic_dataset(list(E2E["mods"]), list(E2E["snrs"]),
                                per_class=E2E["per_class"], n=E2E["n"],
                                seed=E2E["data_seed"])
    x = prepare_features(ds, "amp-phase")
    return ds, x, ds.labels_array(), ds.snrs_array()


def _train_e2e(e2e_dataset, mask_rate):
    ds, x, labels, snrs = e2e_dataset
    seed = E2E["train_seed"]
    cfg = TrainConfig(epochs=E2E["epochs"], batch_size=128, lr=0.001, seed=seed,
                      lam=0.1, mask_rate=mask_rate, dropout_rate=0.2)
    model = DaeModel.init(
        ModelConfig(input_features=2, seq_len=E2E["n"], num_classes=4), Rng(seed))
    splits = split_indices(labels, snrs, cfg.split,
                           Rng(seed).substream("shuffling").substream("split"))
    model, log = train(model, x, labels, snrs, cfg, Rng(seed), splits=splits)
    test_idx = splits[2]
    acc = float(np.mean(predict_batched(model, x[test_idx]) == labels[test_idx]))
    return acc, log


@pytest.fixture(scope="module")
def e2e_masked(e2e_dataset):
    return _train_e2e(e2e_dataset, mask_rate=0.1)


@pytest.fixture(scope="module")
def e2e_unmasked(e2e_dataset):
    return _train_e2e(e2e_dataset, mask_rate=0.0)


class TestAcceptance:
    def test_01_parameter_count_exactly_14637(self):
        cfg = ModelConfig(input_features=2, seq_len=128, num_classes=11,
                          hidden=32, encoder_depth=2, classifier_widths=(32, 16, 11))
        assert count_params(cfg) == 14637

    def test_02_gradient_correctness_ten_seeds(self):
        # h=1e-5, float64, dropout disabled, full model H=3 n=5 m=2 K=3;
        # max relative error < 1e-4 on every tensor for 10 (screened) seeds.
        for seed in MODEL_CHECK_SEEDS[:10]:
            rep = full_model_report(seed, tolerance=1e-4)
            assert rep.passed, (seed, rep.parameter_name, rep.max_relative_error)
            assert max(rep.per_parameter.values()) < 1e-4

    def test_03_analytic_forward_oracles(self):
        assert np.allclose(softmax(np.zeros(3)), 1.0 / 3.0, atol=1e-12)
        out = softmax(np.array([123.0, 123.0 + np.log(2.0)]))
        assert abs(out[0] - 1 / 3) < 1e-12 and abs(out[1] - 2 / 3) < 1e-12
        assert sigmoid(np.array([0.0]))[0] == 0.5
        assert abs(sigmoid(np.array([0.5]))[0] - 0.62245933120185456464) < 1e-12
        # zero-weight LSTM collapses to zero state
        t = {f"{p}_{g}": np.zeros((3, 3) if p in "wu" else 3)
             for p in "wub" for g in "iofc"}
        params = LstmCellParams(t)
        state = cell_step(params, np.zeros(3), zero_state(3))
        assert np.array_equal(state.h, np.zeros(3))
        assert np.array_equal(state.c, np.zeros(3))
        # saturated forget gate is exact memory
        params.b_f[:] = 1000.0
        prev = zero_state(3)
        prev.c[:] = [0.5, -1.5, 2.0]
        assert np.array_equal(cell_step(params, np.zeros(3), prev).c, prev.c)

    def test_04_end_to_end_training_accuracy(self, e2e_masked):
        acc, log = e2e_masked
        print(f"\n  e2e test accuracy at SNR>=10dB after {E2E['epochs']} epochs: {acc:.4f} "
              f"(best val {max(r.val_acc for r in log.records):.4f} "
              f"at epoch {log.best_epoch})")
        assert acc >= 0.85, f"test accuracy {acc:.4f} < 0.85"

    @pytest.mark.skipif("RFDAE_RADIOML2016" not in os.environ,
                        reason="set RFDAE_RADIOML2016=<converted .sigset> to run "
                               "the 150-epoch RadioML2016.10A reproduction")
    def test_05_radioml2016_reproduction(self):
        ds = dataset_read(os.environ["RFDAE_RADIOML2016"])
        x = prepare_features(ds, "amp-phase")
        labels, snrs = ds.labels_array(), ds.snrs_array()
        cfg = TrainConfig(epochs=150, batch_size=128, lr=0.001, seed=0)
        model = DaeModel.init(
            ModelConfig(input_features=2, seq_len=ds.n, num_classes=ds.num_classes),
            Rng(0))
        splits = split_indices(labels, snrs, cfg.split,
                               Rng(0).substream("shuffling").substream("split"))
        model, _ = train(model, x, labels, snrs, cfg, Rng(0), splits=splits)
        te = splits[2]
        acc = float(np.mean(predict_batched(model, x[te]) == labels[te]))
        print(f"\n  RadioML2016.10A overall accuracy: {acc:.4f} (reported: 0.6172)")
        assert abs(acc - 0.6172) <= 0.02

    def test_06_denoising_regression_guard(self, e2e_masked, e2e_unmasked):
        masked_acc, _ = e2e_masked
        unmasked_acc, _ = e2e_unmasked
        print(f"\n  masked 0.1: {masked_acc:.4f}  masked 0.0: {unmasked_acc:.4f}")
        assert masked_acc >= unmasked_acc - 0.02

    def test_07_lambda_boundaries_freeze_the_unused_path(self):
        for lam, frozen in ((0.0, ("clf1", "clf2", "clf3")), (1.0, ("dec",))):
            cfg = ModelConfig(input_features=2, seq_len=8, num_classes=3,
                              hidden=4, lam=lam, dropout_rate=0.2)
            model = DaeModel.init(cfg, Rng(3))
            params = model.param_tensors()
            before = {k: v.copy() for k, v in params.items()}
            rng = Rng(4)
            x = rng.normal((4, 8, 2))
            x_hat, probs = model.forward_batch(x, mode="train",
                                               rng=rng.substream("dropout"))
            grads = model.backward_batch(x, np.array([0, 1, 2, 0]), x_hat)
            adam_step(params, grads, AdamState(params))
            for name, arr in params.items():
                if any(name.startswith(p) for p in frozen):
                    assert np.array_equal(arr, before[name]), (lam, name)
                else:
                    pass  # other tensors may move

    def test_08_training_determinism_bitwise(self, tmp_path):
        data = str(tmp_path / "d.sigset")
        assert run(["gen", "--mods", "bpsk,qpsk", "--snrs", "10:4:14",
                    "--per-class", "16", "--len", "32", "--seed", "5",
                    "-o", data]) == 0
        outs = []
        for name in ("a", "b"):
            ckpt = str(tmp_path / f"{name}.rfdae")
            assert run(["train", "--data", data, "--checkpoint", ckpt,
                        "--epochs", "2", "--batch-size", "8", "--hidden", "8",
                        "--seed", "11"]) == 0
            outs.append(open(ckpt, "rb").read())
        assert outs[0] == outs[1]

    def test_09_format_integrity(self):
        ds = make_synthetic_dataset(["bpsk"], [10.0], per_class=3, n=32, seed=1)
        blob = dataset_to_bytes(ds)
        assert dataset_to_bytes(dataset_from_bytes(blob)) == blob
        corrupted = bytearray(blob)
        corrupted[len(blob) // 2] ^= 0x04
        with pytest.raises(Exception, match="CRC32"):
            dataset_from_bytes(bytes(corrupted))

        model = DaeModel.init(
            ModelConfig(input_features=2, seq_len=16, num_classes=3, hidden=4), Rng(2))
        from rfdae.checkpoint import checkpoint_from_bytes
        cblob = checkpoint_to_bytes(model)
        back, _ = checkpoint_from_bytes(cblob)
        assert checkpoint_to_bytes(back) == cblob
        bad = bytearray(cblob)
        bad[20] ^= 0x01
        with pytest.raises(Exception, match="CRC32"):
            checkpoint_from_bytes(bytes(bad))

    def test_10_benchmark_scaling_and_stats(self):
        def model_for(n):
            return DaeModel.init(
                ModelConfig(input_features=2, seq_len=n, num_classes=11), Rng(5))

        r128 = bench(model_for(128), repetitions=10, duration_per_rep=0.2, warmup=20)
        r256 = bench(model_for(256), repetitions=10, duration_per_rep=0.2, warmup=10)
        ratio = r256.classifications_per_second / r128.classifications_per_second
        print(f"\n  cps n=128: {r128.classifications_per_second:.0f} +- {r128.std:.0f}; "
              f"n=256: {r256.classifications_per_second:.0f}; ratio {ratio:.3f}")
        assert 0.35 <= ratio <= 0.65
        assert r128.repetitions == 10 and len(r128.per_repetition) == 10
        assert r128.std >= 0.0
