"""Conditioning variants on the shipped pipeline, acceptance config (disposable)."""
import numpy as np
import sys
import rfdae.train
train_mod = sys.modules['rfdae.train']
from rfdae.data import prepare_features
from rfdae.model import DaeModel, ModelConfig
from rfdae.numeric import Rng
from rfdae.synth import make_synthetic_dataset
from rfdae.train import TrainConfig, train, split_indices, predict_batched

out = open("/root/pkg/.variants.log", "a")

ds = make_synthetic_dataset(["bpsk", "qpsk", "pam4", "qam16"],
                            [10., 12., 14., 16., 18.],
                            per_class=500, n=128, seed=2024)
x = prepare_features(ds, "amp-phase")
labels, snrs = ds.labels_array(), ds.snrs_array()

orig_calibrate = train_mod.calibrate_input_kernels

def run(tag, gain=1.0, clf3_bias=None, b_o=None, train_seed=7):
    def calibrate2(model, xs):
        rms = np.sqrt(np.mean(np.asarray(xs) ** 2, axis=(0, 1)))
        rms = np.maximum(rms, 1e-6)
        m_in = model.config.input_features
        p = model.encoder.layers[0].params
        for g in "iofc":
            w = getattr(p, f"w_{g}")
            current = np.sqrt(np.mean(w * w, axis=0))
            target = gain * (1.0 / (m_in * rms)) / np.sqrt(3.0)
            w *= target / np.maximum(current, 1e-12)
        return rms
    train_mod.calibrate_input_kernels = calibrate2

    cfg = TrainConfig(epochs=30, batch_size=128, seed=train_seed)
    model = DaeModel.init(ModelConfig(input_features=2, seq_len=128, num_classes=4),
                          Rng(train_seed))
    if clf3_bias is not None:
        model.clf3.bias[:] = clf3_bias
    if b_o is not None:
        for layer in model.encoder.layers:
            layer.params.b_o[:] = b_o
    splits = split_indices(labels, snrs, cfg.split,
                           Rng(train_seed).substream("shuffling").substream("split"))
    model, log = train(model, x, labels, snrs, cfg, Rng(train_seed), splits=splits)
    te = splits[2]
    acc = float(np.mean(predict_batched(model, x[te]) == labels[te]))
    vals = [round(r.val_acc, 3) for r in log.records[::4]]
    out.write(f"{tag}: test={acc:.4f} best_val={max(r.val_acc for r in log.records):.4f} "
              f"best_ep={log.best_epoch} vals{vals}\n")
    out.flush()
    train_mod.calibrate_input_kernels = orig_calibrate

run("gain2.0       ", gain=2.0)
run("clf3b=1.0     ", clf3_bias=1.0)
run("b_o=1.5       ", b_o=1.5)
run("gain2+clf3b1  ", gain=2.0, clf3_bias=1.0)
out.close()
