"""Seed scan of the shipped pipeline at the acceptance configuration (disposable)."""
import sys
import numpy as np
from rfdae.data import prepare_features
from rfdae.model import DaeModel, ModelConfig
from rfdae.numeric import Rng
from rfdae.synth import make_synthetic_dataset
from rfdae.train import TrainConfig, train, split_indices, predict_batched

out = open("/root/pkg/.seed_scan.log", "a")

def run(data_seed, train_seed):
    ds = make_synthetic_dataset(["bpsk", "qpsk", "pam4", "qam16"],
                                [10., 12., 14., 16., 18.],
                                per_class=500, n=128, seed=data_seed)
    x = prepare_features(ds, "amp-phase")
    labels, snrs = ds.labels_array(), ds.snrs_array()
    cfg = TrainConfig(epochs=30, batch_size=128, seed=train_seed)
    model = DaeModel.init(ModelConfig(input_features=2, seq_len=128, num_classes=4),
                          Rng(train_seed))
    splits = split_indices(labels, snrs, cfg.split,
                           Rng(train_seed).substream("shuffling").substream("split"))
    model, log = train(model, x, labels, snrs, cfg, Rng(train_seed), splits=splits)
    te = splits[2]
    acc = float(np.mean(predict_batched(model, x[te]) == labels[te]))
    best_val = max(r.val_acc for r in log.records)
    out.write(f"data={data_seed} train={train_seed}: test_acc={acc:.4f} "
              f"best_val={best_val:.4f} best_ep={log.best_epoch}\n")
    out.flush()

for pair in [(2024, 7), (1, 1), (42, 3), (7, 11)]:
    run(*pair)
out.close()
