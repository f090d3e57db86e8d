"""Single-example inference throughput measurement."""

from __future__ import annotations

import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .model import DaeModel
from .numeric import Rng


@dataclass
class BenchResult:
    classifications_per_second: float  # mean over repetitions
    std: float
    per_repetition: list[float] = field(default_factory=list)
    repetitions: int = 0
    batch_mode: str = "single-example"
    platform_descriptor: str = ""
    seq_len: int = 0


def _platform_descriptor() -> str:
    return (f"{platform.platform()}; {platform.processor() or platform.machine()}; "
            f"python {sys.version.split()[0]}; numpy {np.__version__}")


def bench(model: DaeModel, repetitions: int = 10, duration_per_rep: float = 1.0,
          warmup: int = 50, seed: int = 0) -> BenchResult:
    """Timed loop of eval-mode single-example forward passes.

    Each repetition runs forwards for ~duration_per_rep seconds and records
    classifications/second; the warm-up passes are excluded. Mean and sample
    std are taken over the repetitions.
    """
    if repetitions < 2:
        raise ValueError("need at least 2 repetitions for a std estimate")
    resolution = time.get_clock_info("perf_counter").resolution
    if duration_per_rep < max(1e-3, 1e4 * resolution):
        raise ValueError(
            f"duration_per_rep {duration_per_rep}s is too short for the timer "
            f"resolution ({resolution}s); use a longer duration"
        )
    cfg = model.config
    probe = Rng(seed).substream("bench").normal((cfg.seq_len, cfg.input_features))
    for _ in range(warmup):
        model.forward(probe, mode="eval")
    rates = []
    for _ in range(repetitions):
        count = 0
        t0 = time.perf_counter()
        while True:
            model.forward(probe, mode="eval")
            count += 1
            elapsed = time.perf_counter() - t0
            if elapsed >= duration_per_rep:
                break
        rates.append(count / elapsed)
    arr = np.array(rates)
    return BenchResult(
        classifications_per_second=float(arr.mean()),
        std=float(arr.std(ddof=1)),
        per_repetition=rates,
        repetitions=repetitions,
        platform_descriptor=_platform_descriptor(),
        seq_len=cfg.seq_len,
    )
