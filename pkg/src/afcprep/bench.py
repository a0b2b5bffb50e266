"""Benchmark harness comparing the synthesis methods across tooth counts.

Timing covers waveform computation only, never file emission, and is
the median of at least three repeats run back to back in one process.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .comb import CombSpec
from .errors import ValidationError
from .synthesis import (
    METHODS,
    SynthParams,
    select_phase_constructor,
    signal_metrics,
    synthesize,
)

__all__ = ["BenchRecord", "run_benchmark"]


@dataclass(frozen=True)
class BenchRecord:
    method: str
    n_teeth: int
    sample_count: int
    wall_time_s: float
    crest_factor: float
    rms_power_at_unit_peak: float
    timing_stable: bool

    HEADER = (
        "method",
        "n_teeth",
        "sample_count",
        "wall_time_s",
        "crest_factor",
        "rms_power_at_unit_peak",
        "timing_stable",
    )

    def row(self) -> tuple:
        return (
            self.method,
            self.n_teeth,
            self.sample_count,
            self.wall_time_s,
            self.crest_factor,
            self.rms_power_at_unit_peak,
            self.timing_stable,
        )


def run_benchmark(
    n_values,
    methods=METHODS,
    *,
    bandwidth: float = 250e6,
    finesse: float = 2.5,
    duration: float = 500e-6,
    sample_rate: float = 320e6,
    repeats: int = 3,
) -> list[BenchRecord]:
    """One record per (method, N), in the given order.

    The tooth count sets delta = bandwidth / N at fixed band and
    record length, which is how a longer programmed storage time looks
    to the synthesizer. A spread above 50% of the median across the
    repeats marks the timing as unstable rather than failing the run.
    """
    if repeats < 3:
        raise ValidationError("benchmark needs at least three repeats")
    records = []
    for method in methods:
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}")
        for n in n_values:
            comb = CombSpec(delta=bandwidth / n, bandwidth=bandwidth, finesse=finesse)
            params = SynthParams(
                comb=comb,
                duration=duration,
                sample_rate=sample_rate,
                method=method,
                phase_constructor=select_phase_constructor(n),
            )
            times = []
            sig = None
            for _ in range(repeats):
                t0 = time.perf_counter()
                sig = synthesize(params)
                times.append(time.perf_counter() - t0)
            times.sort()
            median = times[len(times) // 2]
            metrics = signal_metrics(sig, comb)
            records.append(
                BenchRecord(
                    method=method,
                    n_teeth=n,
                    sample_count=sig.n_samples,
                    wall_time_s=median,
                    crest_factor=metrics.crest_factor,
                    rms_power_at_unit_peak=metrics.rms_power,
                    timing_stable=(times[-1] - times[0]) <= 0.5 * median,
                )
            )
    return records
