"""Helpers for running batches of moons experiments and summarizing them."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import moons_domains
from .trainer import TrainConfig, TrainLog, train


@dataclass(frozen=True)
class MoonsJob:
    mode: str
    seed: int
    imbalanced_keep: int | None = None
    noise: float = 0.1
    rotation_degrees: float = 30.0
    n: int = 300
    overrides: tuple = ()  # sorted (key, value) pairs applied to TrainConfig

    def config(self) -> TrainConfig:
        return TrainConfig(mode=self.mode, seed=self.seed, **dict(self.overrides))


@dataclass
class RunResult:
    job: MoonsJob
    final_accuracy: float
    best_accuracy: float
    minority_recall: float
    source_accuracy: float
    first_mmd: float
    final_mmd: float
    final_a_distance: float
    initial_classifier_norm: float
    max_classifier_norm: float
    wall_time: float
    accuracy_curve: list = field(default_factory=list)


def summarize(job: MoonsJob, log: TrainLog, wall: float) -> RunResult:
    final = log.final
    return RunResult(
        job=job,
        final_accuracy=final.accuracy,
        best_accuracy=log.best_accuracy,
        minority_recall=final.per_class_recall[0],
        source_accuracy=final.extras["source_accuracy"],
        first_mmd=log.epochs[0].mmd,
        final_mmd=final.mmd,
        final_a_distance=final.a_distance,
        initial_classifier_norm=log.initial_classifier_norm,
        max_classifier_norm=max(r.extras["classifier_norm"] for r in log.epochs),
        wall_time=wall,
        accuracy_curve=[r.accuracy for r in log.epochs],
    )


def run_job(job: MoonsJob) -> RunResult:
    source, target = moons_domains(job.n, job.noise, job.rotation_degrees, job.seed, job.imbalanced_keep)
    t0 = time.perf_counter()
    _, log = train(job.config(), source, target)
    return summarize(job, log, time.perf_counter() - t0)


def thread_cap(default: int | None = None) -> int:
    """Worker count from DALN_THREADS, falling back to the CPU count."""
    raw = os.environ.get("DALN_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"DALN_THREADS must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"DALN_THREADS must be a positive integer, got {raw!r}")
        return n
    return default or os.cpu_count() or 1


def run_many(jobs, workers: int | None = None, fn=run_job) -> list:
    """Run independent jobs, in worker processes when more than one is allowed.

    Results come back in job order regardless of completion order.
    """
    jobs = list(jobs)
    workers = min(workers or thread_cap(), len(jobs)) if jobs else 1
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def mean(results, attr: str) -> float:
    return float(np.mean([getattr(r, attr) for r in results]))
