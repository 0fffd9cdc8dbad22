"""Seeded trial fan-out and binomial confidence intervals.

Trial ``i`` of a run with master seed ``s`` draws from
``numpy.random.default_rng(SeedSequence(s, spawn_key=(i,)))``.  Streams are
therefore independent across trials and reproducible in any execution order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, TypeVar

import numpy as np
from scipy import stats

T = TypeVar("T")

THREADS_ENV = "STRUCTCODES_THREADS"


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_trials(fn: Callable[[np.random.Generator], T], seed: int, trials: int, workers: int | None = None) -> list[T]:
    """Run ``fn`` once per trial index; results come back sorted by trial index."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or trials <= 1:
        return [fn(trial_rng(seed, i)) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: fn(trial_rng(seed, i)), range(trials)))


@dataclass(frozen=True)
class ErrorRate:
    errors: int
    trials: int
    ci_low: float
    ci_high: float

    @property
    def rate(self) -> float:
        return self.errors / self.trials if self.trials else float("nan")


def binomial_ci(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Two-sided Clopper-Pearson interval."""
    if trials == 0:
        return 0.0, 1.0
    a = (1.0 - level) / 2.0
    lo = 0.0 if errors == 0 else float(stats.beta.ppf(a, errors, trials - errors + 1))
    hi = 1.0 if errors == trials else float(stats.beta.ppf(1 - a, errors + 1, trials - errors))
    return lo, hi


def error_rate(flags, level: float = 0.95) -> ErrorRate:
    flags = [bool(f) for f in flags]
    e, t = sum(flags), len(flags)
    lo, hi = binomial_ci(e, t, level)
    return ErrorRate(e, t, lo, hi)
