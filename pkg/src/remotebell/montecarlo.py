"""Stochastic trial engine for the coincidence counters.

Each trial is one protocol cycle and yields one of the 16 click patterns of
:func:`remotebell.detection.outcome_distribution`.  A run may be split over
workers; worker ``w`` of stream ``s`` draws from a Philox generator keyed by
``SeedSequence(seed, spawn_key=(s, w))``, so counters are reproducible for a
given (seed, worker count) and the merged law does not depend on the split.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .detection import (
    N_PATTERNS,
    _BITS,
    AnalyzerSetting,
    DetectorBank,
    outcome_distribution,
)
from .model import EffectiveTwoPhotonState

# One trial is one 1.1 us protocol cycle; 108 kHz is the effective rate.
TRIAL_RATE_HZ = 108e3

_CHUNK = 1 << 20
_PAIRS = ((1, 3), (1, 4), (2, 3), (2, 4))
_SYMMETRIZATION_FLIPS = ((False, False), (True, False), (False, True), (True, True))


def trials_for_duration(seconds: float) -> int:
    """Number of protocol cycles in a wall-clock acquisition time."""
    if seconds < 0:
        raise ValueError("duration must be >= 0")
    return int(round(seconds * TRIAL_RATE_HZ))


@dataclass(frozen=True)
class CoincidenceCounts:
    c13: int = 0
    c14: int = 0
    c23: int = 0
    c24: int = 0
    trials: int = 0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if int(value) != value or value < 0:
                raise ValueError(f"{f.name} must be a nonnegative integer, got {value!r}")
            object.__setattr__(self, f.name, int(value))

    def __add__(self, other: CoincidenceCounts) -> CoincidenceCounts:
        return merge(self, other)

    def get(self, n: int, m: int) -> int:
        return getattr(self, f"c{n}{m}")

    @property
    def total(self) -> int:
        return self.c13 + self.c14 + self.c23 + self.c24

    def relabeled(self, swap_a: bool, swap_b: bool) -> CoincidenceCounts:
        """Counters with Site-A (1<->2) and/or Site-B (3<->4) detector roles exchanged."""
        sa = {1: 2, 2: 1} if swap_a else {1: 1, 2: 2}
        sb = {3: 4, 4: 3} if swap_b else {3: 3, 4: 4}
        values = {f"c{n}{m}": self.get(sa[n], sb[m]) for n, m in _PAIRS}
        return CoincidenceCounts(**values, trials=self.trials)

    @classmethod
    def from_patterns(cls, pattern_counts: np.ndarray) -> CoincidenceCounts:
        """Every coincident (n, m) pair in a pattern increments its counter."""
        pattern_counts = np.asarray(pattern_counts, dtype=np.int64)
        values = {}
        for n, m in _PAIRS:
            mask = (_BITS[:, n - 1] == 1) & (_BITS[:, m - 1] == 1)
            values[f"c{n}{m}"] = int(pattern_counts[mask].sum())
        return cls(**values, trials=int(pattern_counts.sum()))


def merge(a: CoincidenceCounts, b: CoincidenceCounts) -> CoincidenceCounts:
    return CoincidenceCounts(
        a.c13 + b.c13, a.c14 + b.c14, a.c23 + b.c23, a.c24 + b.c24, a.trials + b.trials
    )


def make_generator(seed: int, stream: int = 0, worker: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, worker))
    return np.random.Generator(np.random.Philox(ss))


def _split(trials: int, workers: int) -> list[int]:
    base, extra = divmod(trials, workers)
    return [base + (w < extra) for w in range(workers)]


def sample_patterns(
    probs: np.ndarray, trials: int, rng: np.random.Generator, method: str = "multinomial"
) -> np.ndarray:
    """Pattern histogram of ``trials`` independent draws from ``probs``.

    ``multinomial`` draws the histogram directly; ``per-trial`` draws every
    trial by inverse-CDF lookup.  Both have the same law.
    """
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    if method == "multinomial":
        return rng.multinomial(trials, probs).astype(np.int64)
    if method != "per-trial":
        raise ValueError(f"unknown sampling method {method!r}")
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    hist = np.zeros(N_PATTERNS, dtype=np.int64)
    remaining = trials
    while remaining > 0:
        size = min(remaining, _CHUNK)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        hist += np.bincount(idx, minlength=N_PATTERNS)
        remaining -= size
    return hist


def run_point(
    state: EffectiveTwoPhotonState,
    setting: AnalyzerSetting,
    bank: DetectorBank,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    stream: int = 0,
    conditioned: bool = False,
    method: str = "multinomial",
) -> CoincidenceCounts:
    """Simulate ``trials`` protocol cycles at one analyzer setting.

    With ``conditioned=True`` every trial carries an idler pair and no
    unpaired excitation, which is the fast mode for checking pair statistics.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if conditioned:
        state = state.conditioned()
    probs = outcome_distribution(state, setting, bank).probs

    def work(w: int, n: int) -> CoincidenceCounts:
        if n == 0:
            return CoincidenceCounts()
        hist = sample_patterns(probs, n, make_generator(seed, stream, w), method)
        return CoincidenceCounts.from_patterns(hist)

    sizes = _split(trials, workers)
    if workers == 1:
        parts = [work(0, sizes[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(workers), sizes))
    total = CoincidenceCounts()
    for part in parts:
        total = merge(total, part)
    return total


def run_symmetrized(
    state: EffectiveTwoPhotonState,
    base_setting: AnalyzerSetting,
    bank: DetectorBank,
    trials_per_run: int,
    seed: int,
    *,
    stream: int = 0,
    **kwargs,
) -> CoincidenceCounts:
    """Four runs with the idler polarizations flipped by 90 degrees.

    Run r draws from stream ``stream + r``.  The counters of each run are relabeled so that an
    effective counter always refers to the same projection of the unflipped
    setting; in expectation the product eps_n * eps_m is then replaced by
    (eps_1 + eps_2)(eps_3 + eps_4) / 4, up to the overall factor 4 from
    summing four runs.
    """
    if trials_per_run <= 0:
        raise ValueError("trials_per_run must be positive")
    total = CoincidenceCounts()
    for run, (flip_a, flip_b) in enumerate(_SYMMETRIZATION_FLIPS):
        setting = base_setting.flipped(flip_a, flip_b)
        counts = run_point(state, setting, bank, trials_per_run, seed, stream=stream + run, **kwargs)
        total = merge(total, counts.relabeled(flip_a, flip_b))
    return total


def expected_counts(
    state: EffectiveTwoPhotonState,
    setting: AnalyzerSetting,
    bank: DetectorBank,
    trials: int,
    *,
    symmetrize: bool = False,
) -> dict[tuple[int, int], float]:
    """Exact expectation of the counters, for ``trials`` per run."""
    runs = _SYMMETRIZATION_FLIPS if symmetrize else ((False, False),)
    out = {pair: 0.0 for pair in _PAIRS}
    for flip_a, flip_b in runs:
        dist = outcome_distribution(state, setting.flipped(flip_a, flip_b), bank)
        sa = {1: 2, 2: 1} if flip_a else {1: 1, 2: 2}
        sb = {3: 4, 4: 3} if flip_b else {3: 3, 4: 4}
        for n, m in _PAIRS:
            out[(n, m)] += trials * dist.coincidence(sa[n], sb[m])
    return out
