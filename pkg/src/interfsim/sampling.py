"""Trial-by-trial stochastic engine with a deterministic variate stream.

Each trial realizes exactly one definite outcome.  The full probability
state is carried between detector banks and sampling happens only at
banks; sampling per device would wipe out interference, which is exactly
what the analytic engine says must not happen.

Randomness contract
-------------------
The uniform variate consumed at detector bank ``b`` of trial ``i`` under
seed ``s`` is derived by chaining the splitmix64 finalizer over the three
64-bit values::

    h = mix64(s); h = mix64(h ^ mix64(i)); h = mix64(h ^ mix64(b))
    u = (h >> 11) * 2.0**-53        # 53-bit uniform in [0, 1)

where ``mix64`` is the standard splitmix64 finalizer (golden-gamma add,
two xor-shift multiplies, final xor-shift).  This is pure 64-bit integer
arithmetic with no platform RNG behind it; committed golden counts depend
on it, so it must never change.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .analytic import OutcomeDistribution, enumerate_outcomes
from .core import UNDETECTED, Apparatus, DeviceOp, embed
from .stats import chi_square

_MASK64 = (1 << 64) - 1

# A detection probability this close to 1 is taken without consuming a
# variate, so probability-1 outcomes are seed-independent.
FORCED = 1e-12


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def variate(seed: int, trial_index: int, bank_index: int) -> float:
    """Uniform in [0, 1) for (seed, trial, bank); see the module docstring."""
    h = _mix64(seed & _MASK64)
    h = _mix64(h ^ _mix64(trial_index & _MASK64))
    h = _mix64(h ^ _mix64(bank_index & _MASK64))
    return (h >> 11) * 2.0**-53


@dataclass(frozen=True)
class DetectorFired:
    label: str


@dataclass(frozen=True)
class PassedBank:
    bank: int


Event = DetectorFired | PassedBank


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """What one particle did: ordered events plus one terminal outcome."""

    trial_index: int
    events: tuple[tuple[int, Event], ...]
    terminal_outcome: str

    def __eq__(self, other):
        if not isinstance(other, TrialRecord):
            return NotImplemented
        return (
            self.trial_index == other.trial_index
            and self.events == other.events
            and self.terminal_outcome == other.terminal_outcome
        )


@dataclass(frozen=True, eq=False)
class EnsembleReport:
    """Aggregated trial counts next to the analytic prediction."""

    n_trials: int
    seed: int
    counts: dict[str, int]
    frequencies: dict[str, float]
    predicted: OutcomeDistribution
    chi_square: float
    dof: int

    def __eq__(self, other):
        if not isinstance(other, EnsembleReport):
            return NotImplemented
        return (
            self.n_trials == other.n_trials
            and self.seed == other.seed
            and self.counts == other.counts
            and self.frequencies == other.frequencies
            and self.predicted == other.predicted
            and self.chi_square == other.chi_square
            and self.dof == other.dof
        )


def _compile(apparatus: Apparatus):
    """Precompute embedded matrices and bank lookups for the trial loop."""
    n = apparatus.n_modes
    program = []
    bank_index = 0
    for time, stage in enumerate(apparatus.stages, start=1):
        if isinstance(stage, DeviceOp):
            program.append((time, embed(stage, n), None))
        else:
            labels = [det.label for det in stage.detectors]
            groups = [np.array(sorted(det.modes)) for det in stage.detectors]
            covered = np.array(sorted(stage.covered_modes))
            program.append((time, None, (bank_index, labels, groups, covered)))
            bank_index += 1
    return program


def _select(probs: list[float], u: float) -> int:
    """Cumulative-interval pick; index len(probs) means continue."""
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k
    return len(probs)


def _run_trial(program, source_amps: np.ndarray, seed: int, trial_index: int) -> TrialRecord:
    psi = source_amps.copy()
    events: list[tuple[int, Event]] = []
    for time, matrix, bank in program:
        if bank is None:
            psi = matrix @ psi
            continue
        bank_index, labels, groups, covered = bank
        probs = [float(np.sum(np.abs(psi[g]) ** 2)) for g in groups]
        choice = -1
        for k, p in enumerate(probs):
            if p >= 1.0 - FORCED:
                choice = k
                break
        if choice < 0:
            choice = _select(probs, variate(seed, trial_index, bank_index))
        if choice == len(labels):
            projected = psi.copy()
            projected[covered] = 0.0
            remaining = float(np.vdot(projected, projected).real)
            if remaining >= 1e-12:
                psi = projected / math.sqrt(remaining)
                events.append((time, PassedBank(bank_index)))
                continue
            # continue is numerically impossible: detection is forced
            choice = len(labels) - 1
        label = labels[choice]
        events.append((time, DetectorFired(label)))
        return TrialRecord(trial_index, tuple(events), label)
    return TrialRecord(trial_index, tuple(events), UNDETECTED)


def sample_trial(apparatus: Apparatus, seed: int, trial_index: int) -> TrialRecord:
    """Run one reproducible trial through the apparatus."""
    return _run_trial(_compile(apparatus), apparatus.source.amplitudes, seed, trial_index)


def run_ensemble(apparatus: Apparatus, n_trials: int, seed: int) -> EnsembleReport:
    """Aggregate trials 0..n_trials-1 and score them against the prediction."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    predicted, _ = enumerate_outcomes(apparatus)
    program = _compile(apparatus)
    source_amps = apparatus.source.amplitudes
    tally: Counter[str] = Counter()
    for trial_index in range(n_trials):
        tally[_run_trial(program, source_amps, seed, trial_index).terminal_outcome] += 1
    labels = sorted(set(predicted.entries) | set(tally))
    counts = {label: int(tally.get(label, 0)) for label in labels}
    frequencies = {label: counts[label] / n_trials for label in labels}
    statistic, dof = chi_square(counts, predicted.entries, n_trials)
    return EnsembleReport(
        n_trials=n_trials,
        seed=seed,
        counts=counts,
        frequencies=frequencies,
        predicted=predicted,
        chi_square=statistic,
        dof=dof,
    )


def ensemble_expectation(report: EnsembleReport, values: dict[str, float]) -> float:
    """Frequency-weighted average of per-outcome observable values."""
    total = 0.0
    for label, count in report.counts.items():
        if count == 0:
            continue
        if label not in values:
            raise ValueError(f"no observable value for observed outcome {label!r}")
        total += values[label] * report.frequencies[label]
    return total
