"""Goodness-of-fit checks of sampled counts against analytic predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

if TYPE_CHECKING:
    from .sampling import EnsembleReport

# Categories with less expected probability than this are excluded from the
# chi-square sum; any observed count there is an immediate failure.
EXCLUDE_BELOW = 1e-12

DEFAULT_ALPHA = 1e-3

# No single outcome may sit further than this many binomial sigmas from its
# prediction, whatever the chi-square p-value says.
HARD_SIGMA_LIMIT = 5.0


def chi_square(
    observed: Mapping[str, int],
    expected: Mapping[str, float],
    n: int,
) -> tuple[float, int]:
    """Pearson statistic and degrees of freedom for counts vs probabilities."""
    if n <= 0:
        raise ValueError("n must be positive")
    total = math.fsum(expected.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"expected probabilities sum to {total!r}, not 1")
    categories = [label for label, p in sorted(expected.items()) if p >= EXCLUDE_BELOW]
    if not categories:
        raise ValueError("no categories with positive expected probability")
    statistic = 0.0
    for label in categories:
        mean = n * expected[label]
        diff = observed.get(label, 0) - mean
        statistic += diff * diff / mean
    return statistic, len(categories) - 1


def chi_square_p_value(statistic: float, dof: int) -> float:
    """Upper-tail probability of the chi-square distribution.

    Computed through the regularized incomplete gamma function (series for
    small arguments, continued fraction otherwise); accurate well past 1e-8
    for the degrees of freedom used here.
    """
    if statistic < 0:
        raise ValueError("statistic must be non-negative")
    if dof < 0:
        raise ValueError("degrees of freedom must be non-negative")
    if dof == 0:
        return 1.0 if statistic <= 1e-12 else 0.0
    return _regularized_gamma_q(dof / 2.0, statistic / 2.0)


def _regularized_gamma_q(a: float, x: float) -> float:
    if x <= 0.0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_p_series(a, x)))
    return min(1.0, max(0.0, _gamma_q_continued_fraction(a, x)))


def _gamma_scale(a: float, x: float) -> float:
    # exp(-x + a*ln(x) - ln(Gamma(a))); underflows to 0 for huge x, which is fine
    return math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    k = a
    for _ in range(1000):
        k += 1.0
        term *= x / k
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * _gamma_scale(a, x)


def _gamma_q_continued_fraction(a: float, x: float) -> float:
    # Modified Lentz evaluation of the standard continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * _gamma_scale(a, x)


@dataclass(frozen=True, eq=False)
class Verdict:
    """Outcome of comparing sampled frequencies with the prediction.

    per_outcome maps each label to (frequency, predicted, sigma_distance).
    """

    passed: bool
    chi_square: float
    dof: int
    p_value: float
    per_outcome: dict[str, tuple[float, float, float]]


def compare(report: "EnsembleReport", alpha: float = DEFAULT_ALPHA) -> Verdict:
    """Score an ensemble against its own predicted distribution."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    n = report.n_trials
    if n == 0:
        raise ValueError("report has no trials")
    predicted = report.predicted.entries
    labels = sorted(set(predicted) | set(report.counts))
    per_outcome: dict[str, tuple[float, float, float]] = {}
    hard_fail = False
    for label in labels:
        p = predicted.get(label, 0.0)
        count = report.counts.get(label, 0)
        freq = count / n
        if p < EXCLUDE_BELOW and count > 0:
            distance = math.inf  # impossible outcome was observed
        else:
            sigma = math.sqrt(p * (1.0 - p) / n)
            if sigma == 0.0:
                distance = 0.0 if freq == p else math.inf
            else:
                distance = abs(freq - p) / sigma
        per_outcome[label] = (freq, p, distance)
        if distance > HARD_SIGMA_LIMIT:
            hard_fail = True
    statistic, dof = chi_square(report.counts, predicted, n)
    p_value = chi_square_p_value(statistic, dof)
    return Verdict(
        passed=(p_value > alpha and not hard_fail),
        chi_square=statistic,
        dof=dof,
        p_value=p_value,
        per_outcome=per_outcome,
    )
