"""Exact engine: linear propagation, branch enumeration, Born probabilities.

Branches carry unnormalized amplitudes through the stage list; the
probability of a detection leaf is the squared norm of the projected
component at that leaf.  Detectors are absorptive: a detected particle
leaves the apparatus and only the undetected remainder keeps propagating.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ATOL,
    UNDETECTED,
    Apparatus,
    BranchAmplitude,
    DetectorBank,
    DeviceOp,
    Observable,
    ProbabilityState,
    TensorSplit,
    embed,
)

# Branches below this weight are dropped and folded into UNDETECTED.
PRUNE_WEIGHT = 1e-15

# Outcome labels with less probability than this are omitted entirely.
NEGLIGIBLE = 1e-12

# Edge label for the undetected continuation out of a detector bank.
PASS_EDGE = "PASS"


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probability per outcome label, stored in sorted label order."""

    entries: dict[str, float]

    def __post_init__(self):
        entries = {str(k): float(v) for k, v in sorted(self.entries.items())}
        total = 0.0
        for label, p in entries.items():
            if not -NEGLIGIBLE <= p <= 1.0 + ATOL:
                raise ValueError(f"probability for {label!r} out of range: {p!r}")
            total += p
        if abs(total - 1.0) > ATOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "entries", entries)

    def probability(self, label: str) -> float:
        return self.entries.get(label, 0.0)

    def __getitem__(self, label: str) -> float:
        return self.entries[label]

    def __eq__(self, other):
        if not isinstance(other, OutcomeDistribution):
            return NotImplemented
        return self.entries == other.entries


@dataclass(eq=False)
class BranchNode:
    """One node of the detection branch tree.

    ``time`` is the ordering time of the event that produced this node's
    amplitudes (0 for the source).  Leaves carry the terminal ``outcome``
    and its ``probability``; ``norm_lost`` is the weight shed by
    non-unitary device stages since the parent node.
    """

    time: int
    branch: BranchAmplitude
    outcome: str | None = None
    probability: float | None = None
    norm_lost: float = 0.0
    children: list[tuple[str, "BranchNode"]] = field(default_factory=list)

    def leaves(self):
        if self.outcome is not None:
            yield self
        for _, child in self.children:
            yield from child.leaves()


@dataclass(eq=False)
class BranchTree:
    root: BranchNode

    def leaves(self):
        return list(self.root.leaves())


def apply(operator: np.ndarray, branch: BranchAmplitude) -> BranchAmplitude:
    """Apply a full-dimension linear operator to a branch."""
    op = np.asarray(operator, dtype=np.complex128)
    dim = branch.dim
    if op.shape != (dim, dim):
        raise ValueError(f"operator shape {op.shape} does not match dimension {dim}")
    return BranchAmplitude(op @ branch.amplitudes)


def born(state: ProbabilityState) -> np.ndarray:
    """Outcome probability per mode: squared amplitude magnitudes."""
    return np.abs(state.amplitudes) ** 2


def expectation(observable: Observable, state: ProbabilityState) -> float:
    """Ensemble average of the observable over the state."""
    if observable.dim != state.dim:
        raise ValueError("observable and state dimensions do not match")
    return float(np.dot(observable.values, born(state)))


def _detection_weight(amps: np.ndarray, modes: list[int]) -> float:
    return float(np.sum(np.abs(amps[modes]) ** 2))


def enumerate_outcomes(apparatus: Apparatus) -> tuple[OutcomeDistribution, BranchTree]:
    """Exact outcome distribution and the branch tree behind it.

    Device stages transform the running unnormalized branch; at each
    detector bank every detector splits off a terminal leaf and one
    residual branch continues with the detected modes zeroed (never
    renormalized).  Whatever weight survives the last stage, plus any
    weight shed by non-unitary devices, is reported as UNDETECTED.
    """
    n = apparatus.n_modes
    probs: dict[str, float] = {label: 0.0 for label in apparatus.detector_labels()}

    amps = apparatus.source.amplitudes.copy()
    root = BranchNode(time=0, branch=BranchAmplitude(amps))
    node = root
    lost_since_node = 0.0
    total_lost = 0.0
    weight = 1.0

    for time, stage in enumerate(apparatus.stages, start=1):
        if isinstance(stage, DeviceOp):
            new_amps = embed(stage, n) @ amps
            new_weight = float(np.vdot(new_amps, new_amps).real)
            shed = max(0.0, weight - new_weight)
            lost_since_node += shed
            total_lost += shed
            amps, weight = new_amps, new_weight
        else:
            for det in stage.detectors:
                modes = sorted(det.modes)
                w = _detection_weight(amps, modes)
                projected = np.zeros_like(amps)
                projected[modes] = amps[modes]
                leaf = BranchNode(
                    time=time,
                    branch=BranchAmplitude(projected),
                    outcome=det.label,
                    probability=w,
                )
                node.children.append((det.label, leaf))
                probs[det.label] += w
            amps = amps.copy()
            amps[sorted(stage.covered_modes)] = 0.0
            weight = float(np.vdot(amps, amps).real)
            residual = BranchNode(
                time=time,
                branch=BranchAmplitude(amps),
                norm_lost=lost_since_node,
            )
            node.children.append((PASS_EDGE, residual))
            node = residual
            lost_since_node = 0.0
        if weight < PRUNE_WEIGHT:
            break

    undetected = total_lost + weight
    if undetected > NEGLIGIBLE:
        leaf = BranchNode(
            time=len(apparatus.stages) + 1,
            branch=BranchAmplitude(amps),
            outcome=UNDETECTED,
            probability=undetected,
            norm_lost=lost_since_node,
        )
        node.children.append((UNDETECTED, leaf))
        probs[UNDETECTED] = undetected

    return OutcomeDistribution(probs), BranchTree(root)


def conditional_distribution(
    state: ProbabilityState,
    split: TensorSplit,
    measured_factor: int,
    outcome: int,
) -> OutcomeDistribution:
    """Distribution of the remaining factor after observing one factor.

    Projects onto the given basis outcome of the measured factor,
    renormalizes, and reads off the other factor's probabilities.  Labels
    in the result are the basis indices of the remaining factor.
    """
    if len(split.factor_dims) != 2:
        raise ValueError("conditional_distribution requires a two-factor split")
    d1, d2 = split.factor_dims
    if d1 * d2 != state.dim:
        raise ValueError(f"split {d1}x{d2} incompatible with state dimension {state.dim}")
    if measured_factor not in (0, 1):
        raise ValueError("measured_factor must be 0 or 1")
    coeff = state.amplitudes.reshape(d1, d2)
    measured_dim = d1 if measured_factor == 0 else d2
    if not 0 <= outcome < measured_dim:
        raise ValueError(f"outcome {outcome} out of range for factor of dimension {measured_dim}")
    vec = coeff[outcome, :] if measured_factor == 0 else coeff[:, outcome]
    marginal = float(np.vdot(vec, vec).real)
    if marginal <= 1e-12:
        raise ValueError("cannot condition on an outcome of zero probability")
    probs = np.abs(vec) ** 2 / marginal
    return OutcomeDistribution({str(i): float(p) for i, p in enumerate(probs)})


def path_sum_amplitude(apparatus: Apparatus, final_mode: int) -> complex:
    """Brute-force sum over classical mode paths through the stage list.

    Every path contributes the product of its per-stage matrix elements;
    the total must equal the composed matrix-product amplitude.  Only
    device stages and a basis-state source are allowed.
    """
    n = apparatus.n_modes
    if not 0 <= final_mode < n:
        raise ValueError(f"final mode {final_mode} out of range")
    for stage in apparatus.stages:
        if isinstance(stage, DetectorBank):
            raise ValueError("path sum is defined for detector-free stage lists only")

    src = apparatus.source.amplitudes
    on_mode = np.flatnonzero(np.abs(src) > 1e-12)
    if on_mode.size != 1 or abs(src[on_mode[0]] - 1.0) > 1e-12:
        raise ValueError("path sum requires a basis-state source")
    start = int(on_mode[0])

    mats = [
        tuple(tuple(row) for row in embed(stage, n))
        for stage in apparatus.stages
    ]
    if not mats:
        return 1.0 + 0.0j if start == final_mode else 0.0j

    total = 0.0 + 0.0j
    for inner in itertools.product(range(n), repeat=len(mats) - 1):
        path = (start,) + inner + (final_mode,)
        amp = 1.0 + 0.0j
        for step, mat in enumerate(mats):
            amp *= mat[path[step + 1]][path[step]]
            if amp == 0.0:
                break
        total += amp
    return total
