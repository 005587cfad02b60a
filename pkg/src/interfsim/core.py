"""Shared domain types and device constructors for mode-based optical models.

Amplitudes are plain ``complex`` values held in numpy arrays; a mode is an
index into such a vector.  Mode 0 is horizontal motion, mode 1 is vertical,
and this convention is fixed across the whole package.  Matrices act by the
usual convention ``out = M @ in`` (column index = input mode).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Reserved outcome label for probability mass never absorbed by a detector.
UNDETECTED = "UNDETECTED"

# Absolute tolerance for normalization / unitarity checks.
ATOL = 1e-9


def _as_amplitudes(values) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("amplitude vector must be one-dimensional and non-empty")
    if not np.isfinite(arr).all():
        raise ValueError("amplitudes must be finite")
    arr.setflags(write=False)
    return arr


def _norm2(arr: np.ndarray) -> float:
    return float(np.vdot(arr, arr).real)


@dataclass(frozen=True, eq=False)
class ProbabilityState:
    """Normalized complex amplitude vector over modes."""

    amplitudes: np.ndarray

    def __post_init__(self):
        arr = _as_amplitudes(self.amplitudes)
        norm2 = _norm2(arr)
        if abs(norm2 - 1.0) > ATOL:
            raise ValueError(f"state is not normalized: squared norm {norm2!r}")
        object.__setattr__(self, "amplitudes", arr)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __eq__(self, other):
        if not isinstance(other, ProbabilityState):
            return NotImplemented
        return np.array_equal(self.amplitudes, other.amplitudes)


def basis_state(n_modes: int, mode: int) -> ProbabilityState:
    """State with all amplitude on one mode."""
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    if not 0 <= mode < n_modes:
        raise ValueError(f"mode {mode} out of range for {n_modes} modes")
    amps = np.zeros(n_modes, dtype=np.complex128)
    amps[mode] = 1.0
    return ProbabilityState(amps)


@dataclass(frozen=True, eq=False)
class BranchAmplitude:
    """Unnormalized amplitude vector; weight is its squared norm in [0, 1]."""

    amplitudes: np.ndarray
    weight: float = -1.0

    def __post_init__(self):
        arr = _as_amplitudes(self.amplitudes)
        weight = _norm2(arr)
        if self.weight >= 0.0 and abs(weight - self.weight) > ATOL:
            raise ValueError("declared weight does not match squared norm")
        if weight > 1.0 + ATOL:
            raise ValueError(f"branch weight {weight!r} exceeds 1")
        object.__setattr__(self, "amplitudes", arr)
        object.__setattr__(self, "weight", weight)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __eq__(self, other):
        if not isinstance(other, BranchAmplitude):
            return NotImplemented
        return np.array_equal(self.amplitudes, other.amplitudes)


@dataclass(frozen=True, eq=False)
class Observable:
    """Real value attached to each mode."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("observable values must be a one-dimensional vector")
        if not np.isfinite(arr).all():
            raise ValueError("observable values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.size


class DeviceKind(Enum):
    CROSS = "CROSS"
    REFLECTOR = "REFLECTOR"
    BEAMSPLITTER = "BEAMSPLITTER"
    PHASE = "PHASE"
    CUSTOM = "CUSTOM"


@dataclass(frozen=True, eq=False)
class DeviceOp:
    """Linear operator on an ordered subset of modes.

    ``param`` carries the transmission amplitude for BEAMSPLITTER and the
    phase angle for PHASE; it is None for the other kinds.
    """

    kind: DeviceKind
    matrix: np.ndarray
    target_modes: tuple[int, ...]
    param: float | None = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("device matrix must be square")
        if not np.isfinite(mat).all():
            raise ValueError("device matrix entries must be finite")
        modes = tuple(int(m) for m in self.target_modes)
        if len(modes) != mat.shape[0]:
            raise ValueError("target mode count must match matrix dimension")
        if len(set(modes)) != len(modes):
            raise ValueError("target modes must be distinct")
        if any(m < 0 for m in modes):
            raise ValueError("target modes must be non-negative")
        gap = np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])))
        if self.kind is DeviceKind.CUSTOM:
            if gap > 1e-6:
                warnings.warn(
                    f"custom operator deviates from unitarity by {gap:.3g}",
                    stacklevel=3,
                )
        elif gap > ATOL:
            raise ValueError(f"{self.kind.value} matrix is not unitary (gap {gap:.3g})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "target_modes", modes)

    def __eq__(self, other):
        if not isinstance(other, DeviceOp):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.target_modes == other.target_modes
            and self.param == other.param
            and np.array_equal(self.matrix, other.matrix)
        )


def cross(modes: tuple[int, int] = (0, 1)) -> DeviceOp:
    """Crossing of two lines: the identity on its target modes."""
    return DeviceOp(DeviceKind.CROSS, np.eye(2, dtype=np.complex128), modes)


def reflector(modes: tuple[int, int] = (0, 1)) -> DeviceOp:
    """Mirror swapping the two modes with a factor i."""
    mat = np.array([[0.0, 1j], [1j, 0.0]], dtype=np.complex128)
    return DeviceOp(DeviceKind.REFLECTOR, mat, modes)


def beam_splitter(t: float, modes: tuple[int, int] = (0, 1)) -> DeviceOp:
    """Splitter transmitting with amplitude t and reflecting with i*sqrt(1-t^2)."""
    t = float(t)
    if not (math.isfinite(t) and 0.0 <= t <= 1.0):
        raise ValueError(f"transmission amplitude must be in [0, 1], got {t!r}")
    r = math.sqrt(max(0.0, 1.0 - t * t))
    mat = np.array([[t, 1j * r], [1j * r, t]], dtype=np.complex128)
    return DeviceOp(DeviceKind.BEAMSPLITTER, mat, modes, param=t)


def half_mirror(modes: tuple[int, int] = (0, 1)) -> DeviceOp:
    """Balanced beam splitter (t = 1/sqrt(2))."""
    return beam_splitter(2.0**-0.5, modes)


def phase(phi: float, modes: tuple[int, int] = (0, 1)) -> DeviceOp:
    """Phase shifter: multiplies the second target mode by e^{i*phi}."""
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError("phase angle must be finite")
    mat = np.array([[1.0, 0.0], [0.0, np.exp(1j * phi)]], dtype=np.complex128)
    return DeviceOp(DeviceKind.PHASE, mat, modes, param=phi)


def custom(matrix, modes: tuple[int, ...]) -> DeviceOp:
    """Arbitrary linear operator; warns when far from unitary."""
    return DeviceOp(DeviceKind.CUSTOM, matrix, tuple(modes))


@dataclass(frozen=True, eq=False)
class Detector:
    """One absorptive detector covering a set of modes."""

    label: str
    modes: frozenset[int]

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValueError("detector label must be a non-empty string")
        modes = frozenset(int(m) for m in self.modes)
        if not modes:
            raise ValueError(f"detector {self.label!r} must cover at least one mode")
        if any(m < 0 for m in modes):
            raise ValueError("detector modes must be non-negative")
        object.__setattr__(self, "modes", modes)

    def __eq__(self, other):
        if not isinstance(other, Detector):
            return NotImplemented
        return self.label == other.label and self.modes == other.modes


@dataclass(frozen=True, eq=False)
class DetectorBank:
    """Projective measurement event over pairwise disjoint mode sets.

    Detectors are stored sorted by label; that order is the canonical one
    used for sampling and reporting.
    """

    detectors: tuple[Detector, ...]

    def __post_init__(self):
        dets = tuple(sorted(self.detectors, key=lambda d: d.label))
        if not dets:
            raise ValueError("detector bank must contain at least one detector")
        labels = [d.label for d in dets]
        if len(set(labels)) != len(labels):
            raise ValueError("detector labels must be unique within a bank")
        seen: set[int] = set()
        for det in dets:
            if seen & det.modes:
                raise ValueError("detector mode sets must be pairwise disjoint")
            seen |= det.modes
        object.__setattr__(self, "detectors", dets)

    @property
    def covered_modes(self) -> frozenset[int]:
        out: frozenset[int] = frozenset()
        for det in self.detectors:
            out |= det.modes
        return out

    def __eq__(self, other):
        if not isinstance(other, DetectorBank):
            return NotImplemented
        return self.detectors == other.detectors


Stage = DeviceOp | DetectorBank


@dataclass(frozen=True, eq=False)
class Apparatus:
    """Ordered stage list over n modes with a source state.

    The ordering time of a stage is its 1-based position in the list, so it
    is strictly increasing by construction.
    """

    n_modes: int
    source: ProbabilityState
    stages: tuple[Stage, ...]

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("apparatus needs at least one mode")
        if self.source.dim != self.n_modes:
            raise ValueError("source dimension does not match mode count")
        stages = tuple(self.stages)
        for stage in stages:
            if isinstance(stage, DeviceOp):
                modes = stage.target_modes
            elif isinstance(stage, DetectorBank):
                modes = tuple(stage.covered_modes)
            else:
                raise TypeError(f"stage must be DeviceOp or DetectorBank, got {type(stage)!r}")
            if any(m >= self.n_modes for m in modes):
                raise ValueError("stage touches a mode outside the apparatus")
        object.__setattr__(self, "stages", stages)

    def detector_labels(self) -> list[str]:
        """All detector labels, sorted; duplicates across banks collapse."""
        labels = {
            det.label
            for stage in self.stages
            if isinstance(stage, DetectorBank)
            for det in stage.detectors
        }
        return sorted(labels)

    def __eq__(self, other):
        if not isinstance(other, Apparatus):
            return NotImplemented
        return (
            self.n_modes == other.n_modes
            and self.source == other.source
            and self.stages == other.stages
        )


@dataclass(frozen=True)
class TensorSplit:
    """Factorization of a composite state's index space."""

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError("factor dimensions must be positive")
        object.__setattr__(self, "factor_dims", dims)


def embed(op: DeviceOp, n_modes: int) -> np.ndarray:
    """Expand a device to the full n-mode operator (identity elsewhere)."""
    modes = list(op.target_modes)
    if any(m >= n_modes for m in modes):
        raise ValueError("target mode out of range for embedding")
    full = np.eye(n_modes, dtype=np.complex128)
    full[np.ix_(modes, modes)] = op.matrix
    return full


def tensor(a: ProbabilityState, b: ProbabilityState) -> ProbabilityState:
    """Composite state with row-major pairwise coefficient products."""
    return ProbabilityState(np.kron(a.amplitudes, b.amplitudes))


def is_product(state: ProbabilityState, split: TensorSplit) -> bool:
    """True when the two-factor coefficient matrix has rank 1.

    Checked via 2x2 minors; dimensions here are tiny, so no decomposition
    is needed.
    """
    if len(split.factor_dims) != 2:
        raise ValueError("is_product requires a two-factor split")
    d1, d2 = split.factor_dims
    if d1 * d2 != state.dim:
        raise ValueError(
            f"split {d1}x{d2} incompatible with state dimension {state.dim}"
        )
    coeff = state.amplitudes.reshape(d1, d2)
    for i in range(d1):
        for k in range(i + 1, d1):
            for j in range(d2):
                for l in range(j + 1, d2):
                    minor = coeff[i, j] * coeff[k, l] - coeff[i, l] * coeff[k, j]
                    if abs(minor) > ATOL:
                        return False
    return True
