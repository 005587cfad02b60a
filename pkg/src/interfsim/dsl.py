"""Line-oriented experiment description files (.gmc) and their parser.

Grammar, one statement per line ('#' starts a comment, blank lines are
ignored, statements execute in file order):

    experiment NAME
    modes N
    source mode K                        # basis-state source
    source amps (re,im) ... (re,im)      # N pairs, must be normalized
    H A B [t=T]                          # beam splitter, default t = 1/sqrt(2)
    R A B                                # reflector
    X A B                                # cross (identity stage)
    PHASE M phi=PHI                      # multiplies mode M by e^{i*phi}
    OP A B (re,im) (re,im) (re,im) (re,im)   # custom 2x2, row-major
    DETECT LABEL@MODE [LABEL@MODE ...]   # one absorptive detector bank

Canonical output uses '\\n' line endings, single spaces, floats with 17
significant digits, and detector labels sorted within each bank.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .core import (
    Apparatus,
    DetectorBank,
    Detector,
    DeviceKind,
    DeviceOp,
    ProbabilityState,
    basis_state,
    beam_splitter,
    cross,
    custom,
    phase,
    reflector,
)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
_DETECTOR_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_-]*)@(\d+)")
_PAIR_RE = re.compile(r"\(([^\s(),]+),([^\s(),]+)\)")

DEFAULT_TRANSMISSION = 2.0**-0.5

# A source whose squared norm misses 1 by more than this is rejected ...
SOURCE_NORM_SLACK = 1e-6
# ... and one off by more than this is silently renormalized.
RENORM_ABOVE = 1e-12


class ParseError(Exception):
    """Parse failure with a 1-based position and the offending line."""

    def __init__(self, line: int, column: int, message: str, snippet: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message
        self.snippet = snippet


@dataclass(frozen=True, eq=False)
class ExperimentDoc:
    """A named apparatus, as read from or written to DSL text."""

    name: str
    apparatus: Apparatus

    def __post_init__(self):
        if not _NAME_RE.fullmatch(self.name):
            raise ValueError(f"invalid experiment name {self.name!r}")

    def __eq__(self, other):
        if not isinstance(other, ExperimentDoc):
            return NotImplemented
        return self.name == other.name and self.apparatus == other.apparatus


def _tokenize(line: str) -> list[tuple[str, int]]:
    """Split one line into (text, 1-based column) tokens; strip comments."""
    body = line.split("#", 1)[0]
    tokens = []
    i = 0
    while i < len(body):
        if body[i].isspace():
            i += 1
            continue
        j = i
        while j < len(body) and not body[j].isspace():
            j += 1
        tokens.append((body[i:j], i + 1))
        i = j
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines() or [""]
        self.name: str | None = None
        self.n_modes: int | None = None
        self.source: ProbabilityState | None = None
        self.stages: list = []
        self.line_no = 1

    def fail(self, column: int, message: str):
        raise ParseError(self.line_no, column, message, self.lines[self.line_no - 1])

    def fail_missing(self, message: str):
        line = len(self.lines)
        raise ParseError(line, 1, message, self.lines[line - 1])

    def expect_int(self, token: str, column: int) -> int:
        if not re.fullmatch(r"[+-]?\d+", token):
            self.fail(column, f"malformed number {token!r}")
        return int(token)

    def expect_float(self, token: str, column: int) -> float:
        try:
            value = float(token)
        except ValueError:
            value = math.nan
        if not math.isfinite(value):
            self.fail(column, f"malformed number {token!r}")
        return value

    def expect_mode(self, token: str, column: int) -> int:
        value = self.expect_int(token, column)
        if not 0 <= value < self.n_modes:
            self.fail(column, f"mode index {value} out of range for {self.n_modes} modes")
        return value

    def expect_pair(self, token: str, column: int) -> complex:
        match = _PAIR_RE.fullmatch(token)
        if not match:
            self.fail(column, f"malformed amplitude {token!r}, expected (re,im)")
        re_part = self.expect_float(match.group(1), column)
        im_part = self.expect_float(match.group(2), column)
        return complex(re_part, im_part)

    def expect_kv(self, token: str, column: int, key: str) -> float:
        if not token.startswith(key + "="):
            self.fail(column, f"expected {key}=VALUE, got {token!r}")
        return self.expect_float(token[len(key) + 1 :], column)

    def expect_arity(self, tokens, count: int):
        if len(tokens) < count:
            self.fail(tokens[-1][1], "unexpected end of statement")
        if len(tokens) > count:
            text, col = tokens[count]
            self.fail(col, f"unexpected token {text!r}")

    def require_header(self, column: int):
        if self.name is None:
            self.fail(column, "experiment declaration must come first")
        if self.n_modes is None:
            self.fail(column, "modes must be declared before this statement")

    def require_source(self, column: int):
        self.require_header(column)
        if self.source is None:
            self.fail(column, "source must be declared before any stage")

    def two_target_modes(self, tokens) -> tuple[int, int]:
        a = self.expect_mode(*tokens[1])
        b = self.expect_mode(*tokens[2])
        if a == b:
            self.fail(tokens[2][1], "target modes must be distinct")
        return a, b

    def statement(self, tokens):
        keyword, column = tokens[0]
        if self.name is None and keyword != "experiment":
            self.fail(column, "experiment declaration must come first")
        handler = {
            "experiment": self.stmt_experiment,
            "modes": self.stmt_modes,
            "source": self.stmt_source,
            "H": self.stmt_beam_splitter,
            "R": self.stmt_reflector,
            "X": self.stmt_cross,
            "PHASE": self.stmt_phase,
            "OP": self.stmt_custom,
            "DETECT": self.stmt_detect,
        }.get(keyword)
        if handler is None:
            self.fail(column, f"unknown keyword {keyword!r}")
        handler(tokens)

    def stmt_experiment(self, tokens):
        if self.name is not None:
            self.fail(tokens[0][1], "duplicate experiment declaration")
        self.expect_arity(tokens, 2)
        name, column = tokens[1]
        if not _NAME_RE.fullmatch(name):
            self.fail(column, f"invalid experiment name {name!r}")
        self.name = name

    def stmt_modes(self, tokens):
        if self.n_modes is not None:
            self.fail(tokens[0][1], "duplicate modes declaration")
        if self.source is not None or self.stages:
            self.fail(tokens[0][1], "modes must be declared before source and stages")
        self.expect_arity(tokens, 2)
        value = self.expect_int(*tokens[1])
        if value < 1:
            self.fail(tokens[1][1], "mode count must be at least 1")
        self.n_modes = value

    def stmt_source(self, tokens):
        self.require_header(tokens[0][1])
        if self.source is not None:
            self.fail(tokens[0][1], "duplicate source declaration")
        if self.stages:
            self.fail(tokens[0][1], "source must be declared before any stage")
        if len(tokens) < 2:
            self.fail(tokens[0][1], "expected 'mode' or 'amps'")
        form, column = tokens[1]
        if form == "mode":
            self.expect_arity(tokens, 3)
            mode = self.expect_mode(*tokens[2])
            self.source = basis_state(self.n_modes, mode)
        elif form == "amps":
            self.expect_arity(tokens, 2 + self.n_modes)
            amps = np.array(
                [self.expect_pair(*tok) for tok in tokens[2:]],
                dtype=np.complex128,
            )
            norm2 = float(np.vdot(amps, amps).real)
            if abs(norm2 - 1.0) > SOURCE_NORM_SLACK:
                self.fail(
                    tokens[2][1],
                    f"source amplitudes are not normalized (squared norm {norm2!r})",
                )
            if abs(norm2 - 1.0) > RENORM_ABOVE:
                amps = amps / math.sqrt(norm2)
            self.source = ProbabilityState(amps)
        else:
            self.fail(column, f"expected 'mode' or 'amps', got {form!r}")

    def stmt_beam_splitter(self, tokens):
        self.require_source(tokens[0][1])
        if len(tokens) not in (3, 4):
            self.expect_arity(tokens, 4 if len(tokens) > 4 else 3)
        modes = self.two_target_modes(tokens)
        t = DEFAULT_TRANSMISSION
        if len(tokens) == 4:
            t = self.expect_kv(*tokens[3], key="t")
            if not 0.0 <= t <= 1.0:
                self.fail(tokens[3][1], "transmission t must be in [0, 1]")
        self.stages.append(beam_splitter(t, modes))

    def stmt_reflector(self, tokens):
        self.require_source(tokens[0][1])
        self.expect_arity(tokens, 3)
        self.stages.append(reflector(self.two_target_modes(tokens)))

    def stmt_cross(self, tokens):
        self.require_source(tokens[0][1])
        self.expect_arity(tokens, 3)
        self.stages.append(cross(self.two_target_modes(tokens)))

    def stmt_phase(self, tokens):
        self.require_source(tokens[0][1])
        self.expect_arity(tokens, 3)
        mode = self.expect_mode(*tokens[1])
        if self.n_modes < 2:
            self.fail(tokens[0][1], "PHASE requires at least 2 declared modes")
        phi = self.expect_kv(*tokens[2], key="phi")
        self.stages.append(phase(phi, (_phase_companion(mode), mode)))

    def stmt_custom(self, tokens):
        self.require_source(tokens[0][1])
        self.expect_arity(tokens, 7)
        modes = self.two_target_modes(tokens)
        entries = [self.expect_pair(*tok) for tok in tokens[3:]]
        matrix = np.array(entries, dtype=np.complex128).reshape(2, 2)
        self.stages.append(custom(matrix, modes))

    def stmt_detect(self, tokens):
        self.require_source(tokens[0][1])
        if len(tokens) < 2:
            self.fail(tokens[0][1], "expected LABEL@MODE")
        detectors = []
        labels_seen = set()
        modes_seen = set()
        for text, column in tokens[1:]:
            match = _DETECTOR_RE.fullmatch(text)
            if not match:
                self.fail(column, f"malformed detector {text!r}, expected LABEL@MODE")
            label = match.group(1)
            mode = self.expect_mode(match.group(2), column)
            if label in labels_seen:
                self.fail(column, f"duplicate detector label {label!r} in bank")
            if mode in modes_seen:
                self.fail(column, f"duplicate detector mode {mode} in bank")
            labels_seen.add(label)
            modes_seen.add(mode)
            detectors.append(Detector(label, frozenset({mode})))
        self.stages.append(DetectorBank(tuple(detectors)))

    def run(self) -> ExperimentDoc:
        for index, line in enumerate(self.lines, start=1):
            self.line_no = index
            tokens = _tokenize(line)
            if tokens:
                self.statement(tokens)
        if self.name is None:
            self.fail_missing("missing experiment declaration")
        if self.n_modes is None:
            self.fail_missing("missing modes declaration")
        if self.source is None:
            self.fail_missing("missing source declaration")
        try:
            apparatus = Apparatus(self.n_modes, self.source, tuple(self.stages))
            return ExperimentDoc(self.name, apparatus)
        except ValueError as exc:
            self.fail_missing(str(exc))


def _phase_companion(mode: int) -> int:
    # deterministic idle mode for the diag(1, e^{i*phi}) pair
    return 0 if mode != 0 else 1


def parse(text: str) -> ExperimentDoc:
    """Parse DSL text; every failure surfaces as a positioned ParseError."""
    return _Parser(text).run()


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _fmt_pair(value: complex) -> str:
    return f"({_fmt(value.real)},{_fmt(value.imag)})"


def _source_statement(source: ProbabilityState) -> str:
    amps = source.amplitudes
    on = np.flatnonzero(amps != 0)
    if on.size == 1 and amps[on[0]] == 1.0:
        return f"source mode {int(on[0])}"
    return "source amps " + " ".join(_fmt_pair(a) for a in amps)


def _device_statement(op: DeviceOp) -> str:
    a, b = (op.target_modes + (None, None))[:2]
    if op.kind is DeviceKind.CROSS:
        return f"X {a} {b}"
    if op.kind is DeviceKind.REFLECTOR:
        return f"R {a} {b}"
    if op.kind is DeviceKind.BEAMSPLITTER:
        return f"H {a} {b} t={_fmt(op.param)}"
    if op.kind is DeviceKind.PHASE:
        return f"PHASE {b} phi={_fmt(op.param)}"
    if op.matrix.shape != (2, 2):
        raise ValueError("only 2x2 custom operators can be serialized")
    pairs = " ".join(_fmt_pair(entry) for entry in op.matrix.reshape(-1))
    return f"OP {a} {b} {pairs}"


def _bank_statement(bank: DetectorBank) -> str:
    items = []
    for det in bank.detectors:  # already sorted by label
        if len(det.modes) != 1:
            raise ValueError(
                f"detector {det.label!r} covers several modes; "
                "the DSL expresses single-mode detectors only"
            )
        items.append(f"{det.label}@{next(iter(det.modes))}")
    return "DETECT " + " ".join(items)


def serialize(doc: ExperimentDoc) -> str:
    """Canonical DSL text; parse(serialize(doc)) is structurally doc."""
    lines = [
        f"experiment {doc.name}",
        f"modes {doc.apparatus.n_modes}",
        _source_statement(doc.apparatus.source),
    ]
    for stage in doc.apparatus.stages:
        if isinstance(stage, DeviceOp):
            lines.append(_device_statement(stage))
        else:
            lines.append(_bank_statement(stage))
    return "\n".join(lines) + "\n"
