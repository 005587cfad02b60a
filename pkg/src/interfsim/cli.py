"""Command-line interface tying the parser, both engines, and stats together.

Data goes to stdout, human-readable text to stderr; exit codes are the only
pass/fail channel (0 success/pass, 1 parse error or failed comparison,
2 invalid configuration).  JSON output is canonical: keys sorted, floats
with 17 significant digits, byte-identical for identical inputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .analytic import OutcomeDistribution, enumerate_outcomes
from .core import (
    Apparatus,
    DetectorBank,
    Detector,
    DeviceKind,
    DeviceOp,
    ProbabilityState,
    basis_state,
    half_mirror,
    phase,
    reflector,
)
from .dsl import ExperimentDoc, ParseError, parse, serialize
from .sampling import EnsembleReport, run_ensemble
from .stats import Verdict, compare

BUILTIN_NAMES = ("bell", "ev-bomb", "h-detectors", "mach-zehnder")


class ConfigError(Exception):
    pass


def builtin(name: str) -> ExperimentDoc:
    """Canonical built-in experiments, generated fresh on every call."""
    if name == "h-detectors":
        stages = (
            half_mirror(),
            reflector(),
            DetectorBank((Detector("D1", frozenset({1})), Detector("D2", frozenset({0})))),
        )
        return ExperimentDoc(name, Apparatus(2, basis_state(2, 0), stages))
    if name == "mach-zehnder":
        stages = (
            half_mirror(),
            reflector(),
            half_mirror(),
            DetectorBank((Detector("D1", frozenset({1})), Detector("D2", frozenset({0})))),
        )
        return ExperimentDoc(name, Apparatus(2, basis_state(2, 0), stages))
    if name == "ev-bomb":
        stages = (
            half_mirror(),
            DetectorBank((Detector("D3", frozenset({1})),)),
            reflector(),
            half_mirror(),
            DetectorBank((Detector("D1", frozenset({1})), Detector("D2", frozenset({0})))),
        )
        return ExperimentDoc(name, Apparatus(2, basis_state(2, 0), stages))
    if name == "bell":
        amps = np.array([0.0, 2.0**-0.5, 2.0**-0.5, 0.0], dtype=np.complex128)
        stages = (
            DetectorBank((Detector("A0", frozenset({0, 1})), Detector("A1", frozenset({2, 3})))),
        )
        return ExperimentDoc(name, Apparatus(4, ProbabilityState(amps), stages))
    raise ConfigError(
        f"unknown builtin {name!r}; valid names: {', '.join(BUILTIN_NAMES)}"
    )


def scan_phase(
    apparatus: Apparatus, stage_index: int, points: int
) -> list[tuple[float, OutcomeDistribution]]:
    """Outcome distributions at phi = 2*pi*k/points for k = 0..points-1.

    The phase device at the 1-based stage_index is swept; if that stage is
    not a phase device, one is inserted at that position instead.  Purely
    analytic: the table is a property of the apparatus alone.
    """
    if points < 2:
        raise ConfigError("points must be at least 2")
    stages = list(apparatus.stages)
    position = stage_index - 1
    existing = (
        0 <= position < len(stages)
        and isinstance(stages[position], DeviceOp)
        and stages[position].kind is DeviceKind.PHASE
    )
    if existing:
        modes = stages[position].target_modes
    elif 0 <= position <= len(stages):
        if apparatus.n_modes < 2:
            raise ConfigError("phase scan needs at least 2 modes")
        modes = (0, 1)
    else:
        raise ConfigError(f"invalid stage index {stage_index}")

    table = []
    for k in range(points):
        phi = 2.0 * math.pi * k / points
        shifted = stages.copy()
        if existing:
            shifted[position] = phase(phi, modes)
        else:
            shifted.insert(position, phase(phi, modes))
        dist, _ = enumerate_outcomes(
            Apparatus(apparatus.n_modes, apparatus.source, tuple(shifted))
        )
        table.append((phi, dist))
    return table


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _render_json(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _fmt(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {_render_json(v)}" for k, v in sorted(value.items())
        )
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render_json(v) for v in value) + "]"
    raise TypeError(f"cannot render {type(value)!r}")


def _emit(text: str):
    sys.stdout.write(text + "\n")


def _distribution_payload(dist: OutcomeDistribution, fmt: str) -> str:
    if fmt == "json":
        return _render_json(dist.entries)
    rows = ["outcome,probability"]
    rows += [f"{label},{_fmt(p)}" for label, p in dist.entries.items()]
    return "\n".join(rows)


def _report_payload(report: EnsembleReport, fmt: str) -> str:
    if fmt == "json":
        return _render_json(
            {
                "n_trials": report.n_trials,
                "seed": report.seed,
                "counts": report.counts,
                "frequencies": report.frequencies,
                "predicted": report.predicted.entries,
                "chi_square": report.chi_square,
                "dof": report.dof,
            }
        )
    rows = ["outcome,count,frequency,predicted"]
    for label in sorted(set(report.counts) | set(report.predicted.entries)):
        rows.append(
            f"{label},{report.counts.get(label, 0)},"
            f"{_fmt(report.frequencies.get(label, 0.0))},"
            f"{_fmt(report.predicted.probability(label))}"
        )
    return "\n".join(rows)


def _verdict_payload(verdict: Verdict, fmt: str) -> str:
    if fmt == "json":
        return _render_json(
            {
                "pass": verdict.passed,
                "chi_square": verdict.chi_square,
                "dof": verdict.dof,
                "p_value": verdict.p_value,
                "per_outcome": {
                    label: {
                        "frequency": freq,
                        "predicted": pred,
                        "sigma_distance": dist,
                    }
                    for label, (freq, pred, dist) in verdict.per_outcome.items()
                },
            }
        )
    rows = ["outcome,frequency,predicted,sigma_distance"]
    for label, (freq, pred, dist) in sorted(verdict.per_outcome.items()):
        rows.append(f"{label},{_fmt(freq)},{_fmt(pred)},{_fmt(dist)}")
    return "\n".join(rows)


def _scan_payload(table, fmt: str) -> str:
    if fmt == "json":
        return _render_json(
            [{"phi": phi, "distribution": dist.entries} for phi, dist in table]
        )
    rows = ["phi,outcome,probability"]
    for phi, dist in table:
        for label, p in dist.entries.items():
            rows.append(f"{_fmt(phi)},{label},{_fmt(p)}")
    return "\n".join(rows)


def _load(args) -> ExperimentDoc:
    if args.builtin is not None:
        return builtin(args.builtin)
    try:
        with open(args.file, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.file!r}: {exc}") from exc
    return parse(text)


def cmd_run(args) -> int:
    doc = _load(args)
    if args.emit_dsl:
        sys.stdout.write(serialize(doc))
        return 0
    if args.engine == "analytic":
        dist, _ = enumerate_outcomes(doc.apparatus)
        _emit(_distribution_payload(dist, args.format))
        return 0
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1 for the sample engine")
    report = run_ensemble(doc.apparatus, args.trials, args.seed)
    _emit(_report_payload(report, args.format))
    return 0


def cmd_compare(args) -> int:
    doc = _load(args)
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    report = run_ensemble(doc.apparatus, args.trials, args.seed)
    verdict = compare(report, args.alpha)
    _emit(_verdict_payload(verdict, args.format))
    status = "PASS" if verdict.passed else "FAIL"
    print(
        f"{doc.name}: chi_square={verdict.chi_square:.4g} dof={verdict.dof} "
        f"p_value={verdict.p_value:.4g} -> {status}",
        file=sys.stderr,
    )
    return 0 if verdict.passed else 1


def cmd_scan(args) -> int:
    doc = _load(args)
    table = scan_phase(doc.apparatus, args.stage, args.points)
    _emit(_scan_payload(table, args.format))
    return 0


def _add_input_flags(sub: argparse.ArgumentParser):
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--builtin", help=f"builtin experiment: {', '.join(BUILTIN_NAMES)}")
    group.add_argument("--file", help="path to a .gmc experiment file")
    sub.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interfsim",
        description="Simulate interferometer experiments analytically or trial by trial.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="evaluate one experiment with one engine")
    _add_input_flags(run)
    run.add_argument("--engine", choices=("analytic", "sample"), default="analytic")
    run.add_argument("--trials", type=int, default=100000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--emit-dsl", action="store_true", help="print canonical DSL and exit")
    run.set_defaults(func=cmd_run)

    cmp_ = commands.add_parser("compare", help="run both engines and score the agreement")
    _add_input_flags(cmp_)
    cmp_.add_argument("--trials", type=int, default=100000)
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--alpha", type=float, default=0.001)
    cmp_.set_defaults(func=cmd_compare)

    scan = commands.add_parser("scan", help="sweep a phase stage and tabulate the fringe")
    _add_input_flags(scan)
    scan.add_argument("--stage", type=int, required=True, help="1-based stage position")
    scan.add_argument("--points", type=int, required=True, help="number of sweep points")
    scan.set_defaults(func=cmd_scan)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.snippet:
            print(f"  {exc.snippet}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
