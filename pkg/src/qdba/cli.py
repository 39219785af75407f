"""Command-line front end.

Exit codes: 0 accept/agree, 2 usage or I/O error, 3 abort, 4 insufficient
data, 5 traitor detected during agreement.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Optional, Sequence

from .adversary import AttackBasisPolicy, AttackCase
from .correlators import ALL_KEYS, estimate_all, predictions, table1_reference
from .detector import DetectorConfig, Status, Verdict, decide
from .protocol import (
    AbortedAtVerification,
    Agree,
    Equivocate,
    ForgeOrder,
    InsufficientRoundsError,
    ProtocolConfig,
    TraitorDetected,
    run_distribution,
    run_protocol,
    verify_step_iii,
)
from .records import Party, RecordFileError, RecordTable, read_records, write_records

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ABORT = 3
EXIT_INSUFFICIENT = 4
EXIT_TRAITOR = 5

_STATUS_EXIT = {Status.ACCEPT: EXIT_OK, Status.ABORT: EXIT_ABORT, Status.INSUFFICIENT: EXIT_INSUFFICIENT}

DEFAULTS = {
    "rounds": 100_000,
    "attack": "none",
    "attack_basis": "z",
    "p_z": 0.5,
    "seed": 0,
    "threshold_sigma": 4.0,
    "min_samples": 200,
    "sample_fraction": 0.1,
    "records": None,
    "report": None,
    "workers": 1,
    "order": 1,
    "traitor": "none",
    "strategy": "auto",
}
_CONVERT = {
    "rounds": int,
    "p_z": float,
    "seed": int,
    "threshold_sigma": float,
    "min_samples": int,
    "sample_fraction": float,
    "workers": int,
    "order": int,
}


class UsageError(Exception):
    pass


def load_config_file(path: str) -> dict:
    """Read ``key = value`` lines; keys use flag spelling with or without dashes."""
    values = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Flags win over the config file, which wins over built-in defaults."""
    from_file = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key, default in DEFAULTS.items():
        if not hasattr(args, key):
            continue
        if getattr(args, key) is not None:
            continue
        value = from_file.get(key, default)
        if isinstance(value, str) and key in _CONVERT:
            try:
                value = _CONVERT[key](value)
            except ValueError:
                raise UsageError(f"bad value for {key}: {value!r}") from None
        setattr(args, key, value)
    return args


def _validate(args: argparse.Namespace) -> None:
    if hasattr(args, "rounds") and args.rounds < 1:
        raise UsageError("--rounds must be at least 1")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if hasattr(args, "p_z") and not 0 <= args.p_z <= 1:
        raise UsageError("--p-z must lie in [0, 1]")
    if not 0 <= args.sample_fraction <= 1:
        raise UsageError("--sample-fraction must lie in [0, 1]")
    if not args.threshold_sigma > 0:
        raise UsageError("--threshold-sigma must be positive")
    if args.min_samples < 1:
        raise UsageError("--min-samples must be at least 1")
    if hasattr(args, "attack") and str(args.attack).lower() not in ("none", "i", "ii", "iii"):
        raise UsageError(f"--attack must be one of none, i, ii, iii (got {args.attack})")
    if hasattr(args, "attack_basis") and str(args.attack_basis).lower() not in ("z", "x", "random"):
        raise UsageError(f"--attack-basis must be one of z, x, random (got {args.attack_basis})")
    if hasattr(args, "workers") and args.workers < 1:
        raise UsageError("--workers must be at least 1")


def _attack(args) -> tuple[AttackCase, AttackBasisPolicy]:
    basis = str(args.attack_basis).lower()
    if basis == "random":
        policy = AttackBasisPolicy.random(args.p_z)
    else:
        policy = AttackBasisPolicy.always(basis)
    return AttackCase.parse(str(args.attack)), policy


def _detector(args) -> DetectorConfig:
    return DetectorConfig(threshold_sigma=args.threshold_sigma, min_samples_per_key=args.min_samples)


# reports ----------------------------------------------------------------


def _frac(x: float) -> str:
    return str(Fraction(x).limit_denominator(1000))


def _z(z: float) -> str:
    return "inf" if z == float("inf") else f"{z:.2f}"


def correlator_report(table: RecordTable, verdict: Verdict, config: DetectorConfig, estimates=None) -> str:
    estimates = estimates or estimate_all(table)
    pred = predictions()
    lines = [
        "correlator check against the invariant four-qubit state",
        f"rounds: {len(table)}",
        f"threshold_sigma: {config.threshold_sigma:g}  min_samples: {config.min_samples_per_key}",
        "",
        f"{'key':<9} {'estimate':>9} {'stderr':>8} {'n':>7} {'predicted':>9} {'z':>7}",
    ]
    flagged = set(verdict.violated_keys)
    for key in ALL_KEYS:
        e = estimates[key]
        mark = "  <-- violation" if key in flagged else ""
        lines.append(
            f"{str(key):<9} {e.value:>9.5f} {e.stderr:>8.5f} {e.n:>7d} {_frac(pred[key]):>9} "
            f"{_z(verdict.z_scores[key]):>7}{mark}"
        )
    lines.append("")
    lines.append(f"spot check: {verdict.list_checked} positions, {len(verdict.list_violations)} violations")
    key, z = verdict.max_z
    lines.append(f"max z: {_z(z)} at {key}")
    if verdict.insufficient_keys:
        lines.append("insufficient samples: " + ", ".join(map(str, verdict.insufficient_keys)))
    if verdict.violations:
        lines.append("violations: " + ", ".join(map(str, verdict.violated_keys)))
    lines.append(f"VERDICT={verdict.status.value}")
    return "\n".join(lines) + "\n"


def _emit(report: str, path: Optional[str]) -> None:
    sys.stdout.write(report)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report)


def _check_writable(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        try:
            with open(p, "a", encoding="utf-8"):
                pass
        except OSError as exc:
            raise UsageError(f"cannot write {p}: {exc.strerror}") from None


# commands ---------------------------------------------------------------


def _analyze_table(table: RecordTable, args) -> tuple[int, str]:
    config = _detector(args)
    try:
        verdict = verify_step_iii(table, args.sample_fraction, config, args.seed)
    except InsufficientRoundsError as exc:
        return EXIT_INSUFFICIENT, f"insufficient data: {exc}\nVERDICT={Status.INSUFFICIENT.value}\n"
    return _STATUS_EXIT[verdict.status], correlator_report(table, verdict, config)


def cmd_simulate(args) -> int:
    _check_writable(args.records, args.report)
    transcript = run_distribution(args.rounds, _attack(args), args.seed, args.workers)
    if args.records:
        write_records(args.records, transcript.table)
    code, report = _analyze_table(transcript.table, args)
    _emit(report, args.report)
    return code


def cmd_analyze(args) -> int:
    path = args.path or args.records
    if not path:
        raise UsageError("analyze needs a record file")
    _check_writable(args.report)
    try:
        table = read_records(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except RecordFileError as exc:
        raise UsageError(f"{path}: {exc}") from None
    code, report = _analyze_table(table, args)
    _emit(report, args.report)
    return code


def table1_report(config: DetectorConfig = DetectorConfig()) -> tuple[Verdict, str]:
    rows = table1_reference()
    verdict = decide([r.as_estimate() for r in rows], {r.key: float(r.theory) for r in rows}, config)
    lines = [
        "Published correlator table: measured values vs the invariant-state prediction",
        f"threshold_sigma: {config.threshold_sigma:g}",
        "",
        f"{'key':<9} {'measured':>15} {'predicted':>9} {'z':>6}",
    ]
    for r in rows:
        lines.append(f"{str(r.key):<9} {f'{r.value:g} ± {r.error:g}':>15} {str(r.theory):>9} {_z(verdict.z_scores[r.key]):>6}")
    key, z = verdict.max_z
    lines += ["", f"max z: {_z(z)} at {key}"]
    if verdict.violations:
        lines.append("violations: " + ", ".join(map(str, verdict.violated_keys)))
    lines.append(f"VERDICT={verdict.status.value}")
    return verdict, "\n".join(lines) + "\n"


def cmd_table1(args) -> int:
    _check_writable(args.report)
    verdict, report = table1_report(_detector(args))
    _emit(report, args.report)
    return _STATUS_EXIT[verdict.status]


def _describe(outcome) -> str:
    if isinstance(outcome, Agree):
        return f"Agree({outcome.order})"
    if isinstance(outcome, TraitorDetected):
        tail = f", keeps order {outcome.order}" if outcome.order is not None else ""
        return f"TraitorDetected({outcome.party.value}{tail})"
    if isinstance(outcome, AbortedAtVerification):
        return "AbortedAtVerification(" + ", ".join(map(str, outcome.violations)) + ")"
    return repr(outcome)


def _strategy(name: str, traitor: Optional[Party]):
    name = name.lower()
    if traitor is None or name == "auto":
        return None
    if name == "equivocate":
        return Equivocate()
    if name == "forge":
        return ForgeOrder()
    raise UsageError(f"unknown strategy {name!r} (auto, equivocate, forge)")


def cmd_protocol(args) -> int:
    _check_writable(args.report)
    case, policy = _attack(args)
    traitor = None if str(args.traitor).lower() == "none" else Party.parse(str(args.traitor))
    if args.order not in (0, 1):
        raise UsageError("--order must be 0 or 1")
    if case.traitor is not None and traitor not in (None, case.traitor):
        raise UsageError(f"attack {case.value} is carried out by {case.traitor.value}, not {traitor.value}")
    config = ProtocolConfig(
        rounds=args.rounds,
        case=case,
        policy=policy,
        seed=args.seed,
        order=args.order,
        traitor=traitor,
        strategy=_strategy(args.strategy, traitor or case.traitor),
        detector=_detector(args),
        sample_fraction=args.sample_fraction,
        workers=args.workers,
    )
    try:
        result = run_protocol(config)
    except InsufficientRoundsError as exc:
        _emit(f"insufficient data: {exc}\nVERDICT={Status.INSUFFICIENT.value}\n", args.report)
        return EXIT_INSUFFICIENT
    t = config.traitor or case.traitor
    v = result.verdict
    lines = [
        "detectable Byzantine agreement run",
        f"rounds: {config.rounds}  seed: {config.seed}  order: {config.order}",
        f"traitor: {t.value if t else 'none'}  attack: {case.value}"
        + (f" ({policy})" if case is not AttackCase.NONE else ""),
        "",
        f"verification: spot-checked {v.list_checked} positions, {len(v.list_violations)} violations; "
        f"correlator check {'passed' if not v.violations else 'failed'}",
    ]
    if v.violations:
        lines.append("violated correlators: " + ", ".join(map(str, v.violated_keys)))
    if result.lists is not None:
        lines.append(f"list length: {len(result.lists)} (after removing checked positions)")
    for p in Party:
        if p in result.outcomes:
            lines.append(f"{p.value}: {_describe(result.outcomes[p])}")
    lines.append(f"VERDICT={v.status.value}")
    _emit("\n".join(lines) + "\n", args.report)

    if v.status is not Status.ACCEPT:
        return _STATUS_EXIT[v.status]
    if any(isinstance(o, TraitorDetected) for o in result.outcomes.values()):
        return EXIT_TRAITOR
    return EXIT_OK


# parser -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, simulate: bool) -> None:
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold-sigma", type=float)
    p.add_argument("--min-samples", type=int)
    p.add_argument("--sample-fraction", type=float)
    p.add_argument("--report", help="also write the report here")
    if simulate:
        p.add_argument("--rounds", type=int)
        p.add_argument("--attack", type=str.lower, choices=["none", "i", "ii", "iii"])
        p.add_argument("--attack-basis", type=str.lower, choices=["z", "x", "random"])
        p.add_argument("--p-z", type=float)
        p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdba", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate distribution rounds and run the correlator check")
    _common(p, simulate=True)
    p.add_argument("--records", help="write the round records here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="check a record file")
    p.add_argument("path", nargs="?")
    _common(p, simulate=False)
    p.add_argument("--records", help="record file (alternative to the positional path)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("table1", help="re-analyze the published correlator table")
    _common(p, simulate=False)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("protocol", help="run distribution, verification and agreement")
    _common(p, simulate=True)
    p.add_argument("--order", type=int, help="commander's order, 0 or 1")
    p.add_argument("--traitor", type=str.lower, choices=["none", "a", "b", "c"])
    p.add_argument("--strategy", type=str.lower, choices=["auto", "equivocate", "forge"])
    p.set_defaults(func=cmd_protocol)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve(args)
        _validate(args)
        return args.func(args)
    except UsageError as exc:
        print(f"qdba: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"qdba: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
