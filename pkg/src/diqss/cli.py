"""Command-line front end.

Exit status: 0 success, 1 failed verification (or an abort under --strict),
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterator, TextIO

import yaml

from . import analysis, bitcore, quantum
from .bitcore import BitString, Partition
from .noise import NoiseParams, qber_decoherence, qber_loss, qber_total
from .protocol import ProtocolConfig, describe_branch, execute

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- config files ---------------------------------------------------------

CONFIG_DEFAULTS: dict[str, Any] = {
    "rounds": 100_000,
    "gamma": 0.2,
    "abort_threshold": 0.02,
    "fidelity": 1.0,
    "efficiency": 1.0,
    "seed": 42,
    "partition": [1, 3, 3],
}


def _number(key: str, value: Any, kind: type) -> Any:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def load_config(path: Path, seed: int | None = None) -> ProtocolConfig:
    """Read a YAML (or JSON) run config; missing keys take the defaults."""
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of keys to values")
    unknown = sorted(set(raw) - set(CONFIG_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(map(str, unknown))}")
    values = {**CONFIG_DEFAULTS, **raw}
    if seed is not None:
        values["seed"] = seed
    partition = values["partition"]
    if not isinstance(partition, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in partition):
        raise ConfigError(f"partition: expected a list of integers, got {partition!r}")
    try:
        return ProtocolConfig(
            rounds=_number("rounds", values["rounds"], int),
            test_fraction=_number("gamma", values["gamma"], float),
            abort_threshold=_number("abort_threshold", values["abort_threshold"], float),
            partition=Partition(tuple(partition)),
            noise=NoiseParams(
                _number("fidelity", values["fidelity"], float),
                _number("efficiency", values["efficiency"], float),
            ),
            master_seed=_number("seed", values["seed"], int),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --- verify ---------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


Circuit = Callable[[quantum.StateVector, BitString], quantum.StateVector]


def _circuit(fault: str | None) -> Circuit:
    if fault == "unconditional-s":
        return lambda state, x: quantum.apply_inputs(state, x, conditional_phase=False)
    return quantum.apply_inputs


def check_key_equivalence(max_n: int) -> CheckResult:
    for n in range(3, max_n + 1):
        found = bitcore.key_equivalence_counterexample(n)
        if found:
            x, y, p = found
            return CheckResult("key-equivalence", False, f"counterexample n={n} x={x} y={y} partition={p.sizes}")
    return CheckResult("key-equivalence", True, f"no counterexample for n=3..{max_n}")


def check_ratio(max_n: int) -> CheckResult:
    try:
        rows = analysis.ratio_scan(1, max_n)
    except ArithmeticError as exc:
        return CheckResult("ratio", False, str(exc))
    return CheckResult("ratio", True, f"enumeration equals closed form for n=1..{max_n} (n={max_n}: {rows[-1].brute})")


def check_ratio_maximum() -> CheckResult:
    best, where = analysis.closed_form_maximum(3, 64)
    ok = best == Fraction(9, 16) and where == [7, 8]
    return CheckResult("ratio-maximum", ok, f"max over n=3..64 is {float(best)} at n={where}")


def check_perfect_win(max_n: int, circuit: Circuit) -> CheckResult:
    for n in range(3, max_n + 1):
        ghz = quantum.prepare_ghz(quantum.GhzLabel.plus(n))
        for x in bitcore.iter_bitstrings(n):
            if not bitcore.valid_input(x):
                continue
            for y in quantum.support(circuit(ghz, x)):
                if not bitcore.wins_game(x, y):
                    return CheckResult("perfect-win", False, f"losing output n={n} x={x} y={y}")
    return CheckResult("perfect-win", True, f"every supported output wins for n=3..{max_n}")


def check_reduced_views() -> CheckResult:
    views = [quantum.reduced_views(j) for j in range(1, 6)]
    equal = [v.j for v in views if v.equal]
    j3 = views[2]
    return CheckResult("reduced-views", equal == [3], f"equal views for j={equal}; distance at j=3 = {j3.distance!r}")


def check_classical(max_n: int) -> tuple[CheckResult, list[str]]:
    notes, ok, parts = [], True, []
    for n in range(3, min(max_n, 5) + 1):
        rep = bitcore.classical_bound_report(n)
        ok &= rep.optimum == rep.ceil_formula
        parts.append(f"n={n}: {rep.optimum}")
        if not rep.floor_formula_consistent:
            notes.append(
                f"NOTE classical n={n}: brute-force optimum {rep.optimum} differs from "
                f"1/2 + 2^-floor(n/2) = {rep.floor_formula}; matches 1/2 + 2^-ceil(n/2)"
            )
    if max_n >= 3:
        ok &= bitcore.classical_optimum(3) == Fraction(3, 4)
    return CheckResult("classical", ok, "; ".join(parts)), notes


def run_verify(max_n: int, fault: str | None = None, out: TextIO = sys.stdout) -> bool:
    classical, notes = check_classical(max_n)
    results = [
        check_key_equivalence(max_n),
        check_ratio(max_n),
        check_ratio_maximum(),
        check_perfect_win(max_n, _circuit(fault)),
        check_reduced_views(),
        classical,
    ]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}", file=out)
    for note in notes:
        print(note, file=out)
    failed = [r.name for r in results if not r.passed]
    print(f"verify: {len(results) - len(failed)}/{len(results)} checks passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""), file=out)
    return not failed


# --- simulate -------------------------------------------------------------

def _fmt(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def render_report(report) -> str:
    lines = [
        f"seed: {report.seed_echo}",
        f"rounds_total: {report.rounds_total}",
        f"rounds_sifted: {report.rounds_sifted}",
        f"rounds_tested: {report.rounds_tested}",
        f"empirical_win_rate: {_fmt(report.empirical_win_rate)}",
        f"aborted: {_fmt(report.aborted)}",
        f"abort_reason: {_fmt(report.abort_reason)}",
        f"key_length: {len(report.key) if report.key is not None else 0}",
        f"key_error_rate: {_fmt(report.key_error_rate)}",
    ]
    cfg = report.config
    lines.append(
        "config: " + ", ".join(f"{k}={_fmt(v) if not isinstance(v, list) else v}" for k, v in cfg.items())
    )
    return "\n".join(lines) + "\n"


def write_round_log(run, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "x", "y", "branch", "sifted", "in_test_set", "won"])
        for r in run.records():
            writer.writerow([r.index, r.x, r.y, describe_branch(r.branch),
                             int(r.sifted), int(r.in_test_set), int(r.won)])


# --- tables ---------------------------------------------------------------

def parse_grid(spec: str) -> list[float]:
    """``A:B:STEP`` to an inclusive grid, rounded to 12 decimals."""
    try:
        a, b, step = (float(p) for p in spec.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like A:B:STEP, got {spec!r}") from None
    if not step > 0 or b < a:
        raise argparse.ArgumentTypeError("grid needs STEP > 0 and A <= B")
    count = math.floor((b - a) / step + 1e-9) + 1
    grid = [round(a + i * step, 12) for i in range(count)]
    if grid[0] < 0 or grid[-1] > 1:
        raise argparse.ArgumentTypeError("efficiency grid must lie within [0, 1]")
    return grid


def _csv_rows(header: list[str], rows: Iterator[list[Any]], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, Fraction)) else v for v in row])


def table_ratio(n_min: int, n_max: int, out: TextIO) -> None:
    rows = analysis.ratio_scan(n_min, n_max)
    _csv_rows(["n", "brute_ratio", "closed_ratio"], ([r.n, r.brute, r.closed] for r in rows), out)


def table_qber(fidelity: float, grid: list[float], out: TextIO) -> None:
    def rows():
        for eta in grid:
            p = NoiseParams(fidelity, eta)
            yield [eta, qber_decoherence(p), qber_loss(p), qber_total(p)]
    _csv_rows(["eta", "Q1", "Q2", "Q"], rows(), out)


def table_keyrate(fidelity: float, grid: list[float], out: TextIO, err: TextIO) -> None:
    curve = analysis.keyrate_curve(fidelity, grid)
    _csv_rows(["eta", "Q", "r"], ([r.eta, r.qber, r.rate] for r in curve.rows), out)
    if curve.bracket:
        print(f"# sign change between eta={curve.bracket[0]!r} and eta={curve.bracket[1]!r}", file=err)
    if curve.threshold:
        t = curve.threshold
        print(f"# threshold eta*={t.efficiency!r} (approximation (0.78/F)^(1/7)={t.approximation!r})", file=err)
    else:
        print(f"# no efficiency gives a positive key rate at F={fidelity!r}", file=err)


def table_advantage(alpha: float, beta: float, out: TextIO) -> None:
    _csv_rows(["alpha", "beta", "advantage"], iter([[alpha, beta, analysis.advantage(alpha, beta)]]), out)


# --- argument parsing -----------------------------------------------------

def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diqss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the exhaustive and exact-simulation checks")
    v.add_argument("--max-n", type=int, required=True)
    v.add_argument("--fault", choices=["unconditional-s"], help="negative control: break the circuit")

    s = sub.add_parser("simulate", help="run the protocol from a config file")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", type=Path, help="write the JSON report here")
    s.add_argument("--log", type=Path, help="write a per-round CSV log here")
    s.add_argument("--strict", action="store_true", help="exit 1 when the run aborts")
    s.add_argument("--workers", type=int, default=1)

    t = sub.add_parser("tables", help="emit CSV tables")
    tsub = t.add_subparsers(dest="kind", required=True)
    r = tsub.add_parser("ratio")
    r.add_argument("n_min", type=int)
    r.add_argument("n_max", type=int)
    for kind in ("qber", "keyrate"):
        k = tsub.add_parser(kind)
        k.add_argument("--fidelity", type=_unit, required=True)
        k.add_argument("--eta-grid", type=parse_grid, required=True)
    a = tsub.add_parser("advantage")
    a.add_argument("--alpha", type=float, required=True)
    a.add_argument("--beta", type=float, required=True)
    return parser


def main(argv: list[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    def usage(msg: str) -> int:
        print(f"diqss: error: {msg}", file=err)
        return EXIT_USAGE

    if args.command == "verify":
        if not 3 <= args.max_n <= 10:
            return usage("--max-n must lie in 3..10")
        return EXIT_OK if run_verify(args.max_n, args.fault, out) else EXIT_FAIL

    if args.command == "simulate":
        if args.workers < 1:
            return usage("--workers must be at least 1")
        try:
            config = load_config(args.config, args.seed)
        except ConfigError as exc:
            return usage(str(exc))
        run = execute(config, args.workers)
        out.write(render_report(run.report))
        if args.out:
            args.out.write_text(json.dumps(run.report.to_dict(), indent=2, sort_keys=True) + "\n")
        if args.log:
            write_round_log(run, args.log)
        return EXIT_FAIL if args.strict and run.report.aborted else EXIT_OK

    try:
        if args.kind == "ratio":
            table_ratio(args.n_min, args.n_max, out)
        elif args.kind == "qber":
            table_qber(args.fidelity, args.eta_grid, out)
        elif args.kind == "keyrate":
            table_keyrate(args.fidelity, args.eta_grid, out, err)
        else:
            table_advantage(args.alpha, args.beta, out)
    except ValueError as exc:
        return usage(str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
