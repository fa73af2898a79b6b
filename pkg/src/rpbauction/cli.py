"""Command line entry point: run sweeps from config files, show a demo auction, run the oracle suite."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from rpbauction.errors import GenerationError, ParameterError
from rpbauction.mechanism import MechanismKind, run_mechanism
from rpbauction.model import GeneratorParams, generate_campaign
from rpbauction.simulator import (
    AXES,
    SCENARIO_DEFAULTS,
    AggregateRow,
    ResultRow,
    ScenarioConfig,
    aggregate,
    run_scenario,
)

ROW_HEADER = ("mechanism", "axis", "value", "rep", "seed", "clearance_rate", "n_primary",
              "n_redundancy", "n_secondary", "payments", "budget", "runtime_ms")
AGGREGATE_HEADER = ("mechanism", "axis", "value", "cr_mean", "cr_std", "payments_mean", "budget_mean")

_TOP_KEYS = {"sweep_axis", "sweep_values", "mechanisms", "n_participants", "n_tasks", "repetitions",
             "master_seed", "generator", "output"}
_GENERATOR_KEYS = {"area_width", "area_height", "interest_radius", "task_value_range",
                   "collective_bid_range", "alpha", "reputation_range"}
_OUTPUT_KEYS = {"path", "format", "aggregate"}
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, source: str = "<config>"):
        self.key = key
        super().__init__(f"{source}: `{key}`: {message}")


@dataclass(frozen=True)
class OutputOptions:
    path: str | None = None
    format: str = "csv"
    aggregate: bool = False


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def _load_document(data: bytes | str, source: str) -> dict:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    if text.lstrip().startswith("{") or source.endswith(".json"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"malformed JSON at line {exc.lineno} col {exc.colno}: {exc.msg}",
                              source) from exc
    else:
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<document>", f"malformed TOML: {exc}", source) from exc
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a table/object", source)
    return doc


def _check_keys(table: Mapping, allowed: set[str], prefix: str, source: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(prefix + key, "unknown key", source)


def _int(doc: Mapping, key: str, default: int, source: str, prefix: str = "", minimum: int = 0) -> int:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(prefix + key, f"expected an integer, got {value!r}", source)
    if value < minimum:
        raise ConfigError(prefix + key, f"must be >= {minimum}, got {value}", source)
    return value


def _number(doc: Mapping, key: str, default: float, source: str, prefix: str) -> float:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(prefix + key, f"expected a number, got {value!r}", source)
    return float(value)


def _range(doc: Mapping, key: str, default: tuple[float, float], source: str, prefix: str) -> tuple[float, float]:
    value = doc.get(key, default)
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        raise ConfigError(prefix + key, f"expected [min, max], got {value!r}", source)
    lo, hi = float(value[0]), float(value[1])
    if lo > hi:
        raise ConfigError(prefix + key, f"min > max in {value!r}", source)
    return lo, hi


def parse_config(data: bytes | str, source: str = "<config>") -> tuple[ScenarioConfig, OutputOptions]:
    """Parse a TOML or JSON scenario document, filling unspecified fields with the axis defaults."""
    doc = _load_document(data, source)
    _check_keys(doc, _TOP_KEYS, "", source)

    axis = doc.get("sweep_axis")
    if axis not in AXES:
        raise ConfigError("sweep_axis", f"must be one of {list(AXES)}, got {axis!r}", source)
    default_values, default_n, default_m = SCENARIO_DEFAULTS[axis]

    values = doc.get("sweep_values", list(default_values))
    if (not isinstance(values, list) or not values
            or any(isinstance(v, bool) or not isinstance(v, int) for v in values)):
        raise ConfigError("sweep_values", "expected a non-empty list of integers", source)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep_values", "must be strictly increasing", source)
    if values[0] < 1:
        raise ConfigError("sweep_values", "must be positive", source)

    tags = doc.get("mechanisms", ["TSCM-RA", "2SB-RA", "RPB-RA"])
    if not isinstance(tags, list) or not tags:
        raise ConfigError("mechanisms", "expected a non-empty list of mechanism tags", source)
    try:
        mechanisms = tuple(MechanismKind.parse(str(t)) for t in tags)
    except ValueError as exc:
        raise ConfigError("mechanisms", str(exc), source) from None

    gen_doc = doc.get("generator", {})
    if not isinstance(gen_doc, dict):
        raise ConfigError("generator", "expected a table", source)
    _check_keys(gen_doc, _GENERATOR_KEYS, "generator.", source)
    base = GeneratorParams()
    p = "generator."
    generator = GeneratorParams(
        area_width=_number(gen_doc, "area_width", base.area_width, source, p),
        area_height=_number(gen_doc, "area_height", base.area_height, source, p),
        interest_radius=_number(gen_doc, "interest_radius", base.interest_radius, source, p),
        task_value_range=_range(gen_doc, "task_value_range", base.task_value_range, source, p),
        collective_bid_range=_range(gen_doc, "collective_bid_range", base.collective_bid_range, source, p),
        alpha=_number(gen_doc, "alpha", base.alpha, source, p),
        reputation_range=_range(gen_doc, "reputation_range", base.reputation_range, source, p),
    )
    try:
        generator.validate()
    except ParameterError as exc:
        raise ConfigError("generator", str(exc), source) from None

    out_doc = doc.get("output", {})
    if not isinstance(out_doc, dict):
        raise ConfigError("output", "expected a table", source)
    _check_keys(out_doc, _OUTPUT_KEYS, "output.", source)
    fmt = out_doc.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError("output.format", f"must be one of {list(FORMATS)}, got {fmt!r}", source)
    agg = out_doc.get("aggregate", False)
    if not isinstance(agg, bool):
        raise ConfigError("output.aggregate", f"expected a boolean, got {agg!r}", source)
    path = out_doc.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path", f"expected a string, got {path!r}", source)

    master_seed = _int(doc, "master_seed", 0, source)
    if master_seed >= 2**64:
        raise ConfigError("master_seed", "must fit in 64 bits", source)
    try:
        config = ScenarioConfig(
            sweep_axis=axis,
            sweep_values=tuple(values),
            mechanisms=mechanisms,
            fixed_n_participants=_int(doc, "n_participants", default_n, source, minimum=1),
            fixed_n_tasks=_int(doc, "n_tasks", default_m, source, minimum=1),
            repetitions=_int(doc, "repetitions", 30, source, minimum=1),
            master_seed=master_seed,
            generator=generator,
        )
    except ParameterError as exc:
        raise ConfigError("<scenario>", str(exc), source) from None
    return config, OutputOptions(path=path, format=fmt, aggregate=agg)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _field_names(rows: Sequence[ResultRow | AggregateRow]) -> tuple[str, ...]:
    if rows and isinstance(rows[0], AggregateRow):
        return AGGREGATE_HEADER
    return ROW_HEADER


def render(rows: Sequence[ResultRow | AggregateRow], fmt: str) -> str:
    header = _field_names(rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([_fmt(getattr(r, name)) for name in header])
        return buf.getvalue()
    if fmt == "json":
        # full precision so the document round-trips
        return json.dumps([{name: getattr(r, name) for name in header} for r in rows], indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows: Sequence[ResultRow | AggregateRow], fmt: str, destination: str | Path | None) -> str:
    """Write rows (or aggregates) as CSV or JSON to ``destination``; ``None`` or ``-`` means stdout."""
    text = render(rows, fmt)
    if destination is None or str(destination) == "-":
        sys.stdout.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")
    return text


def load_rows_json(text: str) -> list[ResultRow | AggregateRow]:
    items = json.loads(text)
    out: list[ResultRow | AggregateRow] = []
    for item in items:
        cls = AggregateRow if "cr_mean" in item else ResultRow
        out.append(cls(**item))
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_run(args: argparse.Namespace) -> int:
    path = args.config_path or args.config
    if not path:
        print("error: a config file is required (positional or --config)", file=sys.stderr)
        return 2
    try:
        config, output = parse_config(Path(path).read_bytes(), source=str(path))
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    changes: dict[str, Any] = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.mechanisms:
        try:
            changes["mechanisms"] = tuple(MechanismKind.parse(t) for t in args.mechanisms.split(",") if t)
        except ValueError as exc:
            print(f"error: --mechanisms: {exc}", file=sys.stderr)
            return 2
    try:
        config = dataclasses.replace(config, **changes)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    fmt = args.format or output.format
    do_aggregate = args.aggregate or output.aggregate
    destination = args.out or output.path

    try:
        rows = run_scenario(config, jobs=args.jobs)
    except (GenerationError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = aggregate(rows) if do_aggregate else rows
    try:
        emit_results(result, fmt, destination)
    except OSError as exc:
        print(f"error: cannot write {destination}: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_demo(args: argparse.Namespace) -> int:
    params = GeneratorParams(n_participants=args.participants, n_tasks=args.tasks,
                             area_width=args.area, area_height=args.area, seed=args.seed)
    try:
        campaign = generate_campaign(params)
        kind = MechanismKind.parse(args.mechanism)
    except (GenerationError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    outcome = run_mechanism(campaign, kind)
    if args.json:
        json.dump({"campaign": campaign.to_dict(), "outcome": outcome.to_dict()}, sys.stdout, indent=1)
        sys.stdout.write("\n")
        return 0

    print(f"{kind.tag}: {campaign.n_participants} participants, {campaign.n_tasks} tasks, "
          f"total value {campaign.total_value:.3f}")
    for p in campaign.participants:
        print(f"  participant {p.id:>3}  r={p.reputation:.3f}  bid={p.collective_bid:.3f}  "
              f"tasks={list(p.interest_set)}")
    print("stage trace:")
    for rec in outcome.stage_trace:
        budget = "" if rec.budget is None else f"  budget={rec.budget:.3f}"
        verdict = "admit" if rec.admitted else "stop"
        print(f"  {rec.stage:<10} {rec.participant:>3}  score={rec.score:8.3f}  value={rec.value:7.3f}  "
              f"bid/w={rec.bid_term:7.3f}{budget}  {verdict}")
    print(f"primary    {list(outcome.primary.winners)}")
    print(f"redundancy {list(outcome.redundancy.winners)}")
    print(f"secondary  {dict(outcome.secondary.assignments)}")
    paid = {k: round(v, 4) for k, v in outcome.payments.payments.items() if v}
    print(f"payments   {paid}")
    print(f"clearance rate {outcome.clearance_rate:.3f}, remaining budget {outcome.remaining_budget:.3f}")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    from rpbauction.oracle import run_suite

    failures = run_suite(args.campaigns, seed=args.seed)
    for line in failures:
        print(line)
    print(f"oracle: {args.campaigns} campaigns, {len(failures)} mismatches")
    return 0 if not failures else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpbauction", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario sweep described by a TOML/JSON config")
    run.add_argument("config_path", nargs="?", help="scenario config file")
    run.add_argument("--config", help="scenario config file (alternative to the positional)")
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--out", help="output path (default: config output.path, else stdout)")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--aggregate", action="store_true", help="emit per-point mean/std instead of raw rows")
    run.add_argument("--mechanisms", help="comma-separated tags, e.g. TSCM-RA,2SB-RA,RPB-RA")
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=_cmd_run)

    demo = sub.add_parser("demo", help="run one small campaign and print the full stage trace")
    demo.add_argument("--seed", type=int, default=7)
    demo.add_argument("--participants", type=int, default=8)
    demo.add_argument("--tasks", type=int, default=12)
    demo.add_argument("--area", type=float, default=150.0, help="side of the square area in meters")
    demo.add_argument("--mechanism", default="RPB-RA")
    demo.add_argument("--json", action="store_true", help="dump campaign and outcome as JSON")
    demo.set_defaults(func=_cmd_demo)

    oracle = sub.add_parser("oracle", help="cross-check the mechanisms against the reference implementation")
    oracle.add_argument("--campaigns", type=int, default=200)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
