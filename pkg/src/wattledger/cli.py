"""Command-line front end: ingest -> diagnose -> estimate -> analyze -> report.

Exit status is 0 on success, 1 on usage errors and 2 on data errors (parse
failures, coverage gaps, failed report validation). Results go to the output
stream; diagnostics and warnings always go to the diagnostic stream.

Every flag can also be set from a JSON config file (``--config`` or the
``WATTLEDGER_CONFIG`` environment variable). Top-level keys apply to every
subcommand that has the flag; a key named after a subcommand holds settings
for that subcommand only. Command-line flags override the file.
"""

from __future__ import annotations

import argparse
import contextvars
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import IO, Callable, Sequence

from . import __version__
from .carbon import Alignment, emissions_constant, emissions_timeseries, parse_intensity_csv
from .errors import DataError, ReportValidationError, WattLedgerError
from .estimation import (
    EnergyEstimate,
    IdleBaseline,
    apply_pue,
    declared_baseline,
    estimate_idle_baseline,
    integrate,
    marginal_energy,
    standardize_to_reference,
)
from .proxy import (
    CalibrationFactor,
    SystemDescriptor,
    apply_calibration,
    energy_from_utilization,
    load_catalog,
    load_loadline,
    select_loadline,
    tdp_energy_bound,
)
from .report import MeasurementReport, RuntimeOverHardware, render
from .simtrace import WorkloadSpec, generate
from .stats import RunSet, check_sampling, compare, summarize
from .telemetry import (
    PowerTrace,
    SampleKind,
    decode_cumulative_counter,
    diagnose,
    parse_device_monitor_table,
    parse_power_csv,
    parse_utilization_csv,
    write_power_csv,
)

CONFIG_ENV = "WATTLEDGER_CONFIG"
SUBCOMMANDS = (
    "validate", "integrate", "baseline", "marginal", "proxy",
    "carbon", "compare", "simulate", "report",
)


class UsageError(WattLedgerError):
    pass


_HELP_STREAM: contextvars.ContextVar[IO[str] | None] = contextvars.ContextVar(
    "help_stream", default=None
)


class _Parser(argparse.ArgumentParser):
    def _print_message(self, message, file=None):
        # --help and --version go to the caller's stdout, not the process one
        target = _HELP_STREAM.get()
        if message:
            (target or file or sys.stdout).write(message)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_help()}")

    def exit(self, status=0, message=None):
        if status:
            raise UsageError(message or "")
        if message:
            self._print_message(message)
        raise _CleanExit()


class _CleanExit(Exception):
    pass


class _Once(argparse.Action):
    """Store a value; giving the same flag twice is a usage error."""

    def __call__(self, parser, namespace, values, option_string=None):
        seen = namespace.__dict__.setdefault("_given", set())
        if self.dest in seen:
            parser.error(f"{option_string} given more than once")
        seen.add(self.dest)
        setattr(namespace, self.dest, values)


class _OnceFlag(_Once):
    def __init__(self, option_strings, dest, **kwargs):
        kwargs.setdefault("default", False)
        super().__init__(option_strings, dest, nargs=0, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        super().__call__(parser, namespace, True, option_string)


class _Many(argparse.Action):
    """Repeatable flag; command-line values replace (not extend) config values."""

    def __call__(self, parser, namespace, values, option_string=None):
        seen = namespace.__dict__.setdefault("_given", set())
        current = getattr(namespace, self.dest) if self.dest in seen else []
        seen.add(self.dest)
        setattr(namespace, self.dest, list(current) + [values])


def _method(text: str) -> str:
    text = text.replace("-", "_")
    if text not in ("zero_order", "trapezoid"):
        raise argparse.ArgumentTypeError("method must be zero-order or trapezoid")
    return text


def _add_common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--config", action=_Once, metavar="PATH", help="JSON config file")
    p.add_argument("--jobs", action=_Once, type=int, default=1, metavar="N",
                   help="parallel workers over independent inputs (default 1)")
    if out:
        p.add_argument("--out", action=_Once, default="-", metavar="PATH",
                       help="output file ('-' for standard output)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")


def _add_trace_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trace", action=_Many, default=[], metavar="PATH",
                   help="power trace CSV ('-' for standard input); repeatable")
    p.add_argument("--unit", action=_Once, help="unit for files without a unit column")
    p.add_argument("--dialect", action=_Once, default="canonical",
                   choices=("canonical", "gpu_smi_csv", "generic"))
    p.add_argument("--decode-counter", action=_OnceFlag,
                   help="decode cumulative energy counters into power first")
    p.add_argument("--counter-max", action=_Once, type=float, metavar="UJ",
                   help="register maximum in µJ (default 2**32 - 1)")


def _add_span(p: argparse.ArgumentParser) -> None:
    p.add_argument("--from", dest="start", action=_Once, type=float, metavar="T",
                   help="window start, seconds (default: trace start)")
    p.add_argument("--to", dest="end", action=_Once, type=float, metavar="T",
                   help="window end, seconds (default: trace end)")


def build_parser() -> _Parser:
    parser = _Parser(prog="wattledger", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("validate", help="parse traces and report sampling diagnostics")
    _add_common(p)
    _add_trace_input(p)
    _add_span(p)

    p = sub.add_parser("integrate", help="integrate power traces into energy")
    _add_common(p)
    _add_trace_input(p)
    _add_span(p)
    p.add_argument("--method", action=_Once, type=_method, default="zero_order",
                   help="zero-order (default) or trapezoid")
    p.add_argument("--pue", action=_Once, type=float, help="scale to facility energy once")
    p.add_argument("--format", action=_Once, choices=("text", "json"), default="text")

    p = sub.add_parser("baseline", help="estimate idle baselines")
    _add_common(p)
    _add_trace_input(p)
    _add_span(p)
    p.add_argument("--p", action=_Once, type=float, default=0.02, help="quantile (default 0.02)")

    p = sub.add_parser("marginal", help="marginal or reference-standardized energy")
    _add_common(p)
    p.add_argument("--estimate", action=_Once, metavar="PATH", help="absolute estimate JSON")
    p.add_argument("--baseline", action=_Once, metavar="PATH", help="idle baseline JSON")
    p.add_argument("--baseline-watts", action=_Once, type=float)
    p.add_argument("--reference", action=_Once, metavar="PATH",
                   help="reference baseline JSON; standardize instead of subtracting")
    p.add_argument("--reference-watts", action=_Once, type=float)

    p = sub.add_parser("proxy", help="loadline or TDP proxy estimates")
    _add_common(p)
    _add_span(p)
    p.add_argument("--utilization", action=_Once, metavar="PATH")
    p.add_argument("--percent", action=_OnceFlag, help="utilization column is OS percent")
    p.add_argument("--physical-cores", action=_Once, type=int, default=1)
    p.add_argument("--loadline", action=_Once, metavar="PATH")
    p.add_argument("--catalog", action=_Once, metavar="DIR")
    p.add_argument("--auto-select", action=_OnceFlag)
    p.add_argument("--architecture", action=_Once)
    p.add_argument("--tdp", action=_Once, type=float, metavar="W")
    p.add_argument("--clock", action=_Once, type=float, default=0.0, metavar="GHZ")
    p.add_argument("--workload", action=_Once)
    p.add_argument("--duration", action=_Once, type=float, metavar="S",
                   help="with --tdp and no utilization: TDP upper bound")
    p.add_argument("--calibration", action=_Once, type=float, metavar="SCALE")
    p.add_argument("--calibration-source", action=_Once, default="user supplied")
    p.add_argument("--pue", action=_Once, type=float)

    p = sub.add_parser("carbon", help="emissions from energy and carbon intensity")
    _add_common(p)
    _add_span(p)
    p.add_argument("--estimate", action=_Once, metavar="PATH")
    p.add_argument("--intensity", action=_Once, type=float, metavar="G_PER_KWH")
    p.add_argument("--basis", action=_Once, choices=("yearly_average", "realtime"),
                   default="yearly_average")
    p.add_argument("--region", action=_Once)
    p.add_argument("--trace", action=_Once, metavar="PATH")
    p.add_argument("--unit", action=_Once)
    p.add_argument("--intensity-file", action=_Once, metavar="PATH")
    p.add_argument("--strategy", action=_Once, default="upsample_intensity",
                   choices=("upsample_intensity", "downsample_power"))

    p = sub.add_parser("compare", help="compare two sets of repeated runs")
    _add_common(p)
    p.add_argument("--a", action=_Many, default=[], metavar="PATH")
    p.add_argument("--b", action=_Many, default=[], metavar="PATH")
    p.add_argument("--label-a", action=_Once, default="a")
    p.add_argument("--label-b", action=_Once, default="b")
    p.add_argument("--test", action=_Once, choices=("welch_t", "permutation"), default="welch_t")
    p.add_argument("--alpha", action=_Once, type=float, default=0.05)
    p.add_argument("--seed", action=_Once, type=int, default=0)
    p.add_argument("--format", action=_Once, choices=("text", "json"), default="text")

    p = sub.add_parser("simulate", help="synthetic trace with ground-truth energy")
    _add_common(p)
    p.add_argument("--spec", action=_Once, metavar="PATH")
    p.add_argument("--interval", action=_Once, type=float, metavar="S",
                   help="sampling interval in seconds")
    p.add_argument("--truth", action=_Once, metavar="PATH",
                   help="write the ground-truth energy JSON here")
    p.add_argument("--seed", action=_Once, type=int)

    p = sub.add_parser("report", help="validate and render a transparency report")
    _add_common(p)
    p.add_argument("--in", dest="input", action=_Once, metavar="PATH",
                   help="report or estimate JSON ('-' for standard input)")
    p.add_argument("--results", action=_Many, default=[], metavar="PATH")
    p.add_argument("--runtime-seconds", action=_Once, type=float,
                   help="runtime over hardware: duration")
    p.add_argument("--resources", action=_Once,
                   help="runtime over hardware: resource description")
    p.add_argument("--format", action=_Once, choices=("json", "markdown"), default="markdown")
    return parser


class _IO:
    def __init__(self, stdin, stdout, stderr):
        self.stdin, self.stdout, self.stderr = stdin, stdout, stderr
        self.stdin_used = False

    def open_in(self, path: str) -> IO[str]:
        if path == "-":
            if self.stdin_used:
                raise UsageError("standard input can be read only once")
            self.stdin_used = True
            return self.stdin
        return open(path, newline="", encoding="utf-8")

    def read_text(self, path: str) -> str:
        fh = self.open_in(path)
        try:
            return fh.read()
        finally:
            if fh is not self.stdin:
                fh.close()

    def write(self, path: str, data: str | bytes) -> None:
        if path == "-":
            if isinstance(data, bytes):
                buf = getattr(self.stdout, "buffer", None)
                if buf is not None:
                    self.stdout.flush()
                    buf.write(data)
                    buf.flush()
                    return
                data = data.decode("utf-8")
            self.stdout.write(data)
            return
        mode = "wb" if isinstance(data, bytes) else "w"
        with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8"})) as fh:
            fh.write(data)

    def warn(self, message: str) -> None:
        print(f"warning: {message}", file=self.stderr)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _config_defaults(sub: argparse.ArgumentParser, command: str, cfg: dict) -> dict:
    dests = {a.dest: a for a in sub._actions}
    aliases = {}
    for a in sub._actions:
        for opt in a.option_strings:
            aliases[opt.lstrip("-").replace("-", "_")] = a.dest

    def resolve(key):
        key = key.replace("-", "_")
        return aliases.get(key, key if key in dests else None)

    defaults = {}
    for key, value in cfg.items():
        if key in SUBCOMMANDS:
            continue
        dest = resolve(key)
        if dest is not None:
            defaults[dest] = value
    section = cfg.get(command, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section {command!r} must be an object")
    for key, value in section.items():
        dest = resolve(key)
        if dest is None:
            raise UsageError(f"config section {command!r}: unknown setting {key!r}")
        defaults[dest] = value
    for dest, value in defaults.items():
        action = dests[dest]
        if isinstance(action, _Many) and not isinstance(value, list):
            defaults[dest] = [value]
        elif action.type is not None and value is not None and not isinstance(action, _Many):
            try:
                defaults[dest] = action.type(str(value) if action.type is _method else value)
            except (argparse.ArgumentTypeError, TypeError, ValueError) as exc:
                raise UsageError(f"config: {dest}: {exc}") from None
        if action.choices is not None and defaults[dest] not in action.choices:
            raise UsageError(f"config: {dest} must be one of {list(action.choices)}")
    return defaults


def _parse(argv: Sequence[str], env) -> argparse.Namespace:
    parser = build_parser()
    command = next((a for a in argv if a in SUBCOMMANDS), None)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", action="append", default=[])
    known, _ = pre.parse_known_args(list(argv))
    if len(known.config) > 1:
        raise UsageError("--config given more than once")
    cfg_path = known.config[0] if known.config else env.get(CONFIG_ENV)
    if cfg_path and command is not None:
        cfg = _load_config(cfg_path)
        subparsers = next(
            a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
        )
        sub = subparsers.choices[command]
        sub.set_defaults(**_config_defaults(sub, command, cfg))
    args = parser.parse_args(list(argv))
    if args.command is None:
        raise UsageError(parser.format_help())
    if getattr(args, "jobs", 1) < 1:
        raise UsageError("--jobs must be at least 1")
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, [], "")]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required {flags}")


def _map(jobs: int, fn: Callable, items: list) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _read_traces(args, io: _IO) -> list[PowerTrace]:
    paths = args.trace or ["-"]
    if paths.count("-") > 1:
        raise UsageError("standard input can be read only once")
    texts = [(p, io.read_text(p)) for p in paths]

    def parse(item):
        path, text = item
        try:
            if args.dialect == "canonical":
                trace = parse_power_csv(text, unit=args.unit, source_id=_stem(path))
            else:
                trace = parse_device_monitor_table(text, args.dialect, source_id=_stem(path))
            if trace.sample_kind is SampleKind.cumulative_energy:
                if not args.decode_counter:
                    raise DataError("cumulative energy trace; pass --decode-counter")
                trace = decode_cumulative_counter(trace, args.counter_max)
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from None
        return trace

    traces = _map(args.jobs, parse, texts)
    for t in traces:
        for note in t.notes:
            io.warn(f"{t.source_id}: {note}")
    return traces


def _stem(path: str) -> str | None:
    if path == "-":
        return None
    return os.path.splitext(os.path.basename(path))[0]


def _span(args, trace: PowerTrace | None = None):
    if args.start is None and args.end is None:
        return None
    start = args.start if args.start is not None else trace.start
    end = args.end if args.end is not None else trace.end
    return (start, end)


def _sampling_warnings(io: _IO, trace: PowerTrace, span) -> dict:
    diag = diagnose(trace)
    adequacy = check_sampling(trace, span)
    for w in adequacy.warnings:
        io.warn(f"{trace.source_id}: {w}")
    for a, b in diag.gaps:
        io.warn(f"{trace.source_id}: gap in samples between {a:g} and {b:g} s")
    if diag.zero_variance:
        io.warn(f"{trace.source_id}: zero-variance trace (constant readings)")
    if diag.uniform_interval is None and len(trace) > 2:
        io.warn(f"{trace.source_id}: sampling interval is not uniform")
    return {"diagnostics": diag.to_dict(), "warnings": list(adequacy.warnings),
            "samples_in_window": adequacy.samples_in_window}


def _fmt_j(joules: float) -> str:
    return f"{format(joules, '.10g')} J"


def _estimate_line(e: EnergyEstimate) -> str:
    extra = f" pue={e.pue_applied:g}" if e.pue_applied is not None else ""
    return (
        f"{_fmt_j(e.joules)} method={e.method.value} basis={e.basis.value} "
        f"scope={e.scope.level.value}:{','.join(e.scope.sources)} "
        f"interval={e.start:g}..{e.end:g} s{extra}"
    )


def _load_estimates(io: _IO, path: str) -> list[EnergyEstimate]:
    try:
        doc = json.loads(io.read_text(path))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict) and "results" in doc:
        doc = doc["results"]
    docs = doc if isinstance(doc, list) else [doc]
    try:
        return [EnergyEstimate.from_dict(d) for d in docs]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not an energy estimate ({exc})") from None


def _load_json(io: _IO, path: str):
    try:
        return json.loads(io.read_text(path))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _emit_estimates(args, io: _IO, estimates: list[EnergyEstimate]) -> None:
    fmt = getattr(args, "format", "json")
    if fmt == "text":
        io.write(args.out, "".join(_estimate_line(e) + "\n" for e in estimates))
        return
    payload = [e.to_dict() for e in estimates]
    io.write(args.out, _json(payload[0] if len(payload) == 1 else payload))


# -- subcommands -------------------------------------------------------------


def cmd_validate(args, io: _IO) -> int:
    out = []
    for trace in _read_traces(args, io):
        info = _sampling_warnings(io, trace, _span(args, trace))
        info.update(source_id=trace.source_id, sample_kind=trace.sample_kind.value,
                    level=trace.level.value, notes=list(trace.notes))
        out.append(info)
    io.write(args.out, _json(out[0] if len(out) == 1 else out))
    return 0


def cmd_integrate(args, io: _IO) -> int:
    traces = _read_traces(args, io)

    def work(trace):
        est = integrate(trace, _span(args, trace), args.method)
        if args.pue is not None:
            est = apply_pue(est, args.pue)
        return est

    for trace in traces:
        _sampling_warnings(io, trace, _span(args, trace))
    _emit_estimates(args, io, _map(args.jobs, work, traces))
    return 0


def cmd_baseline(args, io: _IO) -> int:
    traces = _read_traces(args, io)
    bases = _map(args.jobs, lambda t: estimate_idle_baseline(t, args.p, _span(args, t)), traces)
    payload = [b.to_dict() for b in bases]
    io.write(args.out, _json(payload[0] if len(payload) == 1 else payload))
    return 0


def _baseline_arg(io, path, watts, source_id) -> IdleBaseline | None:
    if path is not None and watts is not None:
        raise UsageError("give a baseline file or a wattage, not both")
    if path is not None:
        try:
            return IdleBaseline.from_dict(_load_json(io, path))
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: not an idle baseline ({exc})") from None
    if watts is not None:
        return declared_baseline(watts, source_id)
    return None


def cmd_marginal(args, io: _IO) -> int:
    _require(args, "estimate")
    estimates = _load_estimates(io, args.estimate)
    out = []
    for est in estimates:
        source = est.scope.sources[0] if est.scope.sources else ""
        base = _baseline_arg(io, args.baseline, args.baseline_watts, source)
        if base is None:
            raise UsageError("marginal: give --baseline or --baseline-watts")
        ref = _baseline_arg(io, args.reference, args.reference_watts, "reference")
        if ref is not None and args.reference_watts is not None and base.method != "declared":
            ref = IdleBaseline(ref.watts, base.method, ref.window, ref.source_id, base.p)
        out.append(standardize_to_reference(est, base, ref) if ref else marginal_energy(est, base))
        for note in out[-1].notes:
            if note.startswith("warning: "):
                io.warn(note[len("warning: "):])
    _emit_estimates(args, io, out)
    return 0


def cmd_proxy(args, io: _IO) -> int:
    if args.utilization is None:
        _require(args, "tdp", "duration")
        desc = SystemDescriptor(args.architecture or "unspecified", args.tdp, args.clock)
        est = tdp_energy_bound(desc, args.duration, args.start or 0.0)
    else:
        if args.loadline and args.catalog:
            raise UsageError("give --loadline or --catalog, not both")
        if args.loadline:
            ll = load_loadline(args.loadline)
        elif args.catalog:
            if not args.auto_select:
                raise UsageError("--catalog requires --auto-select")
            _require(args, "architecture", "tdp")
            desc = SystemDescriptor(args.architecture, args.tdp, args.clock, args.workload)
            ll, score = select_loadline(load_catalog(args.catalog), desc)
            print(f"selected loadline {ll.meta.workload_name!r} ({ll.meta.architecture}, "
                  f"TDP {ll.meta.tdp_watts:g} W), score {score:.4g}", file=io.stderr)
        else:
            raise UsageError("proxy: give --loadline, --catalog --auto-select, or --tdp --duration")
        fh = io.open_in(args.utilization)
        try:
            util = parse_utilization_csv(
                fh, source_id=_stem(args.utilization) or "cpu", percent=args.percent,
                physical_cores=args.physical_cores, workload_name=args.workload,
            )
        finally:
            if fh is not io.stdin:
                fh.close()
        if (util.utilization > 1).any():
            raise DataError(
                "utilization above 1; pass --percent --physical-cores N to normalize"
            )
        span = None
        if args.start is not None or args.end is not None:
            span = (args.start if args.start is not None else float(util.timestamps[0]),
                    args.end if args.end is not None else float(util.timestamps[-1]))
        est = energy_from_utilization(util, ll, span)
    if args.calibration is not None:
        est = apply_calibration(est, CalibrationFactor(args.calibration, args.calibration_source))
    if args.pue is not None:
        est = apply_pue(est, args.pue)
    _emit_estimates(args, io, [est])
    return 0


def cmd_carbon(args, io: _IO) -> int:
    if args.intensity_file is not None:
        _require(args, "trace")
        if args.estimate is not None or args.intensity is not None:
            raise UsageError("time-series mode takes --trace and --intensity-file only")
        text = io.read_text(args.trace)
        trace = parse_power_csv(text, unit=args.unit, source_id=_stem(args.trace))
        ci_text = io.read_text(args.intensity_file)
        ci = parse_intensity_csv(ci_text)
        _sampling_warnings(io, trace, _span(args, trace))
        em = emissions_timeseries(trace, ci, _span(args, trace), Alignment(args.strategy))
    else:
        _require(args, "estimate", "intensity")
        ests = _load_estimates(io, args.estimate)
        if len(ests) != 1:
            raise UsageError("carbon: --estimate must hold exactly one estimate")
        em = emissions_constant(ests[0], args.intensity, basis=args.basis, region=args.region)
    io.write(args.out, _json(em.to_dict()))
    return 0


def cmd_compare(args, io: _IO) -> int:
    _require(args, "a", "b")
    a = RunSet(args.label_a, tuple(e for p in args.a for e in _load_estimates(io, p)))
    b = RunSet(args.label_b, tuple(e for p in args.b for e in _load_estimates(io, p)))
    res = compare(a, b, args.test, args.alpha, seed=args.seed)
    sa, sb = summarize(a), summarize(b)
    if args.format == "json":
        io.write(args.out, _json({
            args.label_a: sa.to_dict(), args.label_b: sb.to_dict(), "comparison": res.to_dict(),
        }))
        return 0
    rows = [("set", "n", "mean [J]", "stddev [J]")]
    for label, s in ((args.label_a, sa), (args.label_b, sb)):
        sd = "-" if s.stddev is None else format(s.stddev, ".6g")
        rows.append((label, str(s.n), format(s.mean, ".6g"), sd))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lo, hi = res.ci95
    lines += [
        "",
        f"test: {res.test} (alpha {res.alpha:g}; no multiple-comparison correction)",
        f"mean difference ({args.label_a} - {args.label_b}): {_fmt_j(res.mean_diff_joules)}",
        f"{int(round((1 - res.alpha) * 100))}% CI: [{format(lo, '.6g')}, {format(hi, '.6g')}] J",
        f"p-value: {res.p_value:.4g}" + (" (significant)" if res.significant else ""),
    ]
    io.write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_simulate(args, io: _IO) -> int:
    _require(args, "spec", "interval")
    try:
        spec = WorkloadSpec.from_dict(_load_json(io, args.spec))
    except (KeyError, TypeError) as exc:
        raise DataError(f"{args.spec}: malformed workload spec ({exc!r})") from None
    if args.seed is not None:
        spec = WorkloadSpec(spec.phases, spec.noise_std, spec.spikes, args.seed, spec.source_id)
    trace, truth = generate(spec, args.interval)
    buf = __import__("io").StringIO()
    write_power_csv(trace, buf)
    io.write(args.out, buf.getvalue())
    if args.truth:
        io.write(args.truth, _json(truth.to_dict()))
    return 0


def cmd_report(args, io: _IO) -> int:
    if args.input is None and not args.results:
        raise UsageError("report: give --in and/or --results")
    doc = _load_json(io, args.input) if args.input is not None else {}
    if isinstance(doc, list) or (isinstance(doc, dict) and "joules" in doc):
        doc = {"results": doc if isinstance(doc, list) else [doc]}
    if not isinstance(doc, dict):
        raise DataError("report input must be a JSON object")
    report = MeasurementReport.from_dict(doc)
    extra = tuple(e for p in args.results for e in _load_estimates(io, p))
    rt = report.runtime_over_hardware
    if args.runtime_seconds is not None or args.resources is not None:
        rt = RuntimeOverHardware(
            args.runtime_seconds if args.runtime_seconds is not None else (rt.duration_s if rt else 0.0),
            args.resources if args.resources is not None else (rt.resource_description if rt else ""),
        )
    from dataclasses import replace

    report = replace(report, results=report.results + extra, runtime_over_hardware=rt)
    io.write(args.out, render(report, args.format))
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "integrate": cmd_integrate,
    "baseline": cmd_baseline,
    "marginal": cmd_marginal,
    "proxy": cmd_proxy,
    "carbon": cmd_carbon,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def run(
    argv: Sequence[str] | None = None,
    env: dict | None = None,
    stdin: IO[str] | None = None,
    stdout: IO[str] | None = None,
    stderr: IO[str] | None = None,
) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    env = os.environ if env is None else env
    io = _IO(stdin or sys.stdin, stdout or sys.stdout, stderr or sys.stderr)
    token = _HELP_STREAM.set(io.stdout)
    try:
        args = _parse(argv, env)
        out = getattr(args, "out", "-")
        inputs = [v for n in ("trace", "a", "b", "results") for v in (getattr(args, n, None) or [])
                  if isinstance(v, str)]
        inputs += [getattr(args, n) for n in ("estimate", "baseline", "reference", "utilization",
                                              "loadline", "spec", "input", "intensity_file")
                   if isinstance(getattr(args, n, None), str)]
        if out != "-" and os.path.abspath(out) in {os.path.abspath(p) for p in inputs if p != "-"}:
            raise UsageError("output path must differ from every input path")
        return COMMANDS[args.command](args, io)
    except _CleanExit:
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}".rstrip(), file=io.stderr)
        return 1
    except ReportValidationError as exc:
        print(f"error: {exc}", file=io.stderr)
        for f in exc.findings:
            print(f"  {f.severity} {f.rule}: {f.message}", file=io.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=io.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=io.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=io.stderr)
        return 1
    finally:
        _HELP_STREAM.reset(token)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
