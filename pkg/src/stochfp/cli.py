"""Command-line surface: runs experiments and writes replayable reports.

Reports open with '#'-prefixed metadata lines (tool version, the exact
command line, seed, format, modes, backend) followed by one stable CSV
schema; values carry a hex-float column, which re-parses bitwise, next
to a shortest-round-trip decimal column for humans.  JSON output mirrors
the CSV rows one-to-one plus a summary object.  Same seed, same command,
same bytes -- as long as --timings is off, since wall-clock numbers are
the one thing that never replays.

Exit codes: 0 success, 1 I/O failure, 2 usage or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from . import __version__, backend
from .fpcore import BINARY32, BINARY64, FloatFormat
from .kernels import (
    OP_NAMES,
    KernelSpec,
    execute_kernel,
    make_inputs,
    run_repetitions,
    time_scalar_op,
)
from .metrics import (
    LabelMap,
    SampleSet,
    dice_summary,
    levene_test,
    min_pairwise_dice,
    read_labelmap,
    read_labelmap_text,
    significant_digits,
)
from .rng import RngStream
from .rounding import PerturbedOpContext, RoundingMode, mode_label, parse_mode

TOOL = "stochfp"
REPORT_MAGIC = "stochfp-report v1"
SEED_ENV = "STOCHFP_SEED"

CSV_COLUMNS = ("row_type", "kernel", "size", "mode", "rep",
               "field", "value_hex", "value_dec", "wall_ns")

_FMT = {"binary32": BINARY32, "binary64": BINARY64}

_TIMING_MODES = ("rn", "sr", "ud")  # always present in the timing table


# ── configuration ────────────────────────────────────────────────────

@dataclass(frozen=True)
class ExperimentConfig:
    """Round-trip-stable image of one harmonic/kernel invocation."""

    command: str              # "harmonic" | "kernel"
    kind: str
    fmt_name: str
    modes: tuple[str, ...]    # canonical mode labels
    reps: int
    seed: int
    n_min: int = 0            # harmonic sweep bounds
    n_max: int = 0
    n: int = 0                # vector kernel size
    shape: Optional[tuple[int, int, int]] = None
    perturb_div: bool = True
    timings: bool = False
    out: Optional[str] = None
    out_format: str = "csv"

    def to_argv(self) -> list[str]:
        argv = [self.command]
        if self.command == "harmonic":
            argv += ["--n-min", str(self.n_min), "--n-max", str(self.n_max)]
            if not self.perturb_div:
                argv += ["--no-perturb-div"]
        else:
            argv += ["--kind", self.kind]
            if self.kind == "matmul":
                m, k, n = self.shape
                argv += ["--shape", f"{m}x{k}x{n}"]
            else:
                argv += ["--n", str(self.n)]
        argv += ["--modes", ",".join(self.modes), "--reps", str(self.reps),
                 "--seed", str(self.seed), "--fmt", self.fmt_name,
                 "--format", self.out_format]
        if self.timings:
            argv += ["--timings"]
        if self.out is not None:
            argv += ["--out", self.out]
        return argv

    @staticmethod
    def from_args(args: argparse.Namespace) -> "ExperimentConfig":
        modes = tuple(mode_label(m) for m in _parse_modes(args.modes))
        if args.command == "harmonic":
            return ExperimentConfig(
                command="harmonic", kind="harmonic", fmt_name=args.fmt,
                modes=modes, reps=args.reps, seed=_resolve_seed(args.seed),
                n_min=_parse_count(args.n_min), n_max=_parse_count(args.n_max),
                perturb_div=not args.no_perturb_div, timings=args.timings,
                out=args.out, out_format=args.format)
        shape = _parse_shape(args.shape) if args.shape else None
        return ExperimentConfig(
            command="kernel", kind=args.kind, fmt_name=args.fmt,
            modes=modes, reps=args.reps, seed=_resolve_seed(args.seed),
            n=_parse_count(args.n) if args.n else 0, shape=shape,
            timings=args.timings, out=args.out, out_format=args.format)


class UsageError(ValueError):
    """Maps to exit code 2."""


def _parse_modes(text: str) -> list[RoundingMode]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise UsageError("empty --modes list")
    try:
        return [parse_mode(s) for s in items]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_count(text: str | int) -> int:
    # accepts 100000 and scientific shorthand like 1e5
    try:
        val = float(str(text))
    except ValueError:
        raise UsageError(f"not a count: {text!r}") from None
    if val < 1 or val != int(val):
        raise UsageError(f"not a positive integer: {text!r}")
    return int(val)


def _parse_shape(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise UsageError(f"shape must be MxKxN, got {text!r}")
    return tuple(_parse_count(p) for p in parts)  # type: ignore[return-value]


def _resolve_seed(flag_value: Optional[str]) -> int:
    """--seed beats the environment; default 0."""
    raw = flag_value if flag_value is not None else os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(str(raw), 0) & ((1 << 64) - 1)
    except ValueError:
        raise UsageError(f"bad seed {raw!r}") from None


def _decades(n_min: int, n_max: int) -> list[int]:
    lo = math.ceil(math.log10(n_min)) if n_min > 1 else 0
    out = []
    k = lo
    while 10 ** k <= n_max:
        if 10 ** k >= n_min:
            out.append(10 ** k)
        k += 1
    if not out:
        raise UsageError(f"no powers of 10 inside [{n_min}, {n_max}]")
    return out


# ── report rendering ─────────────────────────────────────────────────

def _row(row_type: str, kernel: str, size: str, mode: str, rep,
         fieldname: str, value: float, wall_ns: int = 0) -> dict:
    return {
        "row_type": row_type, "kernel": kernel, "size": size, "mode": mode,
        "rep": "" if rep is None else str(rep), "field": fieldname,
        "value_hex": float(value).hex(), "value_dec": repr(float(value)),
        "wall_ns": str(int(wall_ns)),
    }


def render_csv(meta: Sequence[tuple[str, str]], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# {REPORT_MAGIC}\n")
    for key, val in meta:
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def render_json(meta: Sequence[tuple[str, str]], rows: Sequence[dict]) -> str:
    summary: dict = {}
    for r in rows:
        if r["row_type"] != "summary":
            continue
        cell = summary.setdefault(f"{r['kernel']}|{r['size']}|{r['mode']}", {})
        cell[r["field"]] = {"hex": r["value_hex"], "dec": float(r["value_dec"])}
    doc = {
        "report": REPORT_MAGIC,
        "meta": {k: v for k, v in meta},
        "rows": list(rows),
        "summary": summary,
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_report(text: str) -> tuple[dict, list[dict]]:
    """Inverse of render_csv: (meta dict, row dicts)."""
    meta: dict = {}
    body: list[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            item = line[1:].strip()
            if ":" in item:
                key, _, val = item.partition(":")
                meta[key.strip()] = val.strip()
            else:
                meta.setdefault("report", item)
        elif line.strip():
            body.append(line)
    if not body:
        return meta, []
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    return meta, [dict(r) for r in reader]


def _emit(text: str, out: Optional[str]) -> int:
    if out is None or out == "-":
        sys.stdout.write(text)
        return 0
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"{TOOL}: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    return 0


def _base_meta(args_echo: str, seed: Optional[int], fmt_name: Optional[str],
               modes: Optional[Sequence[str]]) -> list[tuple[str, str]]:
    meta = [
        ("tool_version", __version__),
        ("command", args_echo),
    ]
    if seed is not None:
        meta.append(("seed", str(seed)))
    if fmt_name is not None:
        meta.append(("fmt", fmt_name))
    if modes is not None:
        meta.append(("modes", ",".join(modes)))
    meta.append(("backend", backend.active_backend()))
    return meta


def _echo(argv: Sequence[str]) -> str:
    return " ".join([TOOL, *argv])


# ── experiment execution ─────────────────────────────────────────────

def _summary_rows(kernel: str, size: str, mode: str, samples: SampleSet,
                  extra: Sequence[tuple[str, float]] = ()) -> list[dict]:
    rep = significant_digits(samples)
    first = samples.values[0]
    identical = all(v == first and math.copysign(1.0, v) == math.copysign(1.0, first)
                    for v in samples.values)
    rows = [
        _row("summary", kernel, size, mode, None, "mean", rep.mean),
        _row("summary", kernel, size, mode, None, "std", rep.std),
        _row("summary", kernel, size, mode, None, "sig_digits", rep.sig_digits_decimal),
        _row("summary", kernel, size, mode, None, "reps_bitwise_identical",
             1.0 if identical else 0.0),
    ]
    for name, value in extra:
        rows.append(_row("summary", kernel, size, mode, None, name, value))
    return rows


def _timing_rows(fmt: FloatFormat, fmt_name: str, modes: Sequence[RoundingMode],
                 trials: int) -> list[dict]:
    """Median per-op wall cost for rn/sr/ud plus any requested modes."""
    seen: list[RoundingMode] = []
    for m in [parse_mode(s) for s in _TIMING_MODES] + list(modes):
        if mode_label(m) not in [mode_label(x) for x in seen]:
            seen.append(m)
    rows = []
    for op in OP_NAMES:
        for m in seen:
            stats = time_scalar_op(op, m, fmt, trials=trials)
            rows.append(_row("timing", "scalar", str(trials), mode_label(m),
                             None, f"{op}_ns_per_op", stats["ns_per_op"]))
    return rows


def cmd_harmonic(cfg: ExperimentConfig, argv: Sequence[str]) -> int:
    fmt = _FMT[cfg.fmt_name]
    decades = _decades(cfg.n_min, cfg.n_max)
    modes = [parse_mode(s) for s in cfg.modes]
    cells = [(n, m) for n in decades for m in modes]
    children = RngStream(cfg.seed).split(len(cells))

    ref64: dict[int, float] = {}
    for n in decades:
        spec = KernelSpec("harmonic", parse_mode("rn"), BINARY64, n=n,
                          perturb_div=cfg.perturb_div)
        ctx = PerturbedOpContext(spec.mode, BINARY64, RngStream(cfg.seed))
        ref64[n] = execute_kernel(spec, ctx)

    rows: list[dict] = []
    for (n, mode), child in zip(cells, children):
        spec = KernelSpec("harmonic", mode, fmt, n=n, perturb_div=cfg.perturb_div)
        samples = run_repetitions(spec, cfg.reps, child)
        label = mode_label(mode)
        for i, v in enumerate(samples.values):
            wall = samples.wall_ns[i] if cfg.timings else 0
            rows.append(_row("rep", "harmonic", str(n), label, i, "value", v, wall))
        rows += _summary_rows("harmonic", str(n), label, samples,
                              extra=[("ref64", ref64[n])])
    meta = _base_meta(_echo(argv), cfg.seed, cfg.fmt_name, cfg.modes)
    render = render_json if cfg.out_format == "json" else render_csv
    return _emit(render(meta, rows), cfg.out)


def cmd_kernel(cfg: ExperimentConfig, argv: Sequence[str],
               timing_trials: int) -> int:
    fmt = _FMT[cfg.fmt_name]
    modes = [parse_mode(s) for s in cfg.modes]
    try:
        base_spec = KernelSpec(cfg.kind, modes[0], fmt, n=cfg.n, shape=cfg.shape)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = make_inputs(base_spec, cfg.seed)
    children = RngStream(cfg.seed).split(len(modes))

    rows: list[dict] = []
    size = base_spec.size_label()
    for mode, child in zip(modes, children):
        spec = KernelSpec(cfg.kind, mode, fmt, n=cfg.n, shape=cfg.shape)
        samples = run_repetitions(spec, cfg.reps, child, data=data)
        label = mode_label(mode)
        for i, v in enumerate(samples.values):
            wall = samples.wall_ns[i] if cfg.timings else 0
            rows.append(_row("rep", cfg.kind, size, label, i, "value", v, wall))
        rows += _summary_rows(cfg.kind, size, label, samples)
    if cfg.timings:
        rows += _timing_rows(fmt, cfg.fmt_name, modes, timing_trials)
    meta = _base_meta(_echo(argv), cfg.seed, cfg.fmt_name, cfg.modes)
    render = render_json if cfg.out_format == "json" else render_csv
    return _emit(render(meta, rows), cfg.out)


# ── metrics inputs ───────────────────────────────────────────────────

def _read_samples(path: str, select_mode: Optional[str] = None,
                  select_size: Optional[str] = None) -> tuple[list[float], dict]:
    """Sample values plus input metadata.

    Accepts either a plain file (optional '# key: value' lines, one
    decimal or hex float per line / first CSV cell) or a report written
    by this tool, from which the rep rows are taken.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: {exc}") from None
    meta, report_rows = parse_report(text)
    if report_rows and "value_hex" in report_rows[0]:
        reps = [r for r in report_rows if r["row_type"] == "rep"]
        if select_mode is not None:
            reps = [r for r in reps if r["mode"] == select_mode]
        if select_size is not None:
            reps = [r for r in reps if r["size"] == select_size]
        cells = {(r["kernel"], r["size"], r["mode"]) for r in reps}
        if len(cells) > 1:
            raise UsageError(
                f"{path}: {len(cells)} report cells match; narrow with "
                f"--select-mode/--select-size")
        if not reps:
            raise UsageError(f"{path}: no rep rows match the selection")
        return [float.fromhex(r["value_hex"]) for r in reps], meta
    values = []
    header_allowed = True  # one 'value' header may precede the data
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        token = stripped.split(",")[0].strip()
        if header_allowed and token.lower() in ("value", "values"):
            header_allowed = False
            continue
        header_allowed = False
        try:
            values.append(float.fromhex(token) if token.lower().startswith(("0x", "-0x", "+0x"))
                          else float(token))
        except ValueError:
            raise UsageError(f"{path}:{lineno}: cannot parse {token!r} as a float") from None
    if not values:
        raise UsageError(f"{path}: no sample values found")
    return values, meta


def _read_map(path: str) -> LabelMap:
    try:
        if path.endswith(".txt"):
            return read_labelmap_text(path)
        return read_labelmap(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _echo_input_meta(meta_out: list[tuple[str, str]], meta_in: dict) -> None:
    for key in ("seed", "fmt", "modes"):
        if key in meta_in:
            meta_out.append((f"input_{key}", meta_in[key]))


def cmd_metrics_sigdigits(args: argparse.Namespace, argv: Sequence[str]) -> int:
    values, meta_in = _read_samples(args.samples, args.select_mode, args.select_size)
    fmt_name = args.fmt or meta_in.get("fmt", "binary64")
    if fmt_name not in _FMT:
        raise UsageError(f"unknown format {fmt_name!r}")
    report = significant_digits(values, _FMT[fmt_name])
    rows = [
        _row("summary", "sigdigits", str(report.n), "", None, "mean", report.mean),
        _row("summary", "sigdigits", str(report.n), "", None, "std", report.std),
        _row("summary", "sigdigits", str(report.n), "", None, "sig_digits",
             report.sig_digits_decimal),
        _row("summary", "sigdigits", str(report.n), "", None, "sig_bits",
             report.sig_digits_binary),
        _row("summary", "sigdigits", str(report.n), "", None, "cap", report.cap),
        _row("summary", "sigdigits", str(report.n), "", None, "absolute_mode",
             1.0 if report.absolute_mode else 0.0),
        _row("summary", "sigdigits", str(report.n), "", None, "degenerate",
             1.0 if report.degenerate else 0.0),
    ]
    meta = _base_meta(_echo(argv), None, fmt_name, None)
    _echo_input_meta(meta, meta_in)
    render = render_json if args.format == "json" else render_csv
    return _emit(render(meta, rows), args.out)


def cmd_metrics_dice(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if len(args.maps) < 2:
        raise UsageError("dice needs at least two maps")
    maps = [_read_map(p) for p in args.maps]
    size = "x".join(str(d) for d in maps[0].dims)
    rows = []
    if args.label is not None:
        res = min_pairwise_dice(maps, args.label)
        rows += [
            _row("summary", "dice", size, f"label={args.label}", None, "min_dice", res.value),
            _row("summary", "dice", size, f"label={args.label}", None, "empty_pairs",
                 float(res.empty_pairs)),
            _row("summary", "dice", size, f"label={args.label}", None, "label_absent",
                 1.0 if res.label_absent else 0.0),
        ]
    else:
        summary = dice_summary(maps)
        for lab in sorted(summary["per_label"]):
            rows.append(_row("summary", "dice", size, f"label={lab}", None,
                             "min_dice", summary["per_label"][lab]))
        rows.append(_row("summary", "dice", size, "all", None, "min_dice", summary["min"]))
    meta = _base_meta(_echo(argv), None, None, None)
    meta.append(("maps", ",".join(args.maps)))
    render = render_json if args.format == "json" else render_csv
    return _emit(render(meta, rows), args.out)


def cmd_metrics_levene(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if len(args.groups) < 2:
        raise UsageError("levene needs at least two group files")
    groups = []
    meta_in: dict = {}
    for path in args.groups:
        vals, m = _read_samples(path, args.select_mode, args.select_size)
        groups.append(vals)
        meta_in = meta_in or m
    try:
        res = levene_test(groups)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    size = ",".join(str(len(g)) for g in groups)
    rows = [
        _row("summary", "levene", size, "", None, "statistic", res.statistic),
        _row("summary", "levene", size, "", None, "pvalue", res.pvalue),
        _row("summary", "levene", size, "", None, "degenerate",
             1.0 if res.degenerate else 0.0),
    ]
    meta = _base_meta(_echo(argv), None, None, None)
    meta.append(("levene_centering", "mean"))
    _echo_input_meta(meta, meta_in)
    render = render_json if args.format == "json" else render_csv
    return _emit(render(meta, rows), args.out)


# ── argument parsing ─────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="stochastic floating-point arithmetic experiments")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--modes", default="sr",
                       help="comma list: rn, sr, ud, cestac, mca, mca@T")
        p.add_argument("--reps", type=int, default=30)
        p.add_argument("--seed", default=None,
                       help=f"u64 seed (default: ${SEED_ENV} or 0)")
        p.add_argument("--fmt", choices=("binary32", "binary64"), default="binary32")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--timings", action="store_true",
                       help="record wall clocks (breaks byte-replay of reports)")

    ph = sub.add_parser("harmonic", help="harmonic-series sweep over decades")
    ph.add_argument("--n-min", default="100")
    ph.add_argument("--n-max", default="1000000")
    ph.add_argument("--no-perturb-div", action="store_true",
                    help="leave 1/i at round-to-nearest, perturb only the sums")
    common(ph)

    pk = sub.add_parser("kernel", help="vector/matrix kernels")
    pk.add_argument("--kind", choices=("sum", "dot", "axpy", "matmul"), required=True)
    pk.add_argument("--n", default=None, help="vector length")
    pk.add_argument("--shape", default=None, help="matmul dims MxKxN")
    pk.add_argument("--timing-trials", type=int, default=100_000,
                    help="trials per op for the --timings table")
    common(pk)

    pm = sub.add_parser("metrics", help="variability metrics over files")
    msub = pm.add_subparsers(dest="metrics_command", required=True)

    def msel(p: argparse.ArgumentParser) -> None:
        p.add_argument("--select-mode", default=None,
                       help="pick one mode out of a report file")
        p.add_argument("--select-size", default=None,
                       help="pick one size out of a report file")
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    ps = msub.add_parser("sigdigits", help="significant digits of a sample file")
    ps.add_argument("samples")
    ps.add_argument("--fmt", choices=("binary32", "binary64"), default=None)
    msel(ps)

    pd = msub.add_parser("dice", help="min pairwise Dice across label maps")
    pd.add_argument("maps", nargs="+")
    pd.add_argument("--label", type=int, default=None,
                    help="single label (default: every label plus the global min)")
    pd.add_argument("--out", default=None)
    pd.add_argument("--format", choices=("csv", "json"), default="csv")

    pl = msub.add_parser("levene", help="Levene variance-homogeneity test")
    pl.add_argument("groups", nargs="+")
    msel(pl)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "harmonic":
            cfg = ExperimentConfig.from_args(args)
            if args.reps < 1:
                raise UsageError("--reps must be >= 1")
            return cmd_harmonic(cfg, argv)
        if args.command == "kernel":
            if (args.kind == "matmul") == (args.shape is None):
                raise UsageError("matmul takes --shape; other kernels take --n")
            if args.kind != "matmul" and args.n is None:
                raise UsageError(f"{args.kind} needs --n")
            cfg = ExperimentConfig.from_args(args)
            if args.reps < 1:
                raise UsageError("--reps must be >= 1")
            return cmd_kernel(cfg, argv, args.timing_trials)
        if args.metrics_command == "sigdigits":
            return cmd_metrics_sigdigits(args, argv)
        if args.metrics_command == "dice":
            return cmd_metrics_dice(args, argv)
        return cmd_metrics_levene(args, argv)
    except UsageError as exc:
        print(f"{TOOL}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
