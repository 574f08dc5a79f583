"""Perturbable numerical workloads: harmonic series, sum, dot, axpy,
matmul, plus the repetition runner and per-op timing helpers.

Accumulation order is fixed left-to-right everywhere (matmul cells go
row-major, each cell a left-to-right fma fold) so every trace replays
bitwise from its seed.  Inputs to binary32 kernels must lie on the
binary32 grid; make_inputs guarantees that.

The harmonic series converts the loop index to the active format first
(exact below 2^p) and then divides; both the division and every
accumulation are perturbed in the active mode, with a flag to leave the
division unperturbed for sensitivity studies.  Note one MCA caveat: MCA
perturbs exact operations too, so unlike SR/CESTAC even a single-element
sum can move when the element sits on a power of two.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from statistics import median
from typing import Optional, Sequence

from . import backend
from .fpcore import BINARY32, BINARY64, FloatFormat, div_rn, narrow_to
from .metrics import SampleSet
from .rng import RngStream
from .rounding import (
    MCA_RR,
    PerturbedOpContext,
    RoundingMode,
    mode_label,
    perturbed_add,
    perturbed_div,
    perturbed_fma,
)

__all__ = [
    "KernelSpec",
    "KernelData",
    "make_inputs",
    "harmonic_series",
    "perturbed_sum",
    "perturbed_dot",
    "perturbed_axpy",
    "perturbed_matmul",
    "execute_kernel",
    "run_repetitions",
    "op_trials",
    "op_samples",
    "time_scalar_op",
    "KERNEL_KINDS",
    "OP_NAMES",
]

KERNEL_KINDS = ("harmonic", "sum", "dot", "axpy", "matmul")
OP_NAMES = ("add", "sub", "mul", "div", "sqrt", "fma")

MATMUL_DIM_CAP = 256  # desk scale

# stream id reserved for input-data generation, distinct from any
# kernel stream (kernel streams come out of the splitmix bijection)
DATA_STREAM_ID = 0xDA7A

_MODE_CODE = {"rn": 0, "sr": 1, "ud": 2, "cestac": 3, "mca_rr": 4}
_OP_CODE = {name: i for i, name in enumerate(OP_NAMES)}
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class KernelSpec:
    """What to run: kernel kind, size, format, and rounding mode."""

    kind: str
    mode: RoundingMode
    fmt: FloatFormat
    n: int = 0
    shape: Optional[tuple[int, int, int]] = None  # matmul (m, k, n)
    perturb_div: bool = True

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "matmul":
            if self.shape is None or len(self.shape) != 3:
                raise ValueError("matmul needs shape (m, k, n)")
            if min(self.shape) < 1 or max(self.shape) > MATMUL_DIM_CAP:
                raise ValueError(f"matmul dims must be in 1..{MATMUL_DIM_CAP}")
        elif self.n < 1:
            raise ValueError("kernel size n must be >= 1")

    def size_label(self) -> str:
        if self.kind == "matmul":
            m, k, n = self.shape
            return f"{m}x{k}x{n}"
        return str(self.n)


@dataclass
class KernelData:
    """Inputs for the data-driven kernels (unused fields stay None)."""

    vec_u: Optional[list[float]] = None
    vec_v: Optional[list[float]] = None
    alpha: Optional[float] = None
    mat_a: Optional[list[list[float]]] = None
    mat_b: Optional[list[list[float]]] = None


def make_inputs(spec: KernelSpec, seed: int) -> KernelData:
    """Deterministic kernel inputs in [-1, 1), on the format's grid."""
    st = RngStream(seed, DATA_STREAM_ID)
    fmt = spec.fmt

    def draw() -> float:
        return narrow_to(2.0 * st.next_unit_uniform() - 1.0, fmt)

    def vec(n: int) -> list[float]:
        return [draw() for _ in range(n)]

    if spec.kind == "harmonic":
        return KernelData()
    if spec.kind == "sum":
        return KernelData(vec_u=vec(spec.n))
    if spec.kind == "dot":
        return KernelData(vec_u=vec(spec.n), vec_v=vec(spec.n))
    if spec.kind == "axpy":
        return KernelData(alpha=draw(), vec_u=vec(spec.n), vec_v=vec(spec.n))
    m, k, n = spec.shape
    return KernelData(
        mat_a=[vec(k) for _ in range(m)],
        mat_b=[vec(n) for _ in range(k)],
    )


# ── pure kernels ─────────────────────────────────────────────────────

def harmonic_series(n: int, ctx: PerturbedOpContext, perturb_div: bool = True) -> float:
    """Left-to-right sum of 1/i for i = 1..n in the active mode."""
    if n < 1:
        raise ValueError("harmonic_series needs n >= 1")
    acc = 0.0
    fmt = ctx.fmt
    for i in range(1, n + 1):
        fi = narrow_to(float(i), fmt)
        if perturb_div:
            term = perturbed_div(1.0, fi, ctx)
        else:
            term = div_rn(1.0, fi, fmt)
        acc = perturbed_add(acc, term, ctx)
    return acc


def perturbed_sum(v: Sequence[float], ctx: PerturbedOpContext) -> float:
    """Left-to-right perturbed_add fold from 0.0."""
    if len(v) == 0:
        raise ValueError("perturbed_sum of an empty vector")
    acc = 0.0
    for x in v:
        acc = perturbed_add(acc, x, ctx)
    return acc


def perturbed_dot(u: Sequence[float], v: Sequence[float], ctx: PerturbedOpContext) -> float:
    """Left-to-right perturbed_fma accumulation of u . v."""
    if len(u) != len(v):
        raise ValueError("dot: length mismatch")
    if len(u) == 0:
        raise ValueError("dot of empty vectors")
    acc = 0.0
    for x, y in zip(u, v):
        acc = perturbed_fma(x, y, acc, ctx)
    return acc


def perturbed_axpy(alpha: float, x: Sequence[float], y: Sequence[float],
                   ctx: PerturbedOpContext) -> list[float]:
    """Elementwise perturbed fma: alpha * x[i] + y[i]."""
    if len(x) != len(y):
        raise ValueError("axpy: length mismatch")
    return [perturbed_fma(alpha, xi, yi, ctx) for xi, yi in zip(x, y)]


def perturbed_matmul(a: Sequence[Sequence[float]], b: Sequence[Sequence[float]],
                     ctx: PerturbedOpContext) -> list[list[float]]:
    """Dense row-major product; each output cell is a left-to-right
    perturbed_fma fold over k, cells visited row-major."""
    m = len(a)
    k = len(a[0]) if m else 0
    if any(len(row) != k for row in a):
        raise ValueError("matmul: ragged left matrix")
    if len(b) != k:
        raise ValueError("matmul: inner dimension mismatch")
    n = len(b[0]) if k else 0
    if any(len(row) != n for row in b):
        raise ValueError("matmul: ragged right matrix")
    if max(m, k, n) > MATMUL_DIM_CAP:
        raise ValueError(f"matmul dims capped at {MATMUL_DIM_CAP}")
    out = []
    for i in range(m):
        row = []
        ai = a[i]
        for j in range(n):
            acc = 0.0
            for kk in range(k):
                acc = perturbed_fma(ai[kk], b[kk][j], acc, ctx)
            row.append(acc)
        out.append(row)
    return out


# ── backend dispatch ─────────────────────────────────────────────────

def _mode_args(ctx: PerturbedOpContext) -> tuple[int, int, int]:
    return (
        _MODE_CODE[ctx.mode.kind],
        ctx.resolved_t() if ctx.mode.kind == MCA_RR else ctx.fmt.precision_bits,
        ctx.fmt.width,
    )


def _run_core(core, fn_name: str, ctx: PerturbedOpContext, *args):
    """Call a core function, keeping the Python-side stream in sync."""
    st = ctx.stream
    mode, t, fmtw = _mode_args(ctx)
    out = getattr(core, fn_name)(
        *args, mode, t, fmtw, st.seed, st.stream_id,
        st.counter & _MASK64, st.counter >> 64,
    )
    *vals, lo, hi = out
    st.counter = (hi << 64) | lo
    return vals[0] if len(vals) == 1 else tuple(vals)


def _observable(values: Sequence[float]) -> float:
    """Scalar summary of a vector/matrix output: the exactly computed
    binary64 sum of the entries (outside the instrumented arithmetic)."""
    return math.fsum(values)


def execute_kernel(spec: KernelSpec, ctx: PerturbedOpContext,
                   data: Optional[KernelData] = None,
                   backend_choice: Optional[str] = None) -> float:
    """One kernel run under ctx; returns the scalar observable."""
    if data is None:
        data = make_inputs(spec, ctx.stream.seed)
    core = backend.resolve(backend_choice)
    if core is not None:
        return _execute_compiled(core, spec, ctx, data)
    return _execute_pure(spec, ctx, data)


def _execute_pure(spec: KernelSpec, ctx: PerturbedOpContext, data: KernelData) -> float:
    if spec.kind == "harmonic":
        return harmonic_series(spec.n, ctx, spec.perturb_div)
    if spec.kind == "sum":
        return perturbed_sum(data.vec_u, ctx)
    if spec.kind == "dot":
        return perturbed_dot(data.vec_u, data.vec_v, ctx)
    if spec.kind == "axpy":
        return _observable(perturbed_axpy(data.alpha, data.vec_u, data.vec_v, ctx))
    flat = perturbed_matmul(data.mat_a, data.mat_b, ctx)
    return _observable([x for row in flat for x in row])


def _execute_compiled(core, spec: KernelSpec, ctx: PerturbedOpContext, data: KernelData) -> float:
    import numpy as np

    if spec.kind == "harmonic":
        return _run_core(core, "harmonic", ctx, spec.n, 1 if spec.perturb_div else 0)
    if spec.kind == "sum":
        u = np.asarray(data.vec_u, dtype=np.float64)
        return _run_core(core, "vec_sum", ctx, u)
    if spec.kind == "dot":
        u = np.asarray(data.vec_u, dtype=np.float64)
        v = np.asarray(data.vec_v, dtype=np.float64)
        return _run_core(core, "vec_dot", ctx, u, v)
    if spec.kind == "axpy":
        x = np.asarray(data.vec_u, dtype=np.float64)
        y = np.asarray(data.vec_v, dtype=np.float64)
        out = np.empty_like(x)
        _run_core(core, "vec_axpy", ctx, data.alpha, x, y, out)
        return _observable(out.tolist())
    m, k, n = spec.shape
    a = np.asarray(data.mat_a, dtype=np.float64).reshape(m * k)
    b = np.asarray(data.mat_b, dtype=np.float64).reshape(k * n)
    out = np.empty(m * n, dtype=np.float64)
    _run_core(core, "matmul", ctx, a, b, out, m, k, n)
    return _observable(out.tolist())


def run_repetitions(spec: KernelSpec, reps: int, base_stream: RngStream,
                    data: Optional[KernelData] = None,
                    backend_choice: Optional[str] = None) -> SampleSet:
    """Execute the kernel reps times on split streams; samples are
    ordered by repetition index and replay bitwise from the seed."""
    if reps < 1:
        raise ValueError("run_repetitions needs reps >= 1")
    if data is None:
        data = make_inputs(spec, base_stream.seed)
    values: list[float] = []
    wall_ns: list[int] = []
    for st in base_stream.split(reps):
        ctx = PerturbedOpContext(spec.mode, spec.fmt, st)
        t0 = time.perf_counter_ns()
        values.append(execute_kernel(spec, ctx, data, backend_choice))
        wall_ns.append(time.perf_counter_ns() - t0)
    label = f"{spec.kind} {spec.size_label()} {mode_label(spec.mode)}"
    return SampleSet(values=values, fmt=spec.fmt, label=label, wall_ns=wall_ns)


# ── per-op timing (hardware-informative) ─────────────────────────────

def _op_trials_pure(op: str, a: float, b: float, c: float,
                    ctx: PerturbedOpContext, trials: int) -> tuple[float, float, float]:
    from . import rounding as rd

    fn = {
        "add": lambda: rd.perturbed_add(a, b, ctx),
        "sub": lambda: rd.perturbed_sub(a, b, ctx),
        "mul": lambda: rd.perturbed_mul(a, b, ctx),
        "div": lambda: rd.perturbed_div(a, b, ctx),
        "sqrt": lambda: rd.perturbed_sqrt(a, ctx),
        "fma": lambda: rd.perturbed_fma(a, b, c, ctx),
    }[op]
    total = 0.0
    vmin = math.inf
    vmax = -math.inf
    for _ in range(trials):
        v = fn()
        total += v
        vmin = min(vmin, v)
        vmax = max(vmax, v)
    return total, vmin, vmax


def op_trials(op: str, a: float, b: float, c: float, ctx: PerturbedOpContext,
              trials: int, backend_choice: Optional[str] = None) -> tuple[float, float, float]:
    """(sum, min, max) over repeated perturbed evaluations of one op.

    The sum accumulates left-to-right in binary64 in both backends, so
    the triple is bitwise comparable across them.
    """
    if op not in _OP_CODE:
        raise ValueError(f"unknown op {op!r}")
    # canonicalize operands onto the format grid so both backends see
    # identical inputs
    a, b, c = (narrow_to(x, ctx.fmt) for x in (a, b, c))
    if op == "div" and b == 0.0:
        raise ZeroDivisionError("op_trials: division by zero")
    if op == "sqrt" and a < 0.0:
        raise ValueError("op_trials: sqrt of a negative value")
    core = backend.resolve(backend_choice)
    if core is None:
        return _op_trials_pure(op, a, b, c, ctx, trials)
    return _run_core(core, "op_trials", ctx, _OP_CODE[op], a, b, c, trials)


def op_samples(op: str, a: float, b: float, c: float, ctx: PerturbedOpContext,
               trials: int, backend_choice: Optional[str] = None) -> list[float]:
    """Per-trial perturbed values of one op (op_trials without the fold),
    for callers that need an exactly computed mean or the distribution."""
    if op not in _OP_CODE:
        raise ValueError(f"unknown op {op!r}")
    a, b, c = (narrow_to(x, ctx.fmt) for x in (a, b, c))
    if op == "div" and b == 0.0:
        raise ZeroDivisionError("op_samples: division by zero")
    if op == "sqrt" and a < 0.0:
        raise ValueError("op_samples: sqrt of a negative value")
    core = backend.resolve(backend_choice)
    if core is None:
        from . import rounding as rd

        fn = {
            "add": lambda: rd.perturbed_add(a, b, ctx),
            "sub": lambda: rd.perturbed_sub(a, b, ctx),
            "mul": lambda: rd.perturbed_mul(a, b, ctx),
            "div": lambda: rd.perturbed_div(a, b, ctx),
            "sqrt": lambda: rd.perturbed_sqrt(a, ctx),
            "fma": lambda: rd.perturbed_fma(a, b, c, ctx),
        }[op]
        return [fn() for _ in range(trials)]
    import numpy as np

    out = np.empty(trials, dtype=np.float64)
    _run_core(core, "op_values", ctx, _OP_CODE[op], a, b, c, out)
    return out.tolist()


def time_scalar_op(op: str, mode: RoundingMode, fmt: FloatFormat,
                   seed: int = 0, trials: int = 100_000, repeats: int = 11,
                   warmup: int = 3, backend_choice: Optional[str] = None) -> dict:
    """Median wall time per scalar op, monotonic clock, warm-up runs
    discarded.  Hardware-informative: absolute numbers vary by machine.
    """
    stream = RngStream(seed, 0xBE4C)
    ctx = PerturbedOpContext(mode, fmt, stream)
    a, b, c = 1.0 / 3.0, 3.0, 0.1
    if fmt.width == 32:
        a, b, c = (narrow_to(x, fmt) for x in (a, b, c))
    runs: list[float] = []
    for i in range(warmup + repeats):
        t0 = time.perf_counter_ns()
        op_trials(op, a, b, c, ctx, trials, backend_choice)
        dt = time.perf_counter_ns() - t0
        if i >= warmup:
            runs.append(dt / trials)
    return {
        "op": op,
        "mode": mode_label(mode),
        "ns_per_op": median(runs),
        "runs_ns_per_op": runs,
        "trials": trials,
    }
