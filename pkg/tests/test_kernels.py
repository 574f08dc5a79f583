"""Kernel drivers: deterministic references, repetition plumbing, timing."""

import math
from fractions import Fraction

import pytest

from _oracles import harmonic_f32_numpy, harmonic_f64, rn_oracle
from stochfp.fpcore import BINARY32, BINARY64, narrow_to
from stochfp.kernels import (
    KernelSpec,
    execute_kernel,
    make_inputs,
    op_samples,
    op_trials,
    run_repetitions,
    time_scalar_op,
)
from stochfp.rng import RngStream
from stochfp.rounding import PerturbedOpContext, parse_mode

# binary64 nearest-rounding harmonic sums, frozen from a plain
# left-to-right float loop (and re-derived by the oracle below)
HARMONIC_REF64 = {
    100: "0x1.4bfdfe4591243p+2",
    1000: "0x1.df11f45f4e618p+2",
    10000: "0x1.39341192de2a6p+3",
    100000: "0x1.82e27a22f3f7cp+3",
    1000000: "0x1.cc9137a1df0d6p+3",
}
# and the binary32 counterparts from a float32 scalar loop
HARMONIC_RN32 = {
    100: "0x1.4bfe000000000p+2",
    1000: "0x1.df12140000000p+2",
    10000: "0x1.3934200000000p+3",
    100000: "0x1.82e8400000000p+3",
    1000000: "0x1.cb6f7a0000000p+3",
}


def _ctx(mode_text, fmt, seed=0, sid=0):
    return PerturbedOpContext(parse_mode(mode_text), fmt, RngStream(seed, sid))


def _backends():
    from stochfp import backend
    return ("pure", "compiled") if backend.core() is not None else ("pure",)


# ── spec validation ──────────────────────────────────────────────────

def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("bogus", parse_mode("rn"), BINARY64, n=4)
    with pytest.raises(ValueError):
        KernelSpec("sum", parse_mode("rn"), BINARY64, n=0)
    with pytest.raises(ValueError):
        KernelSpec("matmul", parse_mode("rn"), BINARY64, n=4)  # needs shape
    with pytest.raises(ValueError):
        KernelSpec("matmul", parse_mode("rn"), BINARY64, shape=(2, 300, 2))
    s = KernelSpec("matmul", parse_mode("rn"), BINARY64, shape=(2, 3, 4))
    assert s.size_label() == "2x3x4"
    assert KernelSpec("sum", parse_mode("rn"), BINARY64, n=7).size_label() == "7"


def test_make_inputs_on_grid_and_deterministic(fmt):
    spec = KernelSpec("dot", parse_mode("rn"), fmt, n=257)
    d1 = make_inputs(spec, seed=11)
    d2 = make_inputs(spec, seed=11)
    d3 = make_inputs(spec, seed=12)
    assert d1.vec_u == d2.vec_u and d1.vec_v == d2.vec_v
    assert d1.vec_u != d3.vec_u
    assert len(d1.vec_u) == len(d1.vec_v) == 257
    for v in d1.vec_u + d1.vec_v:
        assert -1.0 <= v < 1.0
        assert narrow_to(v, fmt) == v


# ── nearest-mode references ──────────────────────────────────────────

@pytest.mark.parametrize("backend_choice", _backends())
def test_harmonic_rn64_matches_oracle(backend_choice):
    for n in (100, 1000, 10000):
        spec = KernelSpec("harmonic", parse_mode("rn"), BINARY64, n=n)
        got = execute_kernel(spec, _ctx("rn", BINARY64), backend_choice=backend_choice)
        assert got == harmonic_f64(n)


@pytest.mark.parametrize("backend_choice", _backends())
def test_harmonic_rn32_matches_oracle(backend_choice):
    for n in (100, 1000, 10000):
        spec = KernelSpec("harmonic", parse_mode("rn"), BINARY32, n=n)
        got = execute_kernel(spec, _ctx("rn", BINARY32), backend_choice=backend_choice)
        assert got == harmonic_f32_numpy(n)


def test_harmonic_frozen_decades():
    for n, hx in HARMONIC_REF64.items():
        spec = KernelSpec("harmonic", parse_mode("rn"), BINARY64, n=n)
        assert execute_kernel(spec, _ctx("rn", BINARY64)) == float.fromhex(hx), n
    for n, hx in HARMONIC_RN32.items():
        spec = KernelSpec("harmonic", parse_mode("rn"), BINARY32, n=n)
        assert execute_kernel(spec, _ctx("rn", BINARY32)) == float.fromhex(hx), n


def _fma_oracle(a, b, c, fmt):
    return rn_oracle(Fraction(a) * Fraction(b) + Fraction(c), fmt)


def test_sum_kernel_rn_matches_plain_loop(fmt):
    spec = KernelSpec("sum", parse_mode("rn"), fmt, n=400)
    data = make_inputs(spec, seed=3)
    got = execute_kernel(spec, _ctx("rn", fmt), data=data)
    acc = 0.0
    for v in data.vec_u:
        acc = narrow_to(acc + v, fmt)
    assert got == acc


def test_dot_kernel_rn_matches_fma_oracle(fmt):
    spec = KernelSpec("dot", parse_mode("rn"), fmt, n=60)
    data = make_inputs(spec, seed=3)
    got = execute_kernel(spec, _ctx("rn", fmt), data=data)
    acc = 0.0
    for u, v in zip(data.vec_u, data.vec_v):
        acc = _fma_oracle(u, v, acc, fmt)
    assert got == acc


def test_axpy_kernel_rn_matches_fma_oracle(fmt):
    spec = KernelSpec("axpy", parse_mode("rn"), fmt, n=60)
    data = make_inputs(spec, seed=3)
    got = execute_kernel(spec, _ctx("rn", fmt), data=data)
    outs = [
        _fma_oracle(data.alpha, u, v, fmt)
        for u, v in zip(data.vec_u, data.vec_v)
    ]
    assert got == math.fsum(outs)


def test_matmul_rn_matches_triple_loop(fmt):
    spec = KernelSpec("matmul", parse_mode("rn"), fmt, shape=(5, 7, 3))
    data = make_inputs(spec, seed=4)
    got = execute_kernel(spec, _ctx("rn", fmt), data=data)
    m, k, n = spec.shape
    cells = []
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for l in range(k):
                acc = _fma_oracle(data.mat_a[i][l], data.mat_b[l][j], acc, fmt)
            cells.append(acc)
    assert got == math.fsum(cells)


def test_perturb_div_flag_changes_draw_budget():
    # with the flag off only the accumulations draw; the difference is
    # exactly the count of inexact divisions (1/i is exact for powers
    # of two: i in {1, 2, 4, ..., 256} for n = 500)
    on = KernelSpec("harmonic", parse_mode("sr"), BINARY32, n=500, perturb_div=True)
    off = KernelSpec("harmonic", parse_mode("sr"), BINARY32, n=500, perturb_div=False)
    c_on, c_off = _ctx("sr", BINARY32, seed=5), _ctx("sr", BINARY32, seed=5)
    execute_kernel(on, c_on)
    execute_kernel(off, c_off)
    assert c_on.stream.counter - c_off.stream.counter == 500 - 9
    # under nearest rounding the flag is invisible
    rn_on = KernelSpec("harmonic", parse_mode("rn"), BINARY32, n=500)
    rn_off = KernelSpec("harmonic", parse_mode("rn"), BINARY32, n=500, perturb_div=False)
    assert execute_kernel(rn_on, _ctx("rn", BINARY32)) == execute_kernel(rn_off, _ctx("rn", BINARY32))


def test_perturb_div_flag_changes_sr_distribution():
    vals_on = run_repetitions(
        KernelSpec("harmonic", parse_mode("sr"), BINARY32, n=500), 10, RngStream(5)
    ).values
    vals_off = run_repetitions(
        KernelSpec("harmonic", parse_mode("sr"), BINARY32, n=500, perturb_div=False),
        10, RngStream(5),
    ).values
    assert vals_on != vals_off


# ── repetitions ──────────────────────────────────────────────────────

def test_run_repetitions_rn_identical_sr_varied():
    spec_rn = KernelSpec("harmonic", parse_mode("rn"), BINARY32, n=300)
    out = run_repetitions(spec_rn, reps=6, base_stream=RngStream(9))
    assert len(set(out.values)) == 1
    spec_sr = KernelSpec("harmonic", parse_mode("sr"), BINARY32, n=300)
    out_sr = run_repetitions(spec_sr, reps=6, base_stream=RngStream(9))
    assert len(set(out_sr.values)) > 1


def test_run_repetitions_deterministic_replay():
    spec = KernelSpec("sum", parse_mode("sr"), BINARY32, n=200)
    data = make_inputs(spec, seed=1)
    a = run_repetitions(spec, 5, RngStream(42), data=data)
    b = run_repetitions(spec, 5, RngStream(42), data=data)
    assert a.values == b.values
    c = run_repetitions(spec, 5, RngStream(43), data=data)
    assert a.values != c.values


def test_sr_sum_lag1_autocorrelation_is_small():
    # repetitions use disjoint child streams; adjacent outputs must not
    # trend together
    spec = KernelSpec("sum", parse_mode("sr"), BINARY32, n=500)
    out = run_repetitions(spec, 100, RngStream(77))
    vs = out.values
    m = sum(vs) / len(vs)
    num = sum((vs[i] - m) * (vs[i + 1] - m) for i in range(len(vs) - 1))
    den = sum((v - m) ** 2 for v in vs)
    assert den > 0.0
    assert abs(num / den) < 0.5


# ── scalar-op drivers ────────────────────────────────────────────────

@pytest.mark.parametrize("backend_choice", _backends())
def test_op_trials_equals_fold_of_op_samples(fmt, backend_choice):
    ctx_a = _ctx("sr", fmt, seed=21)
    ctx_b = _ctx("sr", fmt, seed=21)
    tot, vmin, vmax = op_trials("mul", 1.0 / 3.0, 0.1, 0.0, ctx_a, 500,
                                backend_choice=backend_choice)
    vals = op_samples("mul", 1.0 / 3.0, 0.1, 0.0, ctx_b, 500,
                      backend_choice=backend_choice)
    acc = 0.0
    for v in vals:
        acc += v
    assert tot == acc
    assert vmin == min(vals) and vmax == max(vals)
    assert ctx_a.stream.counter == ctx_b.stream.counter == 500


def test_op_samples_narrows_operands(fmt):
    # off-grid doubles canonicalize onto the format grid before the loop
    vals = op_samples("add", 1.0 / 3.0, 0.1, 0.0, _ctx("rn", fmt, seed=1), 3)
    a, b = narrow_to(1.0 / 3.0, fmt), narrow_to(0.1, fmt)
    want = narrow_to(a + b, fmt)
    assert vals == [want] * 3


def test_op_trials_rejects_bad_op(fmt):
    with pytest.raises(ValueError):
        op_trials("pow", 2.0, 3.0, 0.0, _ctx("rn", fmt), 10)
    with pytest.raises(ZeroDivisionError):
        op_trials("div", 2.0, 0.0, 0.0, _ctx("rn", fmt), 10)
    with pytest.raises(ValueError):
        op_samples("sqrt", -2.0, 0.0, 0.0, _ctx("rn", fmt), 10)
    assert op_samples("add", 1.0, 1.0, 0.0, _ctx("rn", fmt), 0) == []


def test_time_scalar_op_reports_positive_rates():
    res = time_scalar_op("add", parse_mode("sr"), BINARY32, trials=2000, repeats=3, warmup=1)
    assert res["ns_per_op"] > 0.0
    assert res["trials"] == 2000
    assert len(res["runs_ns_per_op"]) == 3
    assert res["mode"] == "sr" and res["op"] == "add"


# ── cross-backend agreement at the kernel level ──────────────────────

@pytest.mark.parametrize("kind", ["harmonic", "sum", "dot", "axpy", "matmul"])
def test_backend_choice_is_invisible(kind):
    from stochfp import backend
    if backend.core() is None:
        pytest.skip("compiled core unavailable")
    for mode_text in ("rn", "sr", "mca@20"):
        for fmt in (BINARY32, BINARY64):
            if kind == "matmul":
                spec = KernelSpec(kind, parse_mode(mode_text), fmt, shape=(4, 5, 3))
            else:
                spec = KernelSpec(kind, parse_mode(mode_text), fmt, n=64)
            data = make_inputs(spec, seed=8)
            p = execute_kernel(spec, _ctx(mode_text, fmt, seed=2), data=data,
                               backend_choice="pure")
            c = execute_kernel(spec, _ctx(mode_text, fmt, seed=2), data=data,
                               backend_choice="compiled")
            assert p == c, (kind, mode_text, fmt.name)
