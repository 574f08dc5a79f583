"""Error-free transformations: exact residuals for the stochastic modes.

Each transform returns the correctly rounded head together with a tail
such that head + tail equals the exact mathematical result.  For
binary32 the tail is carried as a host double, where it is always exact
(a 24-bit product or remainder fits easily in 53 bits); for binary64
the residual formulas of Fasi-Mikaitis style rounding-mode-free
arithmetic apply, which are exact away from overflow and residual
underflow.  Inexactness, where detectable, is surfaced on the pair as
exact=False rather than as an error.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import math
from typing import NamedTuple

from .fpcore import (
    BINARY32,
    BINARY64,
    FloatFormat,
    _round_scaled_magnitude,
    decompose,
    float_to_bits,
    narrow_to,
)

__all__ = [
    "EftPair",
    "two_sum",
    "two_prod_fma",
    "residual_div",
    "residual_sqrt",
    "fma",
]


class EftPair(NamedTuple):
    """Unevaluated sum head + tail; exact=False flags a lossy residual."""

    head: float
    tail: float
    exact: bool = True


# ── fused multiply-add ───────────────────────────────────────────────
#
# The interpreter lacks a correctly rounded fma builtin on this Python
# version, so the binary64 case uses the C library's fma via ctypes with
# an integer-exact software fallback.  Both routes are checked against
# each other and against a rational oracle in the test suite.

def _load_libm_fma():
    for name in (ctypes.util.find_library("m"), "libm.so.6", "libm.dylib"):
        if not name:
            continue
        try:
            libm = ctypes.CDLL(name)
            fn = libm.fma
            fn.restype = ctypes.c_double
            fn.argtypes = [ctypes.c_double, ctypes.c_double, ctypes.c_double]
            # reject a broken binding outright
            if fn(2.0 ** 60, 2.0 ** -60, 2.0 ** -120) == 1.0 + 2.0 ** -120:
                return fn
        except (OSError, AttributeError):
            continue
    return None


_LIBM_FMA = _load_libm_fma()


def _fma64_soft(a: float, b: float, c: float) -> float:
    """Correctly rounded a*b + c in binary64 via exact integer arithmetic."""
    if math.isnan(a) or math.isnan(b) or math.isnan(c):
        return math.nan
    if math.isinf(a) or math.isinf(b):
        if a == 0.0 or b == 0.0:
            return math.nan
        psign = (math.copysign(1.0, a) * math.copysign(1.0, b) < 0)
        prod = -math.inf if psign else math.inf
        if math.isinf(c) and (c < 0) != psign:
            return math.nan
        return prod
    if math.isinf(c):
        return c
    da = decompose(a, BINARY64)
    db = decompose(b, BINARY64)
    dc = decompose(c, BINARY64)
    pm = (-1) ** (da.sign ^ db.sign) * (da.significand * db.significand)
    pe = da.exponent + db.exponent
    cm = (-1) ** dc.sign * dc.significand
    ce = dc.exponent
    exp = min(pe, ce)
    total = (pm << (pe - exp)) + (cm << (ce - exp))
    if total == 0:
        # exact zero: IEEE sign rules for nearest-even addition of zeros
        if pm == 0 and cm == 0:
            both_neg = (da.sign ^ db.sign) == 1 and dc.sign == 1
            return -0.0 if both_neg else 0.0
        return 0.0
    out = _round_scaled_magnitude(abs(total), exp, BINARY64)
    return -out if total < 0 else out


def _fma64(a: float, b: float, c: float) -> float:
    if _LIBM_FMA is not None:
        return _LIBM_FMA(a, b, c)
    return _fma64_soft(a, b, c)


def _fma32(a: float, b: float, c: float) -> float:
    """Correctly rounded binary32 a*b + c for operands on the binary32 grid.

    The product of two 24-bit significands is exact in a double, and the
    double-rounding hazard of narrowing the 53-bit sum is removed by
    collapsing the sum to round-to-odd first.
    """
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(c)):
        return narrow_to(_fma64(a, b, c), BINARY32)
    prod = a * b  # exact: 48 significand bits needed at most
    hi = prod + c
    if not math.isfinite(hi):
        return narrow_to(hi, BINARY32)
    lo = (prod - hi) + c if abs(prod) >= abs(c) else (c - hi) + prod
    if lo != 0.0 and (float_to_bits(hi, BINARY64) & 1) == 0:
        hi = math.nextafter(hi, math.copysign(math.inf, lo))
    return narrow_to(hi, BINARY32)


def fma(a: float, b: float, c: float, fmt: FloatFormat = BINARY64) -> float:
    """Correctly rounded fused multiply-add a*b + c in fmt."""
    if fmt.width == 64:
        return _fma64(a, b, c)
    return _fma32(a, b, c)


# ── error-free transformations ───────────────────────────────────────

def two_sum(a: float, b: float, fmt: FloatFormat = BINARY64) -> EftPair:
    """Branch-free Knuth transform: head = RN(a+b), head + tail = a + b."""
    if fmt.width == 64:
        s = a + b
        if not math.isfinite(s):
            return EftPair(s, math.nan, False)
        bb = s - a
        aa = s - bb
        db = b - bb
        da = a - aa
        t = da + db
        if not math.isfinite(t):
            return EftPair(s, math.nan, False)
        return EftPair(s, t)
    # binary32: same six operations, each narrowed; a double op followed
    # by one narrowing is the correctly rounded binary32 op.
    n = narrow_to
    s = n(a + b, fmt)
    if not math.isfinite(s):
        return EftPair(s, math.nan, False)
    bb = n(s - a, fmt)
    aa = n(s - bb, fmt)
    db = n(b - bb, fmt)
    da = n(a - aa, fmt)
    t = n(da + db, fmt)
    if not math.isfinite(t):
        return EftPair(s, math.nan, False)
    return EftPair(s, t)


def two_prod_fma(a: float, b: float, fmt: FloatFormat = BINARY64) -> EftPair:
    """head = RN(a*b), tail = the exact product remainder."""
    if fmt.width == 64:
        h = a * b
        if not math.isfinite(h):
            return EftPair(h, math.nan, False)
        t = _fma64(a, b, -h)
        # residual underflow: when the product sinks to the subnormal
        # range the remainder may no longer be representable
        exact = not (a != 0.0 and b != 0.0 and abs(h) < BINARY64.min_normal)
        return EftPair(h, t, exact)
    prod = a * b  # exact in the double carrier
    h = narrow_to(prod, fmt)
    if not math.isfinite(h):
        return EftPair(h, math.nan, False)
    return EftPair(h, prod - h)  # exact: both on a shared 2^k grid


def residual_div(a: float, b: float, q: float, fmt: FloatFormat = BINARY64) -> float:
    """Exact division remainder a - q*b for q = RN(a/b)."""
    if b == 0.0:
        raise ValueError("residual_div with zero divisor")
    if not math.isfinite(q):
        return math.nan
    if fmt.width == 64:
        return _fma64(-q, b, a)
    return a - q * b  # q*b exact in double; the subtraction cancels exactly


def residual_sqrt(x: float, s: float, fmt: FloatFormat = BINARY64) -> float:
    """Exact square-root remainder x - s*s for s = RN(sqrt(x))."""
    if x < 0.0:
        raise ValueError("residual_sqrt of a negative value")
    if not math.isfinite(s):
        return math.nan
    if fmt.width == 64:
        return _fma64(-s, s, x)
    return x - s * s
