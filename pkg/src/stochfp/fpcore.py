"""Bit-exact IEEE-754 introspection for binary32 and binary64.

Everything downstream (error-free transforms, stochastic rounding,
kernels) manipulates floats through this module so that neighbor
selection, ulp spacing, and correct rounding are defined once, exactly,
and identically in the pure-Python and compiled backends.

Values of both formats are carried in host doubles: every binary32
value is exactly representable in binary64, so a "binary32 float" here
means a double whose value lies on the binary32 grid.
"""

from __future__ import annotations

import math
import struct
from fractions import Fraction
from typing import NamedTuple

__all__ = [
    "FloatFormat",
    "BINARY32",
    "BINARY64",
    "DecomposedFloat",
    "ZERO",
    "SUBNORMAL",
    "NORMAL",
    "INF",
    "NAN",
    "decompose",
    "recompose",
    "float_to_bits",
    "bits_to_float",
    "narrow_to",
    "ulp",
    "pred",
    "succ",
    "neighbors",
    "round_nearest",
    "add_rn",
    "sub_rn",
    "mul_rn",
    "div_rn",
    "sqrt_rn",
]


# ── formats ──────────────────────────────────────────────────────────

class FloatFormat(NamedTuple):
    """Static description of an IEEE-754 binary interchange format."""

    name: str
    precision_bits: int  # significand bits, implicit bit included
    emin: int            # minimum normal binade exponent
    emax: int            # maximum normal binade exponent
    width: int           # total encoding width in bits

    @property
    def quantum_exp(self) -> int:
        """Exponent of the smallest subnormal: emin - p + 1."""
        return self.emin - self.precision_bits + 1

    @property
    def bias(self) -> int:
        return self.emax

    @property
    def max_finite(self) -> float:
        return math.ldexp((1 << self.precision_bits) - 1, self.emax - self.precision_bits + 1)

    @property
    def min_subnormal(self) -> float:
        return math.ldexp(1.0, self.quantum_exp)

    @property
    def min_normal(self) -> float:
        return math.ldexp(1.0, self.emin)


BINARY32 = FloatFormat("binary32", 24, -126, 127, 32)
BINARY64 = FloatFormat("binary64", 53, -1022, 1023, 64)

# Classification labels for DecomposedFloat.category.
ZERO = "zero"
SUBNORMAL = "subnormal"
NORMAL = "normal"
INF = "inf"
NAN = "nan"


class DecomposedFloat(NamedTuple):
    """Sign-magnitude integer view: x = (-1)^sign * significand * 2^exponent.

    For category normal the significand m satisfies 2^{p-1} <= m < 2^p;
    for subnormal 0 < m < 2^{p-1} with exponent pinned to the subnormal
    quantum.  For nan the significand holds the raw payload field so the
    bit pattern survives a round-trip.
    """

    sign: int
    significand: int
    exponent: int
    category: str


# ── raw encodings ────────────────────────────────────────────────────

def _pack32(x: float) -> bytes:
    # struct refuses finite doubles that overflow binary32; the C cast
    # semantics we want produce an infinity of the same sign instead.
    try:
        return struct.pack("<f", x)
    except OverflowError:
        return struct.pack("<f", math.copysign(math.inf, x))


def narrow_to(x: float, fmt: FloatFormat) -> float:
    """Round a host double to fmt with the platform's nearest-even rule."""
    if fmt.width == 64:
        return x
    return struct.unpack("<f", _pack32(x))[0]


def float_to_bits(x: float, fmt: FloatFormat) -> int:
    """Raw encoding of x, which must already be representable in fmt."""
    if fmt.width == 64:
        return struct.unpack("<Q", struct.pack("<d", x))[0]
    if not math.isnan(x) and narrow_to(x, fmt) != x:
        raise ValueError(f"{x!r} is not representable in {fmt.name}")
    return struct.unpack("<I", _pack32(x))[0]


def bits_to_float(bits: int, fmt: FloatFormat) -> float:
    """Inverse of float_to_bits."""
    if fmt.width == 64:
        return struct.unpack("<d", struct.pack("<Q", bits))[0]
    return struct.unpack("<f", struct.pack("<I", bits))[0]


# ── decompose / recompose ────────────────────────────────────────────

def decompose(x: float, fmt: FloatFormat) -> DecomposedFloat:
    """Exact sign-magnitude integer decomposition of x in fmt."""
    bits = float_to_bits(x, fmt)
    p = fmt.precision_bits
    exp_width = fmt.width - p
    mant_mask = (1 << (p - 1)) - 1
    sign = bits >> (fmt.width - 1)
    raw_exp = (bits >> (p - 1)) & ((1 << exp_width) - 1)
    mant = bits & mant_mask

    if raw_exp == (1 << exp_width) - 1:
        if mant == 0:
            return DecomposedFloat(sign, 0, 0, INF)
        return DecomposedFloat(sign, mant, 0, NAN)
    if raw_exp == 0:
        if mant == 0:
            return DecomposedFloat(sign, 0, fmt.quantum_exp, ZERO)
        return DecomposedFloat(sign, mant, fmt.quantum_exp, SUBNORMAL)
    return DecomposedFloat(sign, mant | (1 << (p - 1)), raw_exp - fmt.bias - (p - 1), NORMAL)


def recompose(d: DecomposedFloat, fmt: FloatFormat) -> float:
    """Rebuild the float whose decomposition is d (bitwise inverse)."""
    p = fmt.precision_bits
    exp_width = fmt.width - p
    sign_bits = d.sign << (fmt.width - 1)
    if d.category == ZERO:
        return bits_to_float(sign_bits, fmt)
    if d.category == INF:
        return bits_to_float(sign_bits | (((1 << exp_width) - 1) << (p - 1)), fmt)
    if d.category == NAN:
        payload = d.significand or (1 << (p - 2))  # keep at least the quiet bit
        return bits_to_float(sign_bits | (((1 << exp_width) - 1) << (p - 1)) | payload, fmt)
    if d.category == SUBNORMAL:
        if not (0 < d.significand < (1 << (p - 1)) and d.exponent == fmt.quantum_exp):
            raise ValueError(f"invalid subnormal decomposition: {d}")
        return bits_to_float(sign_bits | d.significand, fmt)
    if d.category == NORMAL:
        if not ((1 << (p - 1)) <= d.significand < (1 << p)):
            raise ValueError(f"invalid normal significand: {d}")
        raw_exp = d.exponent + fmt.bias + (p - 1)
        if not (1 <= raw_exp <= (1 << exp_width) - 2):
            raise ValueError(f"exponent out of range: {d}")
        mant = d.significand & ((1 << (p - 1)) - 1)
        return bits_to_float(sign_bits | (raw_exp << (p - 1)) | mant, fmt)
    raise ValueError(f"unknown category: {d.category!r}")


# ── spacing and neighbors ────────────────────────────────────────────

def ulp(x: float, fmt: FloatFormat) -> float:
    """Spacing of the binade containing |x|; at exact powers of two this
    is the spacing above |x|.  ulp(0) is defined as 0."""
    if not math.isfinite(x):
        raise ValueError("ulp of a non-finite value")
    if x == 0.0:
        return 0.0
    e = math.frexp(x)[1] - fmt.precision_bits
    return math.ldexp(1.0, max(e, fmt.quantum_exp))


def succ(x: float, fmt: FloatFormat) -> float:
    """Smallest representable value strictly above x (nextUp)."""
    if math.isnan(x):
        raise ValueError("succ of NaN")
    if x == 0.0:
        return fmt.min_subnormal
    if math.isinf(x):
        return -fmt.max_finite if x < 0 else x
    bits = float_to_bits(x, fmt)
    bits = bits + 1 if x > 0 else bits - 1
    out = bits_to_float(bits, fmt)
    return 0.0 if out == 0.0 else out  # never return -0.0


def pred(x: float, fmt: FloatFormat) -> float:
    """Largest representable value strictly below x (nextDown)."""
    if math.isnan(x):
        raise ValueError("pred of NaN")
    if x == 0.0:
        return -fmt.min_subnormal
    if math.isinf(x):
        return fmt.max_finite if x > 0 else x
    bits = float_to_bits(x, fmt)
    bits = bits - 1 if x > 0 else bits + 1
    out = bits_to_float(bits, fmt)
    return 0.0 if out == 0.0 else out


def neighbors(value: float, fmt: FloatFormat, residual: float = 0.0) -> tuple[float, float]:
    """Enclosing pair (floor, ceil) in fmt of the extended value
    value + residual; floor == ceil iff the extended value is on the grid."""
    if math.isnan(value) or math.isnan(residual):
        raise ValueError("neighbors of NaN")
    if math.isinf(value):
        return value, value
    f = round_nearest(value, fmt, residual)
    if math.isinf(f):
        # rounded past the format: the finite side is max_finite
        edge = math.copysign(fmt.max_finite, f)
        return (edge, f) if f > 0 else (f, edge)
    diff = Fraction(value) + Fraction(residual) - Fraction(f)
    if diff == 0:
        return f, f
    if diff > 0:
        return f, succ(f, fmt)
    return pred(f, fmt), f


# ── correctly rounded scalar ops per format ──────────────────────────
#
# binary32 values are carried in host doubles; computing the double op
# and narrowing once gives the correctly rounded binary32 result for
# {+, -, *, /, sqrt} because binary64 keeps more than twice the target
# precision plus two bits, which makes the double rounding innocuous.

def add_rn(a: float, b: float, fmt: FloatFormat) -> float:
    return narrow_to(a + b, fmt)


def sub_rn(a: float, b: float, fmt: FloatFormat) -> float:
    return narrow_to(a - b, fmt)


def mul_rn(a: float, b: float, fmt: FloatFormat) -> float:
    return narrow_to(a * b, fmt)


def div_rn(a: float, b: float, fmt: FloatFormat) -> float:
    return narrow_to(a / b, fmt)


def sqrt_rn(a: float, fmt: FloatFormat) -> float:
    return narrow_to(math.sqrt(a), fmt)


# ── correct rounding ─────────────────────────────────────────────────

def _round_scaled_magnitude(mag: int, exp: int, fmt: FloatFormat) -> float:
    """Round the exact positive value mag * 2^exp to fmt, nearest-even.

    Returns 0.0 on total underflow and inf on overflow; the result is
    always exactly representable in a host double (binary32 results lie
    on the binary32 grid).
    """
    binade = exp + mag.bit_length() - 1
    qexp = max(binade - (fmt.precision_bits - 1), fmt.quantum_exp)
    shift = qexp - exp
    if shift <= 0:
        head = mag << -shift
    else:
        head = mag >> shift
        rem = mag - (head << shift)
        half = 1 << (shift - 1)
        if rem > half or (rem == half and head & 1):
            head += 1
    if head == 0:
        return 0.0
    # overflow check: compare head * 2^qexp against the format maximum
    top = fmt.emax - fmt.precision_bits + 1
    max_mag = (1 << fmt.precision_bits) - 1
    if qexp >= top:
        if head << (qexp - top) > max_mag:
            return math.inf
    return math.ldexp(head, qexp)


def round_nearest(value: float, fmt: FloatFormat, residual: float = 0.0) -> float:
    """Correctly rounded (nearest-even) image in fmt of value + residual,
    where the extended input is carried as an exact two-term sum."""
    if math.isnan(value):
        return value
    if not math.isfinite(residual):
        raise ValueError("residual must be finite")
    if math.isinf(value):
        return value
    if residual == 0.0:
        return narrow_to(value, fmt)  # a single host rounding is exact here
    if value == 0.0:
        return round_nearest(residual, fmt)
    dv = decompose(value, BINARY64)
    dr = decompose(residual, BINARY64)
    exp = min(dv.exponent, dr.exponent)
    total = (-1) ** dv.sign * (dv.significand << (dv.exponent - exp)) + \
            (-1) ** dr.sign * (dr.significand << (dr.exponent - exp))
    if total == 0:
        return 0.0
    out = _round_scaled_magnitude(abs(total), exp, fmt)
    return -out if total < 0 else out
