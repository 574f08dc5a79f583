"""Probabilistic rounding modes over correctly rounded scalar kernels.

Five modes share one vocabulary: RN is the deterministic baseline; SR
picks the neighbor in the direction of the exact residual with
probability |residual| / gap (unbiased); CESTAC picks that neighbor
with probability 1/2 (biased toward the midpoint); UD leaves the RN
result and then jumps one ulp up or down with equal probability; MCA-RR
adds a uniform perturbation at virtual precision t before re-rounding.

Variate budget (fixed so traces replay bitwise): SR, CESTAC, and MCA
consume one uniform per inexact finalize and none when the operation is
exact, non-finite, or suppressed at the range edge; UD consumes one
sign draw per finite nonzero input away from the overflow edge and none
otherwise.  All suppression branches run before the draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from . import eft
from .fpcore import (
    FloatFormat,
    add_rn,
    div_rn,
    mul_rn,
    narrow_to,
    pred,
    sqrt_rn,
    sub_rn,
    succ,
    ulp,
)
from .rng import RngStream

__all__ = [
    "RoundingMode",
    "PerturbedOpContext",
    "parse_mode",
    "mode_label",
    "sr_finalize",
    "ud_round",
    "cestac_round",
    "mca_rr_round",
    "perturbed_add",
    "perturbed_sub",
    "perturbed_mul",
    "perturbed_div",
    "perturbed_sqrt",
    "perturbed_fma",
]

RN = "rn"
SR = "sr"
UD = "ud"
CESTAC = "cestac"
MCA_RR = "mca_rr"

_KINDS = (RN, SR, UD, CESTAC, MCA_RR)


@dataclass(frozen=True)
class RoundingMode:
    """A rounding rule; virtual_precision_t applies to MCA_RR only
    (None means "use the full precision p of the active format")."""

    kind: str
    virtual_precision_t: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown rounding mode kind: {self.kind!r}")
        if self.virtual_precision_t is not None:
            if self.kind != MCA_RR:
                raise ValueError("virtual precision applies to mca_rr only")
            if self.virtual_precision_t < 1:
                raise ValueError("virtual precision t must be >= 1")


def parse_mode(text: str) -> RoundingMode:
    """Parse the mode grammar `rn | sr | ud | cestac | mca@<t>`
    (bare `mca` selects the full-precision default t = p)."""
    s = text.strip().lower()
    if s in (RN, SR, UD, CESTAC):
        return RoundingMode(s)
    if s == "mca":
        return RoundingMode(MCA_RR)
    if s.startswith("mca@"):
        try:
            t = int(s[4:])
        except ValueError:
            raise ValueError(f"bad virtual precision in mode string: {text!r}") from None
        return RoundingMode(MCA_RR, t)
    raise ValueError(f"unrecognized rounding mode: {text!r}")


def mode_label(mode: RoundingMode) -> str:
    """Inverse of parse_mode, used in reports."""
    if mode.kind == MCA_RR:
        return "mca" if mode.virtual_precision_t is None else f"mca@{mode.virtual_precision_t}"
    return mode.kind


@dataclass
class PerturbedOpContext:
    """Everything a perturbed scalar op needs: rule, format, randomness."""

    mode: RoundingMode
    fmt: FloatFormat
    stream: RngStream

    def resolved_t(self) -> int:
        t = self.mode.virtual_precision_t
        if t is None:
            return self.fmt.precision_bits
        if not 1 <= t <= self.fmt.precision_bits:
            raise ValueError(f"virtual precision t={t} outside 1..{self.fmt.precision_bits}")
        return t


# ── mode finalizers ──────────────────────────────────────────────────

def sr_finalize(head: float, tail: float, ctx: PerturbedOpContext) -> float:
    """Stochastic rounding: move to the neighbor in the residual's
    direction with probability |tail| / gap, so E[result] = head + tail."""
    if not math.isfinite(head) or tail == 0.0:
        return head
    nb = succ(head, ctx.fmt) if tail > 0.0 else pred(head, ctx.fmt)
    if math.isinf(nb):
        return head  # suppressed at the overflow edge, no draw
    gap = abs(nb - head)  # exact: spacing between adjacent representables
    if ctx.stream.next_unit_uniform() < abs(tail) / gap:
        return nb
    return head


def cestac_round(head: float, tail: float, ctx: PerturbedOpContext) -> float:
    """Random rounding of the CESTAC method: floor or ceil of the exact
    value with probability 1/2 each; exact operations stay exact."""
    if not math.isfinite(head) or tail == 0.0:
        return head
    nb = succ(head, ctx.fmt) if tail > 0.0 else pred(head, ctx.fmt)
    if math.isinf(nb):
        return head
    if ctx.stream.next_unit_uniform() < 0.5:
        return nb
    return head


def ud_round(x_rn: float, ctx: PerturbedOpContext) -> float:
    """Uniform-displacement rounding: x_rn +/- ulp(x_rn) with equal
    probability; zero is left alone (its displacement is defined as 0)."""
    if not math.isfinite(x_rn) or x_rn == 0.0:
        return x_rn
    eps = ulp(x_rn, ctx.fmt)
    up = add_rn(x_rn, eps, ctx.fmt)
    down = sub_rn(x_rn, eps, ctx.fmt)
    if math.isinf(up) or math.isinf(down):
        return x_rn  # suppressed at the overflow edge, no draw
    return up if ctx.stream.next_sign() > 0 else down


def mca_rr_round(head: float, tail: float, ctx: PerturbedOpContext,
                 t: Optional[int] = None) -> float:
    """Monte Carlo arithmetic, random-rounding variant: re-round
    exact + xi * 2^(e_x - t) with xi uniform on [-1/2, 1/2).

    The exact value is carried as (head, tail) and the perturbed sum is
    evaluated at twice the target precision: plain binary64 arithmetic
    for a binary32 target, a two_sum cascade (double-double) for a
    binary64 target.  A perturbation that overflows is clamped back to
    head after the draw.
    """
    if not math.isfinite(head):
        return head
    if t is None:
        t = ctx.resolved_t()
    elif not 1 <= t <= ctx.fmt.precision_bits:
        raise ValueError(f"virtual precision t={t} outside 1..{ctx.fmt.precision_bits}")
    v = head + tail
    if v == 0.0:
        return head
    e_x = math.frexp(v)[1]
    xi = ctx.stream.next_unit_uniform() - 0.5
    pert = math.ldexp(xi, e_x - t)
    if ctx.fmt.width == 32:
        out = narrow_to(v + pert, ctx.fmt)  # binary64 is twice the target precision
    else:
        s1, s2 = eft.two_sum(tail, pert)[:2]
        r1, r2 = eft.two_sum(head, s1)[:2]
        out = r1 + (r2 + s2)
    if not math.isfinite(out):
        return head
    return out


def _finalize(head: float, tail: float, ctx: PerturbedOpContext) -> float:
    kind = ctx.mode.kind
    if kind == SR:
        return sr_finalize(head, tail, ctx)
    if kind == CESTAC:
        return cestac_round(head, tail, ctx)
    if kind == MCA_RR:
        return mca_rr_round(head, tail, ctx)
    raise ValueError(f"no residual finalizer for mode {kind!r}")


# ── perturbed scalar operations ──────────────────────────────────────

def perturbed_add(a: float, b: float, ctx: PerturbedOpContext) -> float:
    kind = ctx.mode.kind
    if kind == RN:
        return add_rn(a, b, ctx.fmt)
    if kind == UD:
        return ud_round(add_rn(a, b, ctx.fmt), ctx)
    pair = eft.two_sum(a, b, ctx.fmt)
    if math.isnan(pair.tail):
        return pair.head  # overflow: RN result unperturbed
    return _finalize(pair.head, pair.tail, ctx)


def perturbed_sub(a: float, b: float, ctx: PerturbedOpContext) -> float:
    return perturbed_add(a, -b, ctx)


def perturbed_mul(a: float, b: float, ctx: PerturbedOpContext) -> float:
    kind = ctx.mode.kind
    if kind == RN:
        return mul_rn(a, b, ctx.fmt)
    if kind == UD:
        return ud_round(mul_rn(a, b, ctx.fmt), ctx)
    pair = eft.two_prod_fma(a, b, ctx.fmt)
    if math.isnan(pair.tail):
        return pair.head
    return _finalize(pair.head, pair.tail, ctx)


def perturbed_div(a: float, b: float, ctx: PerturbedOpContext) -> float:
    kind = ctx.mode.kind
    q = div_rn(a, b, ctx.fmt)
    if kind == RN:
        return q
    if kind == UD:
        return ud_round(q, ctx)
    if not math.isfinite(q):
        return q
    r = eft.residual_div(a, b, q, ctx.fmt)
    # true residual of the quotient is r / b; one rounding here only
    # perturbs the neighbor probability by ~2^-53 relative. An exact
    # quotient (r == 0) still reaches the finalizer: MCA dithers exact
    # results just like it does for add and mul.
    return _finalize(q, r / b, ctx)


def perturbed_sqrt(a: float, ctx: PerturbedOpContext) -> float:
    kind = ctx.mode.kind
    s = sqrt_rn(a, ctx.fmt)
    if kind == RN:
        return s
    if kind == UD:
        return ud_round(s, ctx)
    if not math.isfinite(s) or s == 0.0:
        return s
    r = eft.residual_sqrt(a, s, ctx.fmt)
    # sqrt(a) - s = r / (sqrt(a) + s) ~= r / (2s), same rounding argument
    # as division; exact roots keep flowing through the finalizer
    return _finalize(s, r / (2.0 * s), ctx)


def perturbed_fma(a: float, b: float, c: float, ctx: PerturbedOpContext) -> float:
    """Fused multiply-add under the active mode without touching the
    rounding-mode register: the residual of RN(a*b + c) is assembled
    from error-free transforms and handed to the mode finalizer."""
    kind = ctx.mode.kind
    sigma = eft.fma(a, b, c, ctx.fmt)
    if kind == RN:
        return sigma
    if kind == UD:
        return ud_round(sigma, ctx)
    if not math.isfinite(sigma):
        return sigma
    u1, u2, _ = eft.two_prod_fma(a, b, ctx.fmt)
    a1, a2, _ = eft.two_sum(c, u2, ctx.fmt)
    b1, b2, _ = eft.two_sum(u1, a1, ctx.fmt)
    # a*b + c == b1 + b2 + a2 exactly; b1 - sigma is exact by Sterbenz
    gamma = add_rn(sub_rn(b1, sigma, ctx.fmt), b2, ctx.fmt)
    tau = add_rn(gamma, a2, ctx.fmt)
    if not math.isfinite(tau):
        return sigma  # residual chain overflowed; leave the RN result
    return _finalize(sigma, tau, ctx)
