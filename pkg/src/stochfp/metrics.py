"""Variability metrics over repeated stochastic executions.

Significant digits use the parametric form -log10(sigma/|mu|) with
sample std (ddof = 1), capped at p*log10(2) of the format.  The Dice
score is computed per label over voxel sets; Levene's test uses the
classic mean-centered statistic with p-values from an in-library
regularized incomplete beta, so the statistics can be cross-checked
against an independent oracle without sharing code paths.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .fpcore import BINARY64, FloatFormat

__all__ = [
    "SampleSet",
    "VariabilityReport",
    "significant_digits",
    "LabelMap",
    "DiceResult",
    "min_pairwise_dice",
    "dice_summary",
    "LeveneResult",
    "levene_test",
    "FTestResult",
    "pairwise_f_test",
    "betainc_reg",
    "f_dist_sf",
    "f_dist_cdf",
    "read_labelmap",
    "write_labelmap",
    "read_labelmap_text",
    "write_labelmap_text",
]


# ── sample sets and significant digits ───────────────────────────────

@dataclass
class SampleSet:
    """Ordered outputs of repeated runs of one experiment."""

    values: list[float]
    fmt: FloatFormat = BINARY64
    label: str = ""
    wall_ns: list[int] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        """True when any sample is non-finite."""
        return any(not math.isfinite(v) for v in self.values)


GroupLike = Union[SampleSet, Sequence[float]]


def _values(group: GroupLike) -> list[float]:
    if isinstance(group, SampleSet):
        return list(group.values)
    return [float(v) for v in group]


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _sample_std(xs: Sequence[float], mu: float) -> float:
    if len(xs) < 2:
        return 0.0
    return math.sqrt(math.fsum((x - mu) ** 2 for x in xs) / (len(xs) - 1))


@dataclass(frozen=True)
class VariabilityReport:
    """Summary statistics plus the decimal significant-digits estimate."""

    mean: float
    std: float
    sig_digits_decimal: float
    n: int
    cap: float
    absolute_mode: bool = False  # mu = 0: digits taken from -log10(sigma)
    degenerate: bool = False     # non-finite samples present

    @property
    def sig_digits_binary(self) -> float:
        return self.sig_digits_decimal * math.log2(10.0)


def significant_digits(samples: GroupLike, fmt: Optional[FloatFormat] = None) -> VariabilityReport:
    """-log10(sigma/|mu|), clamped to [0, p*log10(2)] of the format.

    sigma = 0 means every run agreed: the estimate saturates at the cap.
    mu = 0 with spread falls back to absolute digits -log10(sigma),
    flagged, since the relative form is undefined there.
    """
    xs = _values(samples)
    if not xs:
        raise ValueError("significant_digits of an empty sample set")
    if fmt is None:
        fmt = samples.fmt if isinstance(samples, SampleSet) else BINARY64
    cap = fmt.precision_bits * math.log10(2.0)
    if any(not math.isfinite(v) for v in xs):
        return VariabilityReport(math.nan, math.nan, 0.0, len(xs), cap, degenerate=True)
    mu = _mean(xs)
    sd = _sample_std(xs, mu)
    absolute = False
    if sd == 0.0:
        sig = cap
    elif mu == 0.0:
        sig = -math.log10(sd)
        absolute = True
    else:
        ratio = sd / abs(mu)
        sig = -math.log10(ratio) if ratio < 1.0 else 0.0
    sig = min(max(sig, 0.0), cap)
    return VariabilityReport(mu, sd, sig, len(xs), cap, absolute_mode=absolute)


# ── label maps and Sorensen-Dice ─────────────────────────────────────

_LMAP_MAGIC = b"LMAP"
_LMAP_VERSION = 1


@dataclass
class LabelMap:
    """Dense (x, y, z) grid of non-negative integer labels."""

    dims: tuple[int, int, int]
    labels: np.ndarray  # uint32, shape dims, C order (z fastest)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint32))
        if arr.shape != tuple(self.dims):
            arr = arr.reshape(self.dims)
        self.labels = arr

    @property
    def label_set(self) -> set[int]:
        return {int(v) for v in np.unique(self.labels)}

    def voxels(self, label: int) -> set[int]:
        """Flat C-order indices carrying the label (the set S of the
        Dice formula)."""
        return {int(i) for i in np.flatnonzero(self.labels.ravel() == label)}


class DiceResult(NamedTuple):
    value: float
    empty_pairs: int = 0       # pairs where both sets were empty (scored 1)
    label_absent: bool = False  # label missing from every map


def _dice_pair(si_mask: np.ndarray, sj_mask: np.ndarray) -> tuple[float, bool]:
    inter = int(np.logical_and(si_mask, sj_mask).sum())
    total = int(si_mask.sum()) + int(sj_mask.sum())
    if total == 0:
        return 1.0, True  # both empty: perfect agreement by convention
    return 2.0 * inter / total, False


def min_pairwise_dice(maps: Sequence[LabelMap], label: int) -> DiceResult:
    """Minimum over unordered map pairs of 2|Si n Sj| / (|Si| + |Sj|)."""
    if len(maps) < 2:
        raise ValueError("min_pairwise_dice needs at least two maps")
    dims = maps[0].dims
    if any(m.dims != dims for m in maps):
        raise ValueError("min_pairwise_dice: dimension mismatch")
    masks = [m.labels.ravel() == label for m in maps]
    if not any(mask.any() for mask in masks):
        return DiceResult(1.0, empty_pairs=len(maps) * (len(maps) - 1) // 2, label_absent=True)
    best = math.inf
    empty = 0
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            d, was_empty = _dice_pair(masks[i], masks[j])
            empty += was_empty
            best = min(best, d)
    return DiceResult(best, empty_pairs=empty)


def dice_summary(maps: Sequence[LabelMap]) -> dict:
    """Per-label minimum Dice plus the global minimum across labels."""
    labels = sorted(set().union(*(m.label_set for m in maps)))
    per_label = {lab: min_pairwise_dice(maps, lab).value for lab in labels}
    overall = min(per_label.values()) if per_label else 1.0
    return {"per_label": per_label, "min": overall}


def write_labelmap(path: str, lm: LabelMap) -> None:
    """Binary container: magic 'LMAP', version u32, dims 3 x u32, then
    row-major u32 labels; everything little-endian."""
    x, y, z = lm.dims
    with open(path, "wb") as fh:
        fh.write(_LMAP_MAGIC)
        fh.write(struct.pack("<IIII", _LMAP_VERSION, x, y, z))
        fh.write(np.ascontiguousarray(lm.labels, dtype="<u4").tobytes())


def read_labelmap(path: str) -> LabelMap:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _LMAP_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}, expected {_LMAP_MAGIC!r}")
    if len(blob) < 20:
        raise ValueError(f"{path}: truncated header ({len(blob)} bytes)")
    version, x, y, z = struct.unpack("<IIII", blob[4:20])
    if version != _LMAP_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    need = 20 + 4 * x * y * z
    if len(blob) != need:
        raise ValueError(f"{path}: expected {need} bytes for dims {(x, y, z)}, got {len(blob)}")
    labels = np.frombuffer(blob[20:], dtype="<u4").reshape((x, y, z))
    return LabelMap((x, y, z), labels.copy())


def write_labelmap_text(path: str, lm: LabelMap) -> None:
    """Plain-text twin: 'x y z' header line, then labels in C order."""
    x, y, z = lm.dims
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{x} {y} {z}\n")
        flat = lm.labels.ravel()
        for i in range(0, len(flat), 16):
            fh.write(" ".join(str(int(v)) for v in flat[i:i + 16]) + "\n")


def read_labelmap_text(path: str) -> LabelMap:
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise ValueError(f"{path}: missing dims header")
    try:
        x, y, z = (int(t) for t in tokens[:3])
        vals = [int(t) for t in tokens[3:]]
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer token ({exc})") from None
    if len(vals) != x * y * z:
        raise ValueError(f"{path}: expected {x * y * z} labels, got {len(vals)}")
    if any(v < 0 for v in vals):
        raise ValueError(f"{path}: negative label")
    return LabelMap((x, y, z), np.asarray(vals, dtype=np.uint32).reshape((x, y, z)))


# ── F distribution via the regularized incomplete beta ───────────────

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge: a={a} b={b} x={x}")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("betainc_reg needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def f_dist_cdf(x: float, d1: float, d2: float) -> float:
    """P(F <= x) for F(d1, d2)."""
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return betainc_reg(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


def f_dist_sf(x: float, d1: float, d2: float) -> float:
    """P(F > x), computed directly in the tail for accuracy."""
    if x <= 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return betainc_reg(d2 / 2.0, d1 / 2.0, d2 / (d1 * x + d2))


# ── Levene and pairwise F tests ──────────────────────────────────────

class LeveneResult(NamedTuple):
    statistic: float
    pvalue: float
    degenerate: bool = False


def levene_test(groups: Sequence[GroupLike]) -> LeveneResult:
    """Classic mean-centered Levene test of variance homogeneity.

    W is the one-way ANOVA F statistic over z_ij = |x_ij - mean_i|;
    the p-value comes from F(k-1, N-k).
    """
    data = [_values(g) for g in groups]
    k = len(data)
    if k < 2:
        raise ValueError("levene_test needs at least two groups")
    if any(len(g) < 2 for g in data):
        raise ValueError("levene_test needs >= 2 samples per group")
    n_total = sum(len(g) for g in data)
    z = []
    for g in data:
        mu = _mean(g)
        z.append([abs(x - mu) for x in g])
    zbar_i = [_mean(zg) for zg in z]
    zbar = math.fsum(math.fsum(zg) for zg in z) / n_total
    between = math.fsum(len(zg) * (zi - zbar) ** 2 for zg, zi in zip(z, zbar_i))
    within = math.fsum(
        math.fsum((zv - zi) ** 2 for zv in zg) for zg, zi in zip(z, zbar_i)
    )
    d1, d2 = k - 1, n_total - k
    if within == 0.0:
        if between == 0.0:
            return LeveneResult(0.0, 1.0, degenerate=True)
        return LeveneResult(math.inf, 0.0, degenerate=True)
    w = (between / d1) / (within / d2)
    return LeveneResult(w, f_dist_sf(w, d1, d2))


class FTestResult(NamedTuple):
    statistic: float
    pvalue: float
    degenerate: bool = False


def pairwise_f_test(a: GroupLike, b: GroupLike) -> FTestResult:
    """Two-sided variance-ratio test: F = s_a^2 / s_b^2 on
    (n_a - 1, n_b - 1) degrees of freedom."""
    xa, xb = _values(a), _values(b)
    if len(xa) < 2 or len(xb) < 2:
        raise ValueError("pairwise_f_test needs >= 2 samples per set")
    va = _sample_std(xa, _mean(xa)) ** 2
    vb = _sample_std(xb, _mean(xb)) ** 2
    if vb == 0.0:
        if va == 0.0:
            return FTestResult(math.nan, math.nan, degenerate=True)
        return FTestResult(math.inf, 0.0, degenerate=True)
    f = va / vb
    d1, d2 = len(xa) - 1, len(xb) - 1
    p = 2.0 * min(f_dist_cdf(f, d1, d2), f_dist_sf(f, d1, d2))
    return FTestResult(f, min(p, 1.0))
