"""Variability metrics: contract examples, brute-force twins, scipy cross-checks."""

import math

import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import dice_bruteforce
from stochfp.fpcore import BINARY32, BINARY64
from stochfp.metrics import (
    LabelMap,
    SampleSet,
    betainc_reg,
    dice_summary,
    f_dist_cdf,
    f_dist_sf,
    levene_test,
    min_pairwise_dice,
    pairwise_f_test,
    read_labelmap,
    read_labelmap_text,
    significant_digits,
    write_labelmap,
    write_labelmap_text,
)

B32_CAP = 24 * math.log10(2.0)
B64_CAP = 53 * math.log10(2.0)


# ── significant digits ───────────────────────────────────────────────

def test_sig_digits_identical_runs_saturate():
    r = significant_digits([1.5] * 20, BINARY32)
    assert r.sig_digits_decimal == r.cap == pytest.approx(B32_CAP, abs=1e-12)
    assert r.std == 0.0 and not r.absolute_mode and not r.degenerate
    r64 = significant_digits([2.75] * 5, BINARY64)
    assert r64.cap == pytest.approx(B64_CAP, abs=1e-12)


def test_sig_digits_three_decimal_example():
    # two samples engineered so that std/|mean| = 10^-3 exactly up to
    # float rounding of the construction itself
    target = 1e-3
    x = math.sqrt(2.0) * target / (1.0 - math.sqrt(2.0) / 2.0 * target)
    samples = [1.0, 1.0 + x]
    r = significant_digits(samples, BINARY64)
    mu = (1.0 + (1.0 + x)) / 2.0
    sd = math.sqrt((1.0 + x - mu) ** 2 + (1.0 - mu) ** 2)  # ddof = 1
    assert r.mean == pytest.approx(mu, rel=1e-15)
    assert r.std == pytest.approx(sd, rel=1e-12)
    assert r.sig_digits_decimal == pytest.approx(3.0, abs=1e-9)


def test_sig_digits_formula_dual_route(rnd):
    for _ in range(200):
        xs = [rnd.uniform(0.5, 2.0) for _ in range(rnd.randint(2, 12))]
        r = significant_digits(xs, BINARY64)
        mu = sum(xs) / len(xs)
        var = sum((v - mu) ** 2 for v in xs) / (len(xs) - 1)
        sd = math.sqrt(var)
        assert r.mean == pytest.approx(mu, rel=1e-13)
        assert r.std == pytest.approx(sd, rel=1e-10)
        if sd > 0.0 and mu != 0.0 and sd / abs(mu) < 1.0:
            want = min(-math.log10(sd / abs(mu)), B64_CAP)
            assert r.sig_digits_decimal == pytest.approx(want, abs=1e-10)


def test_sig_digits_scale_invariance(rnd):
    xs = [rnd.uniform(1.0, 2.0) for _ in range(10)]
    base = significant_digits(xs, BINARY64).sig_digits_decimal
    for k in (-40, -3, 7, 60):
        scaled = [math.ldexp(v, k) for v in xs]
        got = significant_digits(scaled, BINARY64).sig_digits_decimal
        assert got == pytest.approx(base, abs=1e-9)


def test_sig_digits_ratio_at_least_one_floors_to_zero():
    r = significant_digits([1.0, -1.0, 3.0, -3.0], BINARY64)
    assert r.sig_digits_decimal == 0.0


def test_sig_digits_zero_mean_absolute_mode():
    r = significant_digits([-0.001, 0.001], BINARY64)
    assert r.absolute_mode
    assert r.mean == 0.0
    assert r.sig_digits_decimal == pytest.approx(
        min(-math.log10(r.std), B64_CAP), abs=1e-12)


def test_sig_digits_degenerate_and_errors():
    r = significant_digits([1.0, math.inf], BINARY64)
    assert r.degenerate and r.sig_digits_decimal == 0.0
    with pytest.raises(ValueError):
        significant_digits([], BINARY64)


def test_sig_digits_sampleset_carries_format():
    s = SampleSet(values=[1.0, 1.0], fmt=BINARY32)
    assert significant_digits(s).cap == pytest.approx(B32_CAP, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False),
                min_size=2, max_size=30),
       st.integers(min_value=-20, max_value=20))
def test_sig_digits_scaling_property(xs, k):
    base = significant_digits(xs, BINARY64)
    scaled = significant_digits([math.ldexp(v, k) for v in xs], BINARY64)
    assert scaled.sig_digits_decimal == pytest.approx(
        base.sig_digits_decimal, abs=1e-6)


# ── Sorensen-Dice over label maps ────────────────────────────────────

def _random_maps(rnd, count, dims=(8, 8, 4), nlabels=4):
    maps = []
    for _ in range(count):
        flat = [rnd.randrange(nlabels) for _ in range(dims[0] * dims[1] * dims[2])]
        maps.append(LabelMap(dims, np.asarray(flat, dtype=np.uint32).reshape(dims)))
    return maps


def test_dice_identical_maps_exactly_one(rnd):
    m = _random_maps(rnd, 1)[0]
    twin = LabelMap(m.dims, m.labels.copy())
    for lab in m.label_set:
        assert min_pairwise_dice([m, twin, m], lab).value == 1.0
    assert dice_summary([m, twin]) == {"per_label": {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0},
                                       "min": 1.0}


def test_dice_half_overlap_example():
    # {a, b} vs {b, c}: dice = 2*1/(2+2) = 0.5 on label 1
    a = LabelMap((2, 2, 1), np.array([1, 1, 0, 0], dtype=np.uint32).reshape(2, 2, 1))
    b = LabelMap((2, 2, 1), np.array([0, 1, 1, 0], dtype=np.uint32).reshape(2, 2, 1))
    assert min_pairwise_dice([a, b], 1).value == 0.5


def test_dice_single_flip_closed_form():
    # flipping one voxel of k: dice = 2(k-1) / (2k-1)
    dims = (4, 4, 1)
    base = np.zeros(dims, dtype=np.uint32)
    base[:2] = 1  # k = 8 voxels of label 1
    flipped = base.copy()
    flipped[0, 0, 0] = 0
    got = min_pairwise_dice([LabelMap(dims, base), LabelMap(dims, flipped)], 1)
    assert got.value == pytest.approx(2 * 7 / 15, rel=1e-15)


def test_dice_vs_bruteforce(rnd):
    maps = _random_maps(rnd, 12)
    for lab in range(4):
        want = dice_bruteforce([m.labels for m in maps], lab)
        got = min_pairwise_dice(maps, lab)
        assert got.value == pytest.approx(want, rel=1e-14)


def test_dice_order_invariance(rnd):
    maps = _random_maps(rnd, 6)
    fwd = min_pairwise_dice(maps, 2).value
    rev = min_pairwise_dice(list(reversed(maps)), 2).value
    assert fwd == rev


def test_dice_absent_label_and_empty_pairs(rnd):
    maps = _random_maps(rnd, 3)
    res = min_pairwise_dice(maps, 99)
    assert res.value == 1.0 and res.label_absent
    assert res.empty_pairs == 3
    present = min_pairwise_dice(maps, 1)
    assert not present.label_absent and present.empty_pairs == 0


def test_dice_validation(rnd):
    maps = _random_maps(rnd, 2)
    with pytest.raises(ValueError):
        min_pairwise_dice(maps[:1], 0)
    other = _random_maps(rnd, 1, dims=(4, 4, 4))[0]
    with pytest.raises(ValueError):
        min_pairwise_dice([maps[0], other], 0)


# ── label map containers ─────────────────────────────────────────────

def test_labelmap_binary_roundtrip(tmp_path, rnd):
    m = _random_maps(rnd, 1, dims=(3, 5, 2), nlabels=7)[0]
    p = str(tmp_path / "m.lmap")
    write_labelmap(p, m)
    back = read_labelmap(p)
    assert back.dims == m.dims
    assert np.array_equal(back.labels, m.labels)


def test_labelmap_binary_layout(tmp_path):
    m = LabelMap((1, 1, 2), np.array([3, 9], dtype=np.uint32).reshape(1, 1, 2))
    p = str(tmp_path / "m.lmap")
    write_labelmap(p, m)
    blob = open(p, "rb").read()
    assert blob == (b"LMAP"
                    + (1).to_bytes(4, "little")
                    + (1).to_bytes(4, "little") * 2
                    + (2).to_bytes(4, "little")
                    + (3).to_bytes(4, "little")
                    + (9).to_bytes(4, "little"))


def test_labelmap_text_roundtrip(tmp_path, rnd):
    m = _random_maps(rnd, 1, dims=(2, 3, 7), nlabels=5)[0]
    p = str(tmp_path / "m.txt")
    write_labelmap_text(p, m)
    back = read_labelmap_text(p)
    assert back.dims == m.dims
    assert np.array_equal(back.labels, m.labels)


def test_labelmap_corrupt_files(tmp_path):
    bad_magic = tmp_path / "bad.lmap"
    bad_magic.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ValueError, match="bad magic"):
        read_labelmap(str(bad_magic))

    trunc = tmp_path / "trunc.lmap"
    trunc.write_bytes(b"LMAP\x01\x00\x00")
    with pytest.raises(ValueError, match="truncated"):
        read_labelmap(str(trunc))

    import struct
    wrong_ver = tmp_path / "ver.lmap"
    wrong_ver.write_bytes(b"LMAP" + struct.pack("<IIII", 9, 1, 1, 1) + b"\x00" * 4)
    with pytest.raises(ValueError, match="version"):
        read_labelmap(str(wrong_ver))

    short = tmp_path / "short.lmap"
    short.write_bytes(b"LMAP" + struct.pack("<IIII", 1, 2, 2, 2) + b"\x00" * 8)
    with pytest.raises(ValueError, match="expected"):
        read_labelmap(str(short))

    bad_text = tmp_path / "bad.txt"
    bad_text.write_text("2 2 1\n0 1 x 3\n")
    with pytest.raises(ValueError, match="non-integer"):
        read_labelmap_text(str(bad_text))

    miscount = tmp_path / "count.txt"
    miscount.write_text("2 2 1\n0 1 2\n")
    with pytest.raises(ValueError, match="expected 4 labels"):
        read_labelmap_text(str(miscount))


# ── incomplete beta and the F distribution ───────────────────────────

def test_betainc_vs_scipy(rnd):
    assert betainc_reg(2.0, 3.0, 0.0) == 0.0
    assert betainc_reg(2.0, 3.0, 1.0) == 1.0
    for _ in range(400):
        a = rnd.uniform(0.05, 80.0)
        b = rnd.uniform(0.05, 80.0)
        x = rnd.random()
        want = float(scipy.special.betainc(a, b, x))
        got = betainc_reg(a, b, x)
        assert got == pytest.approx(want, rel=1e-11, abs=1e-13)


def test_betainc_validation():
    with pytest.raises(ValueError):
        betainc_reg(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        betainc_reg(1.0, -2.0, 0.5)
    # x outside [0, 1] clamps to the boundary values
    assert betainc_reg(1.0, 1.0, 1.5) == 1.0
    assert betainc_reg(1.0, 1.0, -0.5) == 0.0


def test_f_dist_vs_scipy(rnd):
    for _ in range(300):
        d1 = rnd.randint(1, 80)
        d2 = rnd.randint(1, 80)
        x = rnd.uniform(0.001, 20.0)
        sf = float(scipy.stats.f.sf(x, d1, d2))
        cdf = float(scipy.stats.f.cdf(x, d1, d2))
        assert f_dist_sf(x, d1, d2) == pytest.approx(sf, rel=1e-10, abs=1e-14)
        assert f_dist_cdf(x, d1, d2) == pytest.approx(cdf, rel=1e-10, abs=1e-14)
        assert f_dist_sf(x, d1, d2) + f_dist_cdf(x, d1, d2) == pytest.approx(1.0, abs=1e-12)
    assert f_dist_sf(0.0, 3, 4) == 1.0
    assert f_dist_cdf(0.0, 3, 4) == 0.0


# ── Levene ───────────────────────────────────────────────────────────

def test_levene_vs_scipy_random_configs(rnd):
    for _ in range(120):
        k = rnd.randint(2, 5)
        groups = []
        for _ in range(k):
            n = rnd.randint(3, 25)
            scale = 10.0 ** rnd.randint(-3, 3)
            groups.append([rnd.gauss(rnd.uniform(-2, 2), scale) for _ in range(n)])
        stat, p, degen = levene_test(groups)
        want = scipy.stats.levene(*groups, center="mean")
        assert not degen
        assert stat == pytest.approx(float(want.statistic), rel=1e-10, abs=1e-12)
        assert p == pytest.approx(float(want.pvalue), rel=1e-10, abs=1e-12)


def test_levene_equal_spread_is_degenerate_free():
    a = [1.0, 2.0, 3.0]
    b = [4.0, 5.0, 6.0]
    stat, p, degen = levene_test([a, b])
    assert stat == 0.0 and p == 1.0 and not degen


def test_levene_degenerate_zero_within_spread():
    stat, p, degen = levene_test([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    assert degen


def test_levene_validation():
    with pytest.raises(ValueError):
        levene_test([[1.0, 2.0]])
    with pytest.raises(ValueError):
        levene_test([[1.0], [2.0, 3.0]])


def test_levene_accepts_samplesets():
    a = SampleSet(values=[1.0, 2.0, 3.5, 2.2])
    b = SampleSet(values=[1.1, 2.4, 3.1, 2.0])
    stat, p, degen = levene_test([a, b])
    want = scipy.stats.levene(a.values, b.values, center="mean")
    assert stat == pytest.approx(float(want.statistic), rel=1e-12)


# ── pairwise variance-ratio test ─────────────────────────────────────

def test_pairwise_f_vs_scipy_formula(rnd):
    for _ in range(200):
        na, nb = rnd.randint(3, 40), rnd.randint(3, 40)
        a = [rnd.gauss(0.0, rnd.uniform(0.5, 3.0)) for _ in range(na)]
        b = [rnd.gauss(0.0, rnd.uniform(0.5, 3.0)) for _ in range(nb)]
        stat, p, degen = pairwise_f_test(a, b)
        va = np.var(a, ddof=1)
        vb = np.var(b, ddof=1)
        assert not degen
        assert stat == pytest.approx(va / vb, rel=1e-12)
        sf = float(scipy.stats.f.sf(va / vb, na - 1, nb - 1))
        want_p = min(1.0, 2.0 * min(sf, 1.0 - sf))
        assert p == pytest.approx(want_p, rel=1e-9, abs=1e-12)


def test_pairwise_f_identical_groups():
    a = [1.0, 2.0, 3.0, 4.0]
    stat, p, degen = pairwise_f_test(a, list(a))
    assert stat == 1.0 and p == pytest.approx(1.0)


def test_pairwise_f_known_ratio():
    # var 4.0 vs var 1.0 with n = 4 each
    a = [0.0, 4.0, 0.0, 4.0]  # var = 16/3
    b = [0.0, 2.0, 0.0, 2.0]  # var = 4/3
    stat, p, degen = pairwise_f_test(a, b)
    assert stat == pytest.approx(4.0, rel=1e-14)
    sf = float(scipy.stats.f.sf(4.0, 3, 3))
    assert p == pytest.approx(2.0 * min(sf, 1.0 - sf), rel=1e-10)


def test_pairwise_f_degenerate_zero_denominator():
    stat, p, degen = pairwise_f_test([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    assert degen
