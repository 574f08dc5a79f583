import random

import pytest

from stochfp.fpcore import BINARY32, BINARY64, narrow_to


@pytest.fixture(params=[BINARY32, BINARY64], ids=["b32", "b64"])
def fmt(request):
    return request.param


@pytest.fixture
def rnd():
    return random.Random(0xC0FFEE)


def random_finite(rnd: random.Random, fmt, emin: int = -30, emax: int = 30) -> float:
    """A random format value with a full-width significand, exponent in a
    range that keeps products/quotients finite and normal."""
    m = rnd.getrandbits(fmt.precision_bits) | (1 << (fmt.precision_bits - 1))
    sign = -1.0 if rnd.getrandbits(1) else 1.0
    import math
    return narrow_to(sign * math.ldexp(m, rnd.randint(emin, emax) - fmt.precision_bits + 1), fmt)
