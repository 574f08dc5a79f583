# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of the pure-Python arithmetic core.

Every operation reproduces the pure implementation bit for bit: the
same Philox draw sequence, the same error-free transforms, the same
neighbor selection.  binary32 ops are written as one double operation
followed by one narrowing cast, exactly like the pure code, so parity
needs no theorems about native float instructions.  The build disables
floating-point contraction; a*b+c must never silently fuse.
"""

from libc.stdint cimport int64_t, uint32_t, uint64_t
from libc.string cimport memcpy
from libc.math cimport INFINITY, fabs, fma, frexp, isfinite, isinf, ldexp, nextafter, sqrt

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t stochfp_mulhi64(uint64_t a, uint64_t b) {
        return (uint64_t)(((unsigned __int128)a * b) >> 64);
    }
    """
    uint64_t stochfp_mulhi64(uint64_t a, uint64_t b) nogil

# ── Philox4x64-10 ────────────────────────────────────────────────────

cdef uint64_t M0 = 0xD2E7470EE14C6C93
cdef uint64_t M1 = 0xCA5A826395121157
cdef uint64_t W0 = 0x9E3779B97F4A7C15
cdef uint64_t W1 = 0xBB67AE8584CAA73B

cdef double UNIT53 = 1.0 / 9007199254740992.0  # 2^-53, exact

cdef struct Stream:
    uint64_t seed
    uint64_t sid
    uint64_t lo
    uint64_t hi


cdef inline uint64_t philox_word0(uint64_t c0, uint64_t c1, uint64_t k0, uint64_t k1) noexcept nogil:
    cdef uint64_t x0 = c0, x1 = c1, x2 = 0, x3 = 0
    cdef uint64_t p0, p1, h0, h1, t0, t1
    cdef int r
    for r in range(10):
        p0 = M0 * x0
        p1 = M1 * x2
        h0 = stochfp_mulhi64(M0, x0)
        h1 = stochfp_mulhi64(M1, x2)
        t0 = h1 ^ x1 ^ k0
        t1 = p1
        x2 = h0 ^ x3 ^ k1
        x3 = p0
        x0 = t0
        x1 = t1
        k0 = k0 + W0
        k1 = k1 + W1
    return x0


cdef inline uint64_t next_u64(Stream* s) noexcept nogil:
    cdef uint64_t w = philox_word0(s.lo, s.hi, s.seed, s.sid)
    s.lo += 1
    if s.lo == 0:
        s.hi += 1
    return w


cdef inline double next_uniform(Stream* s) noexcept nogil:
    return <double>(next_u64(s) >> 11) * UNIT53


# ── bit views and neighbors ──────────────────────────────────────────

cdef inline uint64_t d2b(double x) noexcept nogil:
    cdef uint64_t b
    memcpy(&b, &x, 8)
    return b


cdef inline double b2d(uint64_t b) noexcept nogil:
    cdef double x
    memcpy(&x, &b, 8)
    return x


cdef inline uint32_t f2b(float x) noexcept nogil:
    cdef uint32_t b
    memcpy(&b, &x, 4)
    return b


cdef inline float b2f(uint32_t b) noexcept nogil:
    cdef float x
    memcpy(&x, &b, 4)
    return x


cdef inline double succ64(double x) noexcept nogil:
    cdef uint64_t b
    cdef double out
    if x == 0.0:
        return b2d(1)
    b = d2b(x)
    b = b + 1 if x > 0.0 else b - 1
    out = b2d(b)
    return 0.0 if out == 0.0 else out


cdef inline double pred64(double x) noexcept nogil:
    cdef uint64_t b
    cdef double out
    if x == 0.0:
        return -b2d(1)
    b = d2b(x)
    b = b - 1 if x > 0.0 else b + 1
    out = b2d(b)
    return 0.0 if out == 0.0 else out


cdef inline float succ32(float x) noexcept nogil:
    cdef uint32_t b
    cdef float out
    if x == 0.0:
        return b2f(1)
    b = f2b(x)
    b = b + 1 if x > 0.0 else b - 1
    out = b2f(b)
    return 0.0 if out == 0.0 else out


cdef inline float pred32(float x) noexcept nogil:
    cdef uint32_t b
    cdef float out
    if x == 0.0:
        return -b2f(1)
    b = f2b(x)
    b = b - 1 if x > 0.0 else b + 1
    out = b2f(b)
    return 0.0 if out == 0.0 else out


cdef inline double ulp64(double x) noexcept nogil:
    # spacing of the binade containing |x| (above |x| at powers of two);
    # built from the exponent field, finite nonzero x only
    cdef uint64_t e = (d2b(fabs(x)) >> 52) & 0x7FF
    if e <= 52:
        return b2d(<uint64_t>1 << (e - 1)) if e > 0 else b2d(1)
    return b2d((e - 52) << 52)


cdef inline double ulp32(double x) noexcept nogil:
    cdef uint32_t e = (f2b(<float>fabs(x)) >> 23) & 0xFF
    if e <= 23:
        return <double>b2f(<uint32_t>1 << (e - 1)) if e > 0 else <double>b2f(1)
    return <double>b2f((e - 23) << 23)


# ── mode finalizers, binary64 ────────────────────────────────────────

cdef inline double sr64(double head, double tail, Stream* s) noexcept nogil:
    cdef double nb, gap
    if not isfinite(head) or tail == 0.0:
        return head
    nb = succ64(head) if tail > 0.0 else pred64(head)
    if isinf(nb):
        return head
    gap = fabs(nb - head)
    if next_uniform(s) < fabs(tail) / gap:
        return nb
    return head


cdef inline double cestac64(double head, double tail, Stream* s) noexcept nogil:
    cdef double nb
    if not isfinite(head) or tail == 0.0:
        return head
    nb = succ64(head) if tail > 0.0 else pred64(head)
    if isinf(nb):
        return head
    if next_uniform(s) < 0.5:
        return nb
    return head


cdef inline double ud64(double x, Stream* s) noexcept nogil:
    cdef double eps, up, down
    cdef uint64_t m
    if not isfinite(x) or x == 0.0:
        return x
    eps = ulp64(x)
    up = x + eps
    down = x - eps
    if isinf(up) or isinf(down):
        return x
    m = 0 - (next_u64(s) >> 63)  # branchless select: all-ones picks down
    return b2d((d2b(up) & ~m) | (d2b(down) & m))


cdef inline double mca64(double head, double tail, int t, Stream* s) noexcept nogil:
    cdef double v, pert, s1, s2, r1, r2, bp, ap, db, da, out
    cdef int e
    if not isfinite(head):
        return head
    v = head + tail
    if v == 0.0:
        return head
    frexp(v, &e)
    pert = ldexp(next_uniform(s) - 0.5, e - t)
    s1 = tail + pert
    bp = s1 - tail
    ap = s1 - bp
    db = pert - bp
    da = tail - ap
    s2 = da + db
    r1 = head + s1
    bp = r1 - head
    ap = r1 - bp
    db = s1 - bp
    da = head - ap
    r2 = da + db
    out = r1 + (r2 + s2)
    if not isfinite(out):
        return head
    return out


cdef inline double finalize64(double head, double tail, int mode, int t, Stream* s) noexcept nogil:
    if mode == 1:
        return sr64(head, tail, s)
    if mode == 3:
        return cestac64(head, tail, s)
    return mca64(head, tail, t, s)


# ── mode finalizers, binary32 (tails carried as doubles) ─────────────

cdef inline float sr32(float head, double tail, Stream* s) noexcept nogil:
    cdef float nb
    cdef double gap
    if not isfinite(head) or tail == 0.0:
        return head
    nb = succ32(head) if tail > 0.0 else pred32(head)
    if isinf(nb):
        return head
    gap = fabs(<double>nb - <double>head)
    if next_uniform(s) < fabs(tail) / gap:
        return nb
    return head


cdef inline float cestac32(float head, double tail, Stream* s) noexcept nogil:
    cdef float nb
    if not isfinite(head) or tail == 0.0:
        return head
    nb = succ32(head) if tail > 0.0 else pred32(head)
    if isinf(nb):
        return head
    if next_uniform(s) < 0.5:
        return nb
    return head


cdef inline float ud32(float x, Stream* s) noexcept nogil:
    cdef double eps
    cdef float up, down
    cdef uint32_t m
    if not isfinite(x) or x == 0.0:
        return x
    eps = ulp32(<double>x)
    up = <float>(<double>x + eps)
    down = <float>(<double>x - eps)
    if isinf(up) or isinf(down):
        return x
    m = 0 - <uint32_t>(next_u64(s) >> 63)
    return b2f((f2b(up) & ~m) | (f2b(down) & m))


cdef inline float mca32(float head, double tail, int t, Stream* s) noexcept nogil:
    cdef double v, pert
    cdef float out
    cdef int e
    if not isfinite(head):
        return head
    v = <double>head + tail
    if v == 0.0:
        return head
    frexp(v, &e)
    pert = ldexp(next_uniform(s) - 0.5, e - t)
    out = <float>(v + pert)
    if not isfinite(out):
        return head
    return out


cdef inline float finalize32(float head, double tail, int mode, int t, Stream* s) noexcept nogil:
    if mode == 1:
        return sr32(head, tail, s)
    if mode == 3:
        return cestac32(head, tail, s)
    return mca32(head, tail, t, s)


# ── perturbed scalar ops, binary64 ───────────────────────────────────

cdef double p_add64(double a, double b, int mode, int t, Stream* s) noexcept nogil:
    cdef double sm, bp, ap, db, da, tail
    if mode == 0:
        return a + b
    sm = a + b
    if mode == 2:
        return ud64(sm, s)
    if not isfinite(sm):
        return sm
    bp = sm - a
    ap = sm - bp
    db = b - bp
    da = a - ap
    tail = da + db
    if not isfinite(tail):
        return sm
    return finalize64(sm, tail, mode, t, s)


cdef double p_mul64(double a, double b, int mode, int t, Stream* s) noexcept nogil:
    cdef double h, tail
    if mode == 0:
        return a * b
    h = a * b
    if mode == 2:
        return ud64(h, s)
    if not isfinite(h):
        return h
    tail = fma(a, b, -h)
    if not isfinite(tail):
        return h
    return finalize64(h, tail, mode, t, s)


cdef double p_div64(double a, double b, int mode, int t, Stream* s) noexcept nogil:
    cdef double q, r
    q = a / b
    if mode == 0:
        return q
    if mode == 2:
        return ud64(q, s)
    if not isfinite(q):
        return q
    r = fma(-q, b, a)
    return finalize64(q, r / b, mode, t, s)


cdef double p_sqrt64(double a, int mode, int t, Stream* s) noexcept nogil:
    cdef double sq, r
    sq = sqrt(a)
    if mode == 0:
        return sq
    if mode == 2:
        return ud64(sq, s)
    if not isfinite(sq) or sq == 0.0:
        return sq
    r = fma(-sq, sq, a)
    return finalize64(sq, r / (2.0 * sq), mode, t, s)


cdef double p_fma64(double a, double b, double c, int mode, int t, Stream* s) noexcept nogil:
    cdef double sigma, u1, u2, a1, a2, b1, b2, bp, ap, db, da, g, tau
    sigma = fma(a, b, c)
    if mode == 0:
        return sigma
    if mode == 2:
        return ud64(sigma, s)
    if not isfinite(sigma):
        return sigma
    u1 = a * b
    u2 = fma(a, b, -u1)
    a1 = c + u2              # two_sum(c, u2)
    bp = a1 - c
    ap = a1 - bp
    db = u2 - bp
    da = c - ap
    a2 = da + db
    b1 = u1 + a1             # two_sum(u1, a1)
    bp = b1 - u1
    ap = b1 - bp
    db = a1 - bp
    da = u1 - ap
    b2 = da + db
    g = (b1 - sigma) + b2    # b1 - sigma is exact (Sterbenz)
    tau = g + a2
    if not isfinite(tau):
        return sigma
    return finalize64(sigma, tau, mode, t, s)


# ── perturbed scalar ops, binary32 ───────────────────────────────────
#
# every op is one double operation narrowed once, mirroring the pure
# code's narrow_to(a op b) construction

cdef float p_add32(float a, float b, int mode, int t, Stream* s) noexcept nogil:
    cdef float sm, bb, aa, db, da, tail
    if mode == 0:
        return <float>(<double>a + <double>b)
    sm = <float>(<double>a + <double>b)
    if mode == 2:
        return ud32(sm, s)
    if not isfinite(sm):
        return sm
    bb = <float>(<double>sm - <double>a)
    aa = <float>(<double>sm - <double>bb)
    db = <float>(<double>b - <double>bb)
    da = <float>(<double>a - <double>aa)
    tail = <float>(<double>da + <double>db)
    if not isfinite(tail):
        return sm
    return finalize32(sm, <double>tail, mode, t, s)


cdef float p_mul32(float a, float b, int mode, int t, Stream* s) noexcept nogil:
    cdef double prod, tail
    cdef float h
    prod = <double>a * <double>b  # exact: 48 significand bits at most
    h = <float>prod
    if mode == 0:
        return h
    if mode == 2:
        return ud32(h, s)
    if not isfinite(h):
        return h
    tail = prod - <double>h  # exact on the shared grid
    return finalize32(h, tail, mode, t, s)


cdef float p_div32(float a, float b, int mode, int t, Stream* s) noexcept nogil:
    cdef float q
    cdef double r
    q = <float>(<double>a / <double>b)
    if mode == 0:
        return q
    if mode == 2:
        return ud32(q, s)
    if not isfinite(q):
        return q
    r = <double>a - <double>q * <double>b  # exact remainder
    return finalize32(q, r / <double>b, mode, t, s)


cdef float p_sqrt32(float a, int mode, int t, Stream* s) noexcept nogil:
    cdef float sq
    cdef double r
    sq = <float>sqrt(<double>a)
    if mode == 0:
        return sq
    if mode == 2:
        return ud32(sq, s)
    if not isfinite(sq) or sq == 0.0:
        return sq
    r = <double>a - <double>sq * <double>sq
    return finalize32(sq, r / (2.0 * <double>sq), mode, t, s)


cdef inline float fma32_ro(float a, float b, float c) noexcept nogil:
    # exact double product, then collapse the sum round-to-odd so the
    # final narrowing is a single correct rounding
    cdef double prod, hi, lo
    if not (isfinite(a) and isfinite(b) and isfinite(c)):
        return <float>fma(<double>a, <double>b, <double>c)
    prod = <double>a * <double>b
    hi = prod + <double>c
    if not isfinite(hi):
        return <float>hi
    if fabs(prod) >= fabs(<double>c):
        lo = (prod - hi) + <double>c
    else:
        lo = (<double>c - hi) + prod
    if lo != 0.0 and (d2b(hi) & 1) == 0:
        hi = nextafter(hi, INFINITY if lo > 0.0 else -INFINITY)
    return <float>hi


cdef float p_fma32(float a, float b, float c, int mode, int t, Stream* s) noexcept nogil:
    cdef float sigma, u1, a1, a2, b1, b2, bbf, aaf, dbf, daf, g, tau
    cdef double prod, u2
    sigma = fma32_ro(a, b, c)
    if mode == 0:
        return sigma
    if mode == 2:
        return ud32(sigma, s)
    if not isfinite(sigma):
        return sigma
    prod = <double>a * <double>b
    u1 = <float>prod
    u2 = prod - <double>u1
    a1 = <float>(<double>c + u2)          # two_sum(c, u2), u2 kept double
    bbf = <float>(<double>a1 - <double>c)
    aaf = <float>(<double>a1 - <double>bbf)
    dbf = <float>(u2 - <double>bbf)
    daf = <float>(<double>c - <double>aaf)
    a2 = <float>(<double>daf + <double>dbf)
    b1 = <float>(<double>u1 + <double>a1)  # two_sum(u1, a1)
    bbf = <float>(<double>b1 - <double>u1)
    aaf = <float>(<double>b1 - <double>bbf)
    dbf = <float>(<double>a1 - <double>bbf)
    daf = <float>(<double>u1 - <double>aaf)
    b2 = <float>(<double>daf + <double>dbf)
    g = <float>(<double>b1 - <double>sigma)
    g = <float>(<double>g + <double>b2)
    tau = <float>(<double>g + <double>a2)
    if not isfinite(tau):
        return sigma
    return finalize32(sigma, <double>tau, mode, t, s)


# ── scalar dispatch ──────────────────────────────────────────────────

cdef double scalar64(int op, double a, double b, double c, int mode, int t, Stream* s) noexcept nogil:
    if op == 0:
        return p_add64(a, b, mode, t, s)
    if op == 1:
        return p_add64(a, -b, mode, t, s)
    if op == 2:
        return p_mul64(a, b, mode, t, s)
    if op == 3:
        return p_div64(a, b, mode, t, s)
    if op == 4:
        return p_sqrt64(a, mode, t, s)
    return p_fma64(a, b, c, mode, t, s)


cdef double scalar32(int op, double a, double b, double c, int mode, int t, Stream* s) noexcept nogil:
    cdef float fa = <float>a, fb = <float>b, fc = <float>c
    if op == 0:
        return <double>p_add32(fa, fb, mode, t, s)
    if op == 1:
        return <double>p_add32(fa, -fb, mode, t, s)
    if op == 2:
        return <double>p_mul32(fa, fb, mode, t, s)
    if op == 3:
        return <double>p_div32(fa, fb, mode, t, s)
    if op == 4:
        return <double>p_sqrt32(fa, mode, t, s)
    return <double>p_fma32(fa, fb, fc, mode, t, s)


# ── kernels ──────────────────────────────────────────────────────────

cdef double harmonic32_k(int64_t n, int mode, int t, int perturb_div, Stream* s) noexcept nogil:
    cdef float acc = 0.0, fi, term
    cdef int64_t i
    for i in range(1, n + 1):
        fi = <float>(<double>i)
        if perturb_div:
            term = p_div32(1.0, fi, mode, t, s)
        else:
            term = <float>(1.0 / <double>fi)
        acc = p_add32(acc, term, mode, t, s)
    return <double>acc


cdef double harmonic64_k(int64_t n, int mode, int t, int perturb_div, Stream* s) noexcept nogil:
    cdef double acc = 0.0, term
    cdef int64_t i
    for i in range(1, n + 1):
        if perturb_div:
            term = p_div64(1.0, <double>i, mode, t, s)
        else:
            term = 1.0 / <double>i
        acc = p_add64(acc, term, mode, t, s)
    return acc


def harmonic(int64_t n, int perturb_div, int mode, int t, int fmtw,
             uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef double v
    if fmtw == 32:
        with nogil:
            v = harmonic32_k(n, mode, t, perturb_div, &s)
    else:
        with nogil:
            v = harmonic64_k(n, mode, t, perturb_div, &s)
    return v, s.lo, s.hi


def vec_sum(double[::1] u, int mode, int t, int fmtw,
            uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double acc64 = 0.0
    cdef float acc32 = 0.0
    if fmtw == 32:
        with nogil:
            for i in range(n):
                acc32 = p_add32(acc32, <float>u[i], mode, t, &s)
        return <double>acc32, s.lo, s.hi
    with nogil:
        for i in range(n):
            acc64 = p_add64(acc64, u[i], mode, t, &s)
    return acc64, s.lo, s.hi


def vec_dot(double[::1] u, double[::1] v, int mode, int t, int fmtw,
            uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double acc64 = 0.0
    cdef float acc32 = 0.0
    if fmtw == 32:
        with nogil:
            for i in range(n):
                acc32 = p_fma32(<float>u[i], <float>v[i], acc32, mode, t, &s)
        return <double>acc32, s.lo, s.hi
    with nogil:
        for i in range(n):
            acc64 = p_fma64(u[i], v[i], acc64, mode, t, &s)
    return acc64, s.lo, s.hi


def vec_axpy(double alpha, double[::1] x, double[::1] y, double[::1] out,
             int mode, int t, int fmtw,
             uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef Py_ssize_t i, n = x.shape[0]
    cdef float fa = <float>alpha
    if fmtw == 32:
        with nogil:
            for i in range(n):
                out[i] = <double>p_fma32(fa, <float>x[i], <float>y[i], mode, t, &s)
    else:
        with nogil:
            for i in range(n):
                out[i] = p_fma64(alpha, x[i], y[i], mode, t, &s)
    return 0.0, s.lo, s.hi


def matmul(double[::1] a, double[::1] b, double[::1] out,
           Py_ssize_t m, Py_ssize_t k, Py_ssize_t n,
           int mode, int t, int fmtw,
           uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef Py_ssize_t i, j, kk
    cdef double acc64
    cdef float acc32
    if fmtw == 32:
        with nogil:
            for i in range(m):
                for j in range(n):
                    acc32 = 0.0
                    for kk in range(k):
                        acc32 = p_fma32(<float>a[i * k + kk], <float>b[kk * n + j],
                                        acc32, mode, t, &s)
                    out[i * n + j] = <double>acc32
    else:
        with nogil:
            for i in range(m):
                for j in range(n):
                    acc64 = 0.0
                    for kk in range(k):
                        acc64 = p_fma64(a[i * k + kk], b[kk * n + j], acc64, mode, t, &s)
                    out[i * n + j] = acc64
    return 0.0, s.lo, s.hi


def op_trials(int op, double a, double b, double c, int64_t trials,
              int mode, int t, int fmtw,
              uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    """(sum, min, max) over repeated perturbed evaluations of one op."""
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef double total = 0.0, vmin = INFINITY, vmax = -INFINITY, v
    cdef int64_t i
    if fmtw == 32:
        with nogil:
            for i in range(trials):
                v = scalar32(op, a, b, c, mode, t, &s)
                total += v
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
    else:
        with nogil:
            for i in range(trials):
                v = scalar64(op, a, b, c, mode, t, &s)
                total += v
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
    return total, vmin, vmax, s.lo, s.hi


def op_values(int op, double a, double b, double c, double[::1] out,
              int mode, int t, int fmtw,
              uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    """Per-trial perturbed values of one op, written into out."""
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef Py_ssize_t i, n = out.shape[0]
    if fmtw == 32:
        with nogil:
            for i in range(n):
                out[i] = scalar32(op, a, b, c, mode, t, &s)
    else:
        with nogil:
            for i in range(n):
                out[i] = scalar64(op, a, b, c, mode, t, &s)
    return 0.0, s.lo, s.hi


def scalar_op(int op, double a, double b, double c,
              int mode, int t, int fmtw,
              uint64_t seed, uint64_t sid, uint64_t lo, uint64_t hi):
    """One perturbed scalar op (parity-test entry point)."""
    cdef Stream s
    s.seed, s.sid, s.lo, s.hi = seed, sid, lo, hi
    cdef double v
    if fmtw == 32:
        v = scalar32(op, a, b, c, mode, t, &s)
    else:
        v = scalar64(op, a, b, c, mode, t, &s)
    return v, s.lo, s.hi


def philox_raw(uint64_t c0, uint64_t c1, uint64_t k0, uint64_t k1):
    """Word 0 of one Philox block (RNG parity-test entry point)."""
    return philox_word0(c0, c1, k0, k1)
