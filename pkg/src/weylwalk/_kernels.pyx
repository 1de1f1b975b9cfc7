# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Monte Carlo exit times and the killed-walk DP step.

Mirrors ``weylwalk._fallback``.  Monte Carlo decisions use the same Philox
words as the numpy version and are bit-identical; DP sums use Neumaier
compensation and agree with numpy to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport fabs

cnp.import_array()

BACKEND_NAME = "cython"

cdef extern from *:
    """
    typedef unsigned __int128 ww_u128;
    """
    ctypedef unsigned long long ww_u128

cdef uint64_t MUL0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t MUL1 = 0xCA5A826395121157ULL
cdef uint64_t WEYL0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t WEYL1 = 0xBB67AE8584CAA73BULL


cdef inline void philox(uint64_t* c, uint64_t k0, uint64_t k1) noexcept nogil:
    cdef ww_u128 p0, p1
    cdef uint64_t hi0, lo0, hi1, lo1, t1
    cdef int r
    for r in range(10):
        p0 = <ww_u128>c[0] * <ww_u128>MUL0
        p1 = <ww_u128>c[2] * <ww_u128>MUL1
        hi0 = <uint64_t>(p0 >> 64)
        lo0 = <uint64_t>p0
        hi1 = <uint64_t>(p1 >> 64)
        lo1 = <uint64_t>p1
        t1 = c[1]
        c[0] = hi1 ^ t1 ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0
        k0 = k0 + WEYL0
        k1 = k1 + WEYL1


cdef inline double word_uniform(uint64_t w) noexcept nogil:
    return <double>(w >> 11) * (1.0 / 9007199254740992.0)


cdef struct Stream:
    uint64_t k0
    uint64_t k1
    uint64_t traj
    uint64_t sub
    int64_t block
    uint64_t out[4]


cdef inline uint64_t stream_word(Stream* s, int64_t w) noexcept nogil:
    cdef int64_t block = w >> 2
    if block != s.block:
        s.out[0] = <uint64_t>block
        s.out[1] = s.traj
        s.out[2] = s.sub
        s.out[3] = 0
        philox(s.out, s.k0, s.k1)
        s.block = block
    return s.out[w & 3]


def philox_block(uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3, uint64_t k0, uint64_t k1):
    cdef uint64_t c[4]
    c[0] = c0; c[1] = c1; c[2] = c2; c[3] = c3
    philox(c, k0, k1)
    return (c[0], c[1], c[2], c[3])


cdef inline bint inside(int code, double* p, int k) noexcept nogil:
    cdef int i, start = 0
    if code == 3:
        return True
    if code == 1:
        if not (p[0] > 0):
            return False
    elif code == 2:
        if not (fabs(p[0]) < p[1]):
            return False
        start = 1
    for i in range(start, k - 1):
        if not (p[i] < p[i + 1]):
            return False
    return True


cdef inline int pick(double u, double* cum, int m) noexcept nogil:
    # first j with u < cum[j]
    cdef int j = 0
    while j < m - 1 and not (u < cum[j]):
        j += 1
    return j


def mc_exit_discrete(values, cum, bint iid, int code, x, int64_t horizon,
                     uint64_t k0, uint64_t k1, uint64_t substream,
                     int64_t traj0, int64_t ntraj):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef int k = xv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cv = np.ascontiguousarray(cum, dtype=np.float64)
    cdef int m = cv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tau = np.full(ntraj, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pos = np.empty((ntraj, k), dtype=np.float64)
    cdef double* cp = <double*>cv.data
    cdef double* vp = <double*>vals.data
    cdef double p[64]
    cdef Stream s
    cdef int64_t i, step, w
    cdef int j, a
    if k > 64:
        raise ValueError("dimension above 64 not supported by the compiled kernel")
    with nogil:
        for i in range(ntraj):
            for j in range(k):
                p[j] = xv[j]
            s.k0 = k0; s.k1 = k1; s.traj = <uint64_t>(traj0 + i); s.sub = substream; s.block = -1
            if not inside(code, p, k):
                tau[i] = 0
            else:
                for step in range(horizon):
                    if iid:
                        for j in range(k):
                            w = step * k + j
                            a = pick(word_uniform(stream_word(&s, w)), cp, m)
                            p[j] += vp[a]
                    else:
                        a = pick(word_uniform(stream_word(&s, step)), cp, m)
                        for j in range(k):
                            p[j] += vp[a * k + j]
                    if not inside(code, p, k):
                        tau[i] = step + 1
                        break
            for j in range(k):
                pos[i, j] = p[j]
    return tau, pos


cdef inline double h_eval(int code, double* x, int k) noexcept nogil:
    cdef double out = 1.0
    cdef int i, j
    if code == 0:
        for i in range(k):
            for j in range(i + 1, k):
                out *= x[j] - x[i]
        return out
    for i in range(k):
        for j in range(i + 1, k):
            out *= x[j] * x[j] - x[i] * x[i]
    if code == 1:
        for i in range(k):
            out *= x[i]
    return out


cdef struct Acc:
    double s
    double c


cdef inline void acc_add(Acc* a, double v) noexcept nogil:
    # Neumaier compensated summation
    cdef double t = a.s + v
    if fabs(a.s) >= fabs(v):
        a.c += (a.s - t) + v
    else:
        a.c += (v - t) + a.s
    a.s = t


cdef inline double acc_val(Acc* a) noexcept nogil:
    return a.s + a.c


def dp_advance(W, lo, rsteps, probs, base, int64_t d, int code, int hcode,
               bint want_h, double prune):
    """One DP step for k in {1, 2, 3}; see the numpy fallback for semantics.

    Scatters every nonzero source weight to its successors, then masks,
    accumulates the stats and trims the box in a second pass.
    """
    cdef int k = W.ndim
    if k < 1 or k > 3:
        raise NotImplementedError("compiled DP step covers k <= 3")
    cdef int64_t[::1] rs = np.ascontiguousarray(rsteps, dtype=np.int64)
    cdef double[::1] ps = np.ascontiguousarray(probs, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lov = np.array(lo, dtype=np.int64)
    cdef int64_t[::1] bv = np.ascontiguousarray(base, dtype=np.int64)
    cdef int R = rs.shape[0]
    cdef int64_t rmax = 0
    cdef int a0, a1, a2
    for a0 in range(R):
        if rs[a0] > rmax:
            rmax = rs[a0]
    cdef double[:, :, ::1] Win = np.ascontiguousarray(W, dtype=np.float64).reshape(
        tuple(W.shape) + (1,) * (3 - k))
    cdef int64_t n0 = Win.shape[0], n1 = Win.shape[1], n2 = Win.shape[2]
    cdef int64_t r1 = rmax if k >= 2 else 0
    cdef int64_t r2 = rmax if k >= 3 else 0
    cdef int64_t m0 = n0 + rmax, m1 = n1 + r1, m2 = n2 + r2
    Wout_arr = np.zeros((m0, m1, m2), dtype=np.float64)
    cdef double[:, :, ::1] Wout = Wout_arr
    cdef int64_t i0, i1, i2, j0, j1
    cdef int R1 = R if k >= 2 else 1, R2 = R if k >= 3 else 1
    cdef double w, w0, w1, v, hv = 0.0
    cdef double x[3]
    cdef double p1[64]
    cdef int64_t q1[64]
    cdef Acc surv, survh, ex, exh, drop
    cdef int64_t lo0 = m0, hi0 = -1, lo1 = m1, hi1 = -1, lo2 = m2, hi2 = -1
    if R > 64:
        raise ValueError("at most 64 atoms")
    for a0 in range(R):
        p1[a0] = ps[a0] if k >= 2 else 1.0
        q1[a0] = rs[a0] if k >= 2 else 0
    surv.s = 0; surv.c = 0; survh.s = 0; survh.c = 0; ex.s = 0; ex.c = 0
    exh.s = 0; exh.c = 0; drop.s = 0; drop.c = 0
    cdef int64_t L0 = lov[0], L1 = lov[1] if k >= 2 else 0, L2 = lov[2] if k >= 3 else 0
    cdef int64_t B0 = bv[0], B1 = bv[1] if k >= 2 else 0, B2 = bv[2] if k >= 3 else 0
    x[0] = 0.0; x[1] = 0.0; x[2] = 0.0
    with nogil:
        for i0 in range(n0):
            for i1 in range(n1):
                for i2 in range(n2):
                    w = Win[i0, i1, i2]
                    if w == 0.0:
                        continue
                    for a0 in range(R):
                        w0 = w * ps[a0]
                        j0 = i0 + rs[a0]
                        for a1 in range(R1):
                            w1 = w0 * p1[a1]
                            j1 = i1 + q1[a1]
                            if k >= 3:
                                for a2 in range(R2):
                                    Wout[j0, j1, i2 + rs[a2]] += w1 * ps[a2]
                            else:
                                Wout[j0, j1, 0] += w1
        for i0 in range(m0):
            x[0] = <double>(B0 + d * (L0 + i0))
            for i1 in range(m1):
                if k >= 2:
                    x[1] = <double>(B1 + d * (L1 + i1))
                for i2 in range(m2):
                    v = Wout[i0, i1, i2]
                    if v == 0.0:
                        continue
                    if k >= 3:
                        x[2] = <double>(B2 + d * (L2 + i2))
                    if want_h:
                        hv = h_eval(hcode, x, k)
                    if not inside(code, x, k):
                        acc_add(&ex, v)
                        if want_h:
                            acc_add(&exh, v * hv)
                        Wout[i0, i1, i2] = 0.0
                        continue
                    if v < prune:
                        acc_add(&drop, v)
                        Wout[i0, i1, i2] = 0.0
                        continue
                    acc_add(&surv, v)
                    if want_h:
                        acc_add(&survh, v * hv)
                    if i0 < lo0: lo0 = i0
                    if i0 > hi0: hi0 = i0
                    if i1 < lo1: lo1 = i1
                    if i1 > hi1: hi1 = i1
                    if i2 < lo2: lo2 = i2
                    if i2 > hi2: hi2 = i2
    stats = np.array([acc_val(&surv), acc_val(&survh), acc_val(&ex), acc_val(&exh), acc_val(&drop)])
    if hi0 < 0:
        return np.zeros((0,) * k), lov, stats
    out = Wout_arr[lo0:hi0 + 1, lo1:hi1 + 1, lo2:hi2 + 1]
    lov[0] += lo0
    if k >= 2:
        lov[1] += lo1
    if k >= 3:
        lov[2] += lo2
    shape = out.shape[:k]
    return np.ascontiguousarray(out).reshape(shape), lov, stats
