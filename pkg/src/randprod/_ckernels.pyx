# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, isinf, lgamma, log
from libc.stdint cimport int64_t, uint32_t, uint64_t

cnp.import_array()

DEF M0 = 0xD2511F53
DEF M1 = 0xCD9E8D57
DEF W0 = 0x9E3779B9
DEF W1 = 0xBB67AE85
DEF RESCALE_BITS = 400
DEF GAMMA_EPS = 1e-16
DEF GAMMA_MAXITER = 100000
DEF FPMIN = 1e-300

cdef double BIG = 2.0 ** RESCALE_BITS
cdef double SMALL = 2.0 ** -RESCALE_BITS


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef uint32_t n0, n2
    cdef int rnd
    for rnd in range(10):
        if rnd:
            k0 = <uint32_t>(k0 + <uint32_t>W0)
            k1 = <uint32_t>(k1 + <uint32_t>W1)
        p0 = <uint64_t>M0 * c0
        p1 = <uint64_t>M1 * c2
        n0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        n2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c1 = <uint32_t>p1
        c3 = <uint32_t>p0
        c0 = n0
        c2 = n2
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


cdef inline double _to_uniform(uint32_t hi, uint32_t lo) nogil:
    cdef uint64_t x = (<uint64_t>(hi >> 6)) * (<uint64_t>1 << 26) + (lo >> 6)
    return (<double>x + 0.5) * 2.220446049250313e-16


def philox4x32(counter, key):
    cdef cnp.ndarray[cnp.uint32_t, ndim=2] c = np.array(counter, dtype=np.uint32, ndmin=2)
    cdef cnp.ndarray[cnp.uint32_t, ndim=2] k = np.array(key, dtype=np.uint32, ndmin=2)
    cdef Py_ssize_t i, m = c.shape[0]
    cdef bint shared = k.shape[0] == 1
    cdef uint32_t buf[4]
    out = np.empty((m, 4), dtype=np.uint32)
    cdef cnp.uint32_t[:, ::1] o = out
    for i in range(m):
        buf[0] = c[i, 0]
        buf[1] = c[i, 1]
        buf[2] = c[i, 2]
        buf[3] = c[i, 3]
        if shared:
            _philox(buf, k[0, 0], k[0, 1])
        else:
            _philox(buf, k[i, 0], k[i, 1])
        o[i, 0] = buf[0]
        o[i, 1] = buf[1]
        o[i, 2] = buf[2]
        o[i, 3] = buf[3]
    return out


def philox_uniforms(seed, tag, n, path, block0, nblocks):
    cdef cnp.uint64_t[::1] nn = np.ascontiguousarray(np.asarray(n, dtype=np.uint64).ravel())
    cdef cnp.uint64_t[::1] pp = np.ascontiguousarray(np.asarray(path, dtype=np.uint64).ravel())
    cdef Py_ssize_t m = nn.shape[0], i, j
    cdef Py_ssize_t nb = nblocks
    cdef uint64_t s = seed
    cdef uint32_t k0 = <uint32_t>(s & 0xFFFFFFFF), k1 = <uint32_t>(s >> 32)
    cdef uint32_t t = <uint32_t>tag
    cdef uint32_t b0 = <uint32_t>block0
    cdef uint32_t buf[4]
    out = np.empty((m, 2 * nb))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(nb):
                buf[0] = <uint32_t>(b0 + j)
                buf[1] = <uint32_t>nn[i]
                buf[2] = <uint32_t>pp[i]
                buf[3] = t
                _philox(buf, k0, k1)
                o[i, 2 * j] = _to_uniform(buf[0], buf[1])
                o[i, 2 * j + 1] = _to_uniform(buf[2], buf[3])
    return out


cdef void _gammainc(double a, double x, double* p, double* q) nogil:
    cdef double log_prefix, ap, term, total, b, c, d, h, an, delta
    cdef int i
    if x <= 0.0:
        p[0] = 0.0
        q[0] = 1.0
        return
    if isinf(x):
        p[0] = 1.0
        q[0] = 0.0
        return
    log_prefix = -x + a * log(x) - lgamma(a)
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for i in range(GAMMA_MAXITER):
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * GAMMA_EPS:
                break
        p[0] = total * exp(log_prefix)
        q[0] = 1.0 - p[0]
        return
    b = x + 1.0 - a
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, GAMMA_MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < GAMMA_EPS:
            break
    q[0] = exp(log_prefix) * h
    p[0] = 1.0 - q[0]


def gammainc(a, x):
    a_b, x_b = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
    shape = a_b.shape
    cdef double[::1] av = np.array(a_b, dtype=float, order="C").ravel()
    cdef double[::1] xv = np.array(x_b, dtype=float, order="C").ravel()
    cdef Py_ssize_t i, m = av.shape[0]
    p = np.empty(m)
    q = np.empty(m)
    cdef double[::1] pv = p
    cdef double[::1] qv = q
    with nogil:
        for i in range(m):
            _gammainc(av[i], xv[i], &pv[i], &qv[i])
    return p.reshape(shape), q.reshape(shape)


def chain_products(start, start_exp, xs, record):
    cur_arr = np.array(start, dtype=float, copy=True, order="C")
    exp_arr = np.array(start_exp, dtype=np.int64, copy=True)
    cdef double[:, :, ::1] cur = cur_arr
    cdef int64_t[::1] ex = exp_arr
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(xs, dtype=float)
    cdef cnp.uint8_t[::1] rec_mask = np.ascontiguousarray(np.asarray(record, dtype=bool)).view(np.uint8)
    cdef Py_ssize_t T = x.shape[0], B = x.shape[1], k = x.shape[2]
    cdef Py_ssize_t nrec = int(np.count_nonzero(np.asarray(record)))
    rec_arr = np.empty((nrec, B, k, k))
    rec_exp_arr = np.empty((nrec, B), dtype=np.int64)
    cdef double[:, :, :, ::1] rec = rec_arr
    cdef int64_t[:, ::1] rec_exp = rec_exp_arr
    cdef double[:, ::1] tmp = np.empty((k, k))
    cdef Py_ssize_t t, b, i, j, l, r = 0
    cdef double acc, big
    with nogil:
        for t in range(T):
            for b in range(B):
                big = 0.0
                for i in range(k):
                    for j in range(k):
                        acc = 0.0
                        for l in range(k):
                            acc = acc + cur[b, i, l] * x[t, b, l, j]
                        tmp[i, j] = acc
                        if fabs(acc) > big:
                            big = fabs(acc)
                if big > BIG:
                    for i in range(k):
                        for j in range(k):
                            tmp[i, j] = tmp[i, j] * SMALL
                    ex[b] += RESCALE_BITS
                elif big < SMALL and big > 0.0:
                    for i in range(k):
                        for j in range(k):
                            tmp[i, j] = tmp[i, j] * BIG
                    ex[b] -= RESCALE_BITS
                for i in range(k):
                    for j in range(k):
                        cur[b, i, j] = tmp[i, j]
            if rec_mask[t]:
                for b in range(B):
                    rec_exp[r, b] = ex[b]
                    for i in range(k):
                        for j in range(k):
                            rec[r, b, i, j] = cur[b, i, j]
                r += 1
    return cur_arr, exp_arr, rec_arr, rec_exp_arr
