"""Numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
Results agree to rounding; bit-identity is only promised within one backend.
"""
import math

import numpy as np

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

# renormalise running products outside [2**-RESCALE_BITS, 2**RESCALE_BITS]
RESCALE_BITS = 400
_BIG = 2.0**RESCALE_BITS
_SMALL = 2.0**-RESCALE_BITS

GAMMA_EPS = 1e-16
GAMMA_MAXITER = 100_000
_FPMIN = 1e-300


def philox4x32(counter, key):
    """Philox4x32-10 block function.

    counter: (M, 4) uint32, key: (2,) or (M, 2) uint32. Returns (M, 4) uint32.
    """
    c = np.asarray(counter, dtype=np.uint32).astype(np.uint64)
    k = np.asarray(key, dtype=np.uint32).astype(np.uint64)
    c0, c1, c2, c3 = c[:, 0], c[:, 1], c[:, 2], c[:, 3]
    k0 = k[..., 0] if k.ndim > 1 else k[0]
    k1 = k[..., 1] if k.ndim > 1 else k[1]
    for rnd in range(10):
        if rnd:
            k0 = (k0 + np.uint64(PHILOX_W0)) & _MASK32
            k1 = (k1 + np.uint64(PHILOX_W1)) & _MASK32
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def words_to_uniform(hi, lo):
    """Map two 32-bit words to a double strictly inside (0, 1)."""
    x = (np.asarray(hi, np.uint64) >> np.uint64(6)) * np.uint64(1 << 26) + (
        np.asarray(lo, np.uint64) >> np.uint64(6)
    )
    return (x.astype(np.float64) + 0.5) * 2.0**-52


def philox_uniforms(seed, tag, n, path, block0, nblocks):
    """Uniforms for keys (n[i], path[i]); block j of key i uses counter
    (block0 + j, n[i], path[i], tag) under the 64-bit key ``seed``.

    Returns (M, 2 * nblocks) float64.
    """
    n = np.asarray(n, dtype=np.uint64).ravel()
    path = np.asarray(path, dtype=np.uint64).ravel()
    m = n.size
    key = np.array([seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF], dtype=np.uint32)
    ctr = np.empty((m, nblocks, 4), dtype=np.uint32)
    ctr[:, :, 0] = (block0 + np.arange(nblocks, dtype=np.uint64)).astype(np.uint32)
    ctr[:, :, 1] = n[:, None].astype(np.uint32)
    ctr[:, :, 2] = path[:, None].astype(np.uint32)
    ctr[:, :, 3] = np.uint32(tag)
    out = philox4x32(ctr.reshape(-1, 4), key).reshape(m, nblocks, 4)
    u = np.empty((m, nblocks, 2))
    u[:, :, 0] = words_to_uniform(out[:, :, 0], out[:, :, 1])
    u[:, :, 1] = words_to_uniform(out[:, :, 2], out[:, :, 3])
    return u.reshape(m, 2 * nblocks)


def _gammainc_scalar(a, x):
    if x <= 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    log_prefix = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        ap = a
        term = total = 1.0 / a
        for _ in range(GAMMA_MAXITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * GAMMA_EPS:
                break
        p = total * math.exp(log_prefix)
        return p, 1.0 - p
    # modified Lentz continued fraction for Q
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, GAMMA_MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < GAMMA_EPS:
            break
    q = math.exp(log_prefix) * h
    return 1.0 - q, q


def gammainc(a, x):
    """Regularized incomplete gamma pair (P(a, x), Q(a, x)), elementwise."""
    a, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
    p = np.empty(a.shape)
    q = np.empty(a.shape)
    for idx in np.ndindex(a.shape):
        p[idx], q[idx] = _gammainc_scalar(float(a[idx]), float(x[idx]))
    return p, q


def chain_products(start, start_exp, xs, record):
    """Running products start @ xs[0] @ xs[1] @ ... per path.

    start: (B, k, k); start_exp: (B,) int64 power-of-two exponents so the
    true product is ``start * 2**start_exp``; xs: (T, B, k, k);
    record: (T,) bool. Returns (final, final_exp, recorded, recorded_exp).
    """
    cur = np.array(start, dtype=float, copy=True)
    exp = np.array(start_exp, dtype=np.int64, copy=True)
    record = np.asarray(record, dtype=bool)
    nrec = int(record.sum())
    rec = np.empty((nrec,) + cur.shape)
    rec_exp = np.empty((nrec, cur.shape[0]), dtype=np.int64)
    j = 0
    for t in range(xs.shape[0]):
        cur = np.matmul(cur, xs[t])
        big = np.abs(cur).max(axis=(1, 2))
        up = big > _BIG
        if up.any():
            cur[up] *= _SMALL
            exp[up] += RESCALE_BITS
        down = (big < _SMALL) & (big > 0)
        if down.any():
            cur[down] *= _BIG
            exp[down] -= RESCALE_BITS
        if record[t]:
            rec[j] = cur
            rec_exp[j] = exp
            j += 1
    return cur, exp, rec, rec_exp
