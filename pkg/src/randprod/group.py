"""Dense operations on GL(k, R): products, inverses, exp/log and displacement.

Group elements and tangent vectors are plain ``(k, k)`` float arrays; most
functions also accept stacks ``(..., k, k)``. Validation happens at API
boundaries through :func:`as_element` and :func:`as_tangent`.
"""
import numpy as np

DET_RTOL = 1e-12
SERIES_TOL = 1e-15
NEUMANN_RADIUS = 0.5
LOG_RADIUS = 1.0
# Taylor order for exp after scaling to norm <= 1/2: 0.5**19 / 19! ~ 2e-23
EXP_TAYLOR_ORDER = 18
_EXP_SCALE_TARGET = 0.5
_MAX_SERIES_TERMS = 100_000


class GroupError(ValueError):
    pass


class DimensionError(GroupError):
    pass


class SingularMatrixError(GroupError):
    pass


class DomainError(GroupError):
    pass


def identity(k):
    return np.eye(k)


def frobenius(a):
    a = np.asarray(a)
    return np.sqrt(np.einsum("...ij,...ij->...", a, a))


def _square(a, what):
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise DimensionError(f"{what} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{what} has non-finite entries")
    return a


def is_invertible(a):
    """Tolerance test |det a| >= DET_RTOL * ||a||_F**k (elementwise on stacks)."""
    a = np.asarray(a, dtype=float)
    k = a.shape[-1]
    det = np.abs(np.linalg.det(a))
    return (det > 0) & (det >= DET_RTOL * frobenius(a) ** k)


def as_element(a):
    """Validate and return ``a`` as a float group element (or stack)."""
    a = _square(a, "group element")
    if not np.all(is_invertible(a)):
        raise SingularMatrixError("matrix is singular within tolerance")
    return a


def as_tangent(v):
    return _square(v, "tangent vector")


def _same_dim(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def multiply(a, b):
    a = _square(a, "left factor")
    b = _square(b, "right factor")
    _same_dim(a, b)
    return np.matmul(a, b)


def neumann_inverse(a, tol=SERIES_TOL):
    """(I + y)^-1 = I + sum_p (-y)^p for ||y||_F < 1, truncated at term norm < tol."""
    a = _square(a, "matrix")
    y = a - np.eye(a.shape[-1])
    if np.any(frobenius(y) >= 1.0):
        raise DomainError("Neumann series needs ||a - I||_F < 1")
    result = np.broadcast_to(np.eye(a.shape[-1]), a.shape).copy()
    term = result.copy()
    active = np.ones(a.shape[:-2], dtype=bool)
    for _ in range(_MAX_SERIES_TERMS):
        term = -np.matmul(term, y)
        active &= frobenius(term) >= tol
        if not active.any():
            break
        result[active] += term[active]
    return result


def inverse(a):
    """Inverse of a group element; Neumann series close to I, LU otherwise."""
    a = as_element(a)
    close = frobenius(a - np.eye(a.shape[-1])) <= NEUMANN_RADIUS
    if a.ndim == 2:
        return neumann_inverse(a) if close else np.linalg.inv(a)
    out = np.linalg.inv(a)
    if close.any():
        out[close] = neumann_inverse(a[close])
    return out


def mat_exp(v):
    """Matrix exponential by scaling and squaring a fixed-order Taylor sum.

    Each matrix in a stack gets its own scaling, so results do not depend
    on what else is in the batch.
    """
    v = as_tangent(v)
    k = v.shape[-1]
    norms = frobenius(v)
    s = np.zeros(norms.shape, dtype=int)
    big = norms > _EXP_SCALE_TARGET
    s[big] = np.ceil(np.log2(norms[big] / _EXP_SCALE_TARGET)).astype(int)
    x = v / np.ldexp(1.0, s)[..., None, None]
    eye = np.broadcast_to(np.eye(k), v.shape)
    # Horner form of sum_{j<=order} x^j / j!
    result = eye + x / EXP_TAYLOR_ORDER
    for j in range(EXP_TAYLOR_ORDER - 1, 0, -1):
        result = eye + np.matmul(x, result) / j
    result = np.array(result)
    for step in range(int(s.max()) if s.size else 0):
        sel = s > step
        if result.ndim == 2:
            result = result @ result
        else:
            result[sel] = np.matmul(result[sel], result[sel])
    return result


def mat_log(a, tol=SERIES_TOL):
    """Principal logarithm for ||a - I||_F < 1.

    Uses log a = 2 atanh(z) with z = (a - I)(a + I)^-1, whose series has only
    odd powers of a matrix smaller than a - I.
    """
    a = _square(a, "group element")
    k = a.shape[-1]
    eye = np.eye(k)
    x = a - eye
    if np.any(frobenius(x) >= LOG_RADIUS):
        raise DomainError("mat_log needs ||a - I||_F < 1")
    # z = (a + I)^-T-solve keeps z = x (a + I)^-1; x and a + I commute
    z = np.linalg.solve(a + eye, x)
    z2 = np.matmul(z, z)
    result = np.array(z, copy=True)
    power = np.array(z, copy=True)
    active = np.ones(a.shape[:-2], dtype=bool)
    for p in range(3, _MAX_SERIES_TERMS, 2):
        power = np.matmul(power, z2)
        term = power / p
        active &= frobenius(term) >= tol
        if not active.any():
            break
        if result.ndim == 2:
            result += term
        else:
            result[active] += term[active]
    return 2.0 * result


def displacement(g, h):
    """Left-invariant displacement ||g^-1 h - I||_F (elementwise on stacks)."""
    g = as_element(g)
    h = _square(h, "group element")
    _same_dim(g, h)
    return frobenius(np.linalg.solve(g, h) - np.eye(g.shape[-1]))


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def unit(k, i, j):
    """Matrix unit E_ij (zero-based indices)."""
    e = np.zeros((k, k))
    e[i, j] = 1.0
    return e
