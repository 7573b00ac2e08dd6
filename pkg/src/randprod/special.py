"""Regularized incomplete gamma functions and chi-square helpers."""
import math

import numpy as np

from . import kernels


def gammainc_lower(a, x):
    """P(a, x), the regularized lower incomplete gamma function."""
    p, _ = kernels.gammainc(a, x)
    return p if np.ndim(p) else float(p)


def gammainc_upper(a, x):
    """Q(a, x) = 1 - P(a, x), computed directly (no cancellation in the tail)."""
    _, q = kernels.gammainc(a, x)
    return q if np.ndim(q) else float(q)


def chi2_sf(t, dof):
    """P(chi^2_dof > t)."""
    return gammainc_upper(dof / 2.0, np.asarray(t, float) / 2.0)


def chi2_moment(j, dof):
    """E[(chi^2_dof)^j] for real j > -dof/2."""
    return math.exp(j * math.log(2.0) + math.lgamma(dof / 2.0 + j) - math.lgamma(dof / 2.0))
