"""Truncation neighbourhoods of the identity with their coordinate maps.

Two charts are provided. The affine chart is ``x -> x - I`` on the closed
Frobenius ball ``||x - I|| <= r``; the exponential chart is the principal
logarithm on ``exp`` of the closed ball of radius ``r``. Both map onto the
closed ball of radius ``r`` in tangent coordinates, which is convex.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .group import DomainError, LOG_RADIUS, as_element, as_tangent, frobenius, mat_exp, mat_log

EXP_MAX_RADIUS = 0.4


class ChartKind(str, enum.Enum):
    AFFINE = "affine"
    EXPONENTIAL = "exponential"


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class ChartSpec:
    kind: ChartKind
    r: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ChartKind(self.kind))
        if not 0.0 < self.r < 1.0:
            raise ChartError(f"chart radius must lie in (0, 1), got {self.r}")
        if self.kind is ChartKind.EXPONENTIAL and self.r > EXP_MAX_RADIUS:
            raise ChartError(f"exponential chart radius must be <= {EXP_MAX_RADIUS}, got {self.r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ChartError(f"dimension must be a positive integer, got {self.dim}")

    @classmethod
    def affine(cls, r=0.5, dim=2):
        return cls(ChartKind.AFFINE, r, dim)

    @classmethod
    def exponential(cls, r=0.3, dim=2):
        return cls(ChartKind.EXPONENTIAL, r, dim)

    def with_dim(self, dim):
        return ChartSpec(self.kind, self.r, dim)


def _check_dim(c, x):
    if x.shape[-1] != c.dim:
        raise ChartError(f"chart is for k={c.dim}, got a {x.shape[-1]}x{x.shape[-1]} matrix")


def coordinates(c, xs):
    """Vectorised chart evaluation.

    Returns ``(inside, coords)`` where ``inside`` flags membership in U and
    ``coords`` holds phi(x) for members and zero elsewhere, i.e. the
    truncated coordinate phi(x) 1_U(x).
    """
    xs = np.asarray(xs, dtype=float)
    _check_dim(c, xs)
    shift = xs - np.eye(c.dim)
    dist = frobenius(shift)
    if c.kind is ChartKind.AFFINE:
        inside = dist <= c.r
        coords = np.where(inside[..., None, None], shift, 0.0)
        return inside, coords
    # ||log x|| <= r forces ||x - I|| <= e^r - 1, so farther points skip the log
    near = dist <= min(np.expm1(c.r) * (1.0 + 1e-12), LOG_RADIUS * (1.0 - 1e-12))
    coords = np.zeros(xs.shape)
    inside = np.zeros(dist.shape, dtype=bool)
    if np.any(near):
        logs = mat_log(xs[near])
        ok = frobenius(logs) <= c.r
        sub = np.zeros(logs.shape)
        sub[ok] = logs[ok]
        coords[near] = sub
        inside[near] = ok
    return inside, coords


def contains(c, x):
    x = as_element(x)
    _check_dim(c, x)
    inside, _ = coordinates(c, x[None])
    return bool(inside[0])


def phi(c, x):
    x = as_element(x)
    _check_dim(c, x)
    inside, coords = coordinates(c, x[None])
    if not inside[0]:
        raise DomainError("point lies outside the chart neighbourhood")
    return coords[0]


def phi_inv(c, v):
    v = as_tangent(v)
    _check_dim(c, v)
    if frobenius(v) > c.r:
        raise DomainError(f"coordinate norm {frobenius(v):.6g} exceeds chart radius {c.r}")
    if c.kind is ChartKind.AFFINE:
        return np.eye(c.dim) + v
    return mat_exp(v)
