"""Rigorous two-sided bounds on the per-term statistics from radial moments.

Write a draw as x = I + y (additive laws) or x = exp(y) (exponential laws)
and t = ||y||_F. For each pairing of law geometry and chart,
:func:`chart_geometry` gives radii with

* t <= a_in implies x in U,
* x in U and t < t_far implies t <= a_near,
* for t <= a_near, ||phi(x) - y|| <= c_rem * t**2.

These turn moments of t into bounds on p_out, on the truncated variance and
on the distance of the truncated mean from E[y].
"""
import math
from dataclasses import dataclass

from .charts import ChartKind
from .laws import AtomicDiscrete


@dataclass(frozen=True)
class ChartGeometry:
    a_in: float
    a_near: float
    t_far: float
    c_rem: float
    # phi(x) == y on the near region; also means phi is odd there
    linear: bool


def chart_geometry(law, chart):
    r = chart.r
    exp_chart = chart.kind is ChartKind.EXPONENTIAL
    if law.geometry == "additive":
        if not exp_chart:
            return ChartGeometry(r, r, math.inf, 0.0, True)
        if isinstance(law, AtomicDiscrete) and law.is_square_zero():
            return ChartGeometry(r, r, math.inf, 0.0, True)
        # ln(1 + t) <= ||log(I + y)|| <= -ln(1 - t)
        a_near = math.expm1(r)
        c_rem = (-math.log1p(-a_near) - a_near) / a_near**2
        return ChartGeometry(-math.expm1(-r), a_near, math.inf, c_rem, False)
    if exp_chart:
        return ChartGeometry(r, r, math.pi, 0.0, True)
    # exponential law, affine chart: ||exp(y) - I - y|| <= e^t - 1 - t
    a_near = min(-math.log1p(-r), math.pi)
    c_rem = (math.expm1(a_near) - a_near) / a_near**2
    return ChartGeometry(math.log1p(r), a_near, math.pi, c_rem, False)


def _far_weight(geo, chart):
    return 0.0 if math.isinf(geo.t_far) else chart.r / geo.t_far**2


@dataclass(frozen=True)
class FixedBounds:
    """Bounds for one fixed law; ``mean_hi`` bounds ||m||."""

    p_lo: float
    p_hi: float
    g3_lo: float
    g3_hi: float
    mean_hi: float
    exact: bool = False


def _sqrt(x):
    return math.sqrt(max(x, 0.0))


def fixed_bounds(law, chart):
    """Bounds on (p_out, s2, ||m||) for a single law."""
    stats = law.exact_stats(chart)
    if stats is not None:
        mn = float((stats.m**2).sum()) ** 0.5
        return FixedBounds(stats.p_out, stats.p_out, stats.s2, stats.s2, mn, True)
    geo = chart_geometry(law, chart)
    rad = law.radial()
    far = 0.0 if math.isinf(geo.t_far) else rad.tail(geo.t_far)
    a2 = rad.partial(2, geo.a_in)
    b2 = rad.partial(2, geo.a_near) - a2
    c2 = geo.c_rem**2 * rad.partial(4, geo.a_near)
    d2 = chart.r**2 * far
    rest = _sqrt(b2) + _sqrt(c2) + _sqrt(d2)
    # the inner part has zero mean only for symmetric laws
    a_lo = _sqrt(a2) if law.symmetric else 0.0
    mean_hi = (
        rad.partial(1, geo.a_near)
        - (rad.partial(1, geo.a_in) if law.symmetric else 0.0)
        + geo.c_rem * rad.partial(2, geo.a_near)
        + chart.r * far
    )
    return FixedBounds(
        p_lo=max(rad.tail(geo.a_near) - far, 0.0),
        p_hi=rad.tail(geo.a_in),
        g3_lo=max(a_lo - rest, 0.0) ** 2,
        g3_hi=(_sqrt(a2) + rest) ** 2,
        mean_hi=mean_hi,
    )


@dataclass(frozen=True)
class TailBounds:
    """Bounds for a law with small perturbation scale s.

    ``p_hi`` scales like s**(2j), ``g3_lo``/``g3_hi`` like s**2,
    ``mean_lin = ||E y||`` like s and ``mean_dev`` (a bound on
    ||m - E y||) like s**2. Ratios to those powers do not grow as s
    shrinks, so the values stay valid for every later term of a
    power-decay sequence.
    """

    p_hi: float
    g3_lo: float
    g3_hi: float
    mean_lin: float
    mean_dev: float
    # all atoms inside the linear region: m = E y exactly
    exact_linear_mean: bool


def tail_bounds(law, chart, j):
    geo = chart_geometry(law, chart)
    rad = law.radial()
    m2, m4 = rad.moment(2), rad.moment(4)
    mean_lin = float((law.mean_perturbation() ** 2).sum()) ** 0.5
    if isinstance(law, AtomicDiscrete) and rad.sup <= geo.a_in and rad.sup < geo.t_far:
        spread = law.spread()
        rem = geo.c_rem * math.sqrt(m4)
        return TailBounds(
            p_hi=0.0,
            g3_lo=max(math.sqrt(spread) - rem, 0.0) ** 2,
            g3_hi=(math.sqrt(spread) + rem) ** 2,
            mean_lin=mean_lin,
            mean_dev=geo.c_rem * m2,
            exact_linear_mean=geo.linear,
        )
    w = 1.0 / geo.a_in + geo.c_rem + _far_weight(geo, chart)
    rest = math.sqrt(m4) * w
    p_hi = rad.moment(2 * j) / geo.a_in ** (2 * j)
    if law.symmetric:
        a_lo = _sqrt(m2 - m4 / geo.a_in**2)
        return TailBounds(p_hi, max(a_lo - rest, 0.0) ** 2, (math.sqrt(m2) + rest) ** 2, 0.0, m2 * w, False)
    return TailBounds(p_hi, 0.0, (math.sqrt(m2) + rest) ** 2, mean_lin, 2.0 * m2 * w, False)
