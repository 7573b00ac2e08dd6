import math

import numpy as np
import pytest

from randprod import bounds, laws
from randprod.charts import ChartSpec

CHARTS = [ChartSpec.affine(0.3), ChartSpec.affine(0.9), ChartSpec.exponential(0.2), ChartSpec.exponential(0.3)]
CONTINUOUS = [
    laws.GaussianPerturbation(0.08, 2),
    laws.GaussianPerturbation(0.3, 2),
    laws.UniformBallPerturbation(0.35, 2),
    laws.ExpGaussian(0.1, 2),
]


def _mc(law, chart):
    return laws.monte_carlo_stats(law, chart, 100_000, seed=17)


@pytest.mark.parametrize("chart", CHARTS, ids=lambda c: f"{c.kind.value}-{c.r}")
@pytest.mark.parametrize("law", CONTINUOUS, ids=repr)
def test_fixed_bounds_bracket_monte_carlo(law, chart):
    fb = bounds.fixed_bounds(law, chart)
    mc = _mc(law, chart)
    assert fb.p_lo - 4 * mc.se_p - 1e-12 <= mc.p_out <= fb.p_hi + 4 * mc.se_p + 1e-12
    assert fb.g3_lo - 4 * mc.se_s2 <= mc.s2 <= fb.g3_hi + 4 * mc.se_s2
    assert np.linalg.norm(mc.m) <= fb.mean_hi + 4 * mc.se_m


@pytest.mark.parametrize("chart", CHARTS, ids=lambda c: f"{c.kind.value}-{c.r}")
@pytest.mark.parametrize("law", CONTINUOUS, ids=repr)
def test_tail_bounds_bracket_small_scale(law, chart):
    small = law.scaled(0.2)
    tb = bounds.tail_bounds(small, chart, j=2)
    mc = _mc(small, chart)
    assert mc.p_out <= tb.p_hi + 4 * mc.se_p + 1e-12
    assert tb.g3_lo - 4 * mc.se_s2 <= mc.s2 <= tb.g3_hi + 4 * mc.se_s2
    assert np.linalg.norm(mc.m) <= tb.mean_lin + tb.mean_dev + 4 * mc.se_m


def test_tail_bounds_exact_for_linear_atoms():
    e11 = np.diag([1.0, 0.0])
    law = laws.AtomicDiscrete([np.eye(2) + 0.02 * e11, np.eye(2) + 0.04 * e11], [0.5, 0.5])
    tb = bounds.tail_bounds(law, ChartSpec.affine(0.5), j=1)
    st = laws.term_stats(law, ChartSpec.affine(0.5))
    assert tb.p_hi == 0 and tb.exact_linear_mean
    assert tb.g3_lo == pytest.approx(st.s2, rel=1e-12) and tb.g3_hi == pytest.approx(st.s2, rel=1e-12)
    assert tb.mean_lin == pytest.approx(np.linalg.norm(st.m), rel=1e-12)


def test_geometry_radii_are_consistent():
    for chart in CHARTS:
        for law in (laws.GaussianPerturbation(0.1, 2), laws.ExpGaussian(0.1, 2)):
            g = bounds.chart_geometry(law, chart)
            assert 0 < g.a_in <= chart.r + 1e-15 <= g.a_near + 1e-15
            assert g.c_rem >= 0
            assert g.linear == (g.c_rem == 0)
    g = bounds.chart_geometry(laws.GaussianPerturbation(0.1, 2), ChartSpec.exponential(0.3))
    assert g.a_in == pytest.approx(1 - math.exp(-0.3))


def test_remainder_constant_bounds_log(rng):
    chart = ChartSpec.exponential(0.3)
    g = bounds.chart_geometry(laws.GaussianPerturbation(0.1, 2), chart)
    from randprod.group import mat_log

    y = rng.normal(size=(2000, 2, 2))
    y *= (g.a_near * rng.uniform(size=2000) / np.linalg.norm(y, axis=(1, 2)))[:, None, None]
    t = np.linalg.norm(y, axis=(1, 2))
    err = np.linalg.norm(mat_log(np.eye(2) + y) - y, axis=(1, 2))
    assert np.all(err <= g.c_rem * t**2 + 1e-15)
