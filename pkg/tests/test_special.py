import math

import numpy as np
import pytest
import scipy.stats as ss

from randprod import special


@pytest.mark.parametrize("dof", [1, 4, 9, 16])
def test_chi2_sf(dof):
    t = np.array([0.1, 1.0, 5.0, 30.0, 200.0])
    np.testing.assert_allclose(special.chi2_sf(t, dof), ss.chi2.sf(t, dof), rtol=1e-12)


@pytest.mark.parametrize("dof,j", [(4, 1), (4, 2), (9, 0.5), (1, 3)])
def test_chi2_moment(dof, j):
    assert special.chi2_moment(j, dof) == pytest.approx(ss.chi2.moment(1, dof) if j == 1 else ss.chi2.expect(lambda x: x**j, args=(dof,)), rel=1e-9)


def test_complementary():
    p, q = special.gammainc_lower(2.5, 3.0), special.gammainc_upper(2.5, 3.0)
    assert p + q == pytest.approx(1.0, abs=1e-15)
    assert special.gammainc_upper(2.0, 0.0) == 1.0
    assert math.isclose(special.gammainc_upper(2.0, 800.0), 0.0, abs_tol=1e-300)
