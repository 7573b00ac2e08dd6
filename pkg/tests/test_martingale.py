import numpy as np
import pytest

from randprod import group, laws, simulator as sim
from randprod.charts import ChartSpec
from randprod.laws import AtomicDiscrete, LawSequence, PowerDecay

I2 = np.eye(2)
E11, E12, E21 = group.unit(2, 0, 0), group.unit(2, 0, 1), group.unit(2, 1, 0)
AFF = ChartSpec.affine(0.5)


def test_bump_function():
    f = sim.BumpFunction(0.8)
    assert f(I2) == 1.0
    assert f(I2 + 0.8 * E11) == 0.0
    assert f(I2 + 0.4 * E11) == pytest.approx((1 - 0.25) ** 3)
    assert f.id == "bump(width=0.8)"


def test_identity_martingale():
    seq = LawSequence(AtomicDiscrete([I2], [1.0]))
    rep = sim.martingale_check(seq, AFF, 5, 100, seed=1)
    assert rep.estimate == 1.0 and rep.se == 0.0 and rep.passed


def test_exact_enumeration_symmetric():
    seq = LawSequence(AtomicDiscrete([I2 + 0.2 * E12, I2 - 0.2 * E12], [0.5, 0.5]))
    assert sim.martingale_exact(seq, AFF, 3) == pytest.approx(1.0, abs=1e-12)


def test_exact_enumeration_asymmetric_noncommuting():
    law = AtomicDiscrete([I2 + 0.3 * E12, I2 + 0.2 * E21 - 0.1 * E11, 1.8 * I2], [0.4, 0.4, 0.2])
    seq = LawSequence(law, PowerDecay(0.7))
    for n in (1, 2, 4):
        assert sim.martingale_exact(seq, AFF, n) == pytest.approx(1.0, abs=1e-12)


def test_brute_force_matches_direct_sum():
    # recompute E[M_2 f] with explicit loops as an independent oracle
    law = AtomicDiscrete([I2 + 0.3 * E12, I2 - 0.1 * E21], [0.3, 0.7])
    seq = LawSequence(law)
    f = sim.BumpFunction()
    b = laws.truncated_mean(law, AFF)
    bi = np.linalg.inv(b)
    total = 0.0
    for i, xi in enumerate(law.atoms):
        for j, xj in enumerate(law.atoms):
            z1 = xi @ bi
            z2 = z1 @ b @ xj @ bi @ bi
            comp1 = sum(w * f(a @ bi) for a, w in zip(law.atoms, law.probs)) - f(I2)
            comp2 = sum(w * f(z1 @ b @ a @ bi @ bi) for a, w in zip(law.atoms, law.probs)) - f(z1)
            total += law.probs[i] * law.probs[j] * (f(z2) - comp1 - comp2)
    assert sim.martingale_exact(seq, AFF, 2) == pytest.approx(total, abs=1e-14)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_monte_carlo_asymmetric():
    law = AtomicDiscrete([I2 + 0.3 * E11, I2 - 0.1 * E11 + 0.2 * E12], [0.5, 0.5])
    rep = sim.martingale_check(LawSequence(law), AFF, 6, 100_000, seed=3)
    assert rep.passed and rep.se > 0
    assert abs(rep.estimate - 1.0) <= 3 * rep.se


def test_rejects_continuous_laws():
    with pytest.raises(laws.LawError):
        sim.martingale_check(LawSequence(laws.GaussianPerturbation(0.1, 2)), AFF, 2, 100, seed=0)
