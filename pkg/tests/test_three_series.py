import numpy as np
import pytest
import scipy.special as sc

from randprod import group, laws
from randprod import three_series as ts
from randprod.charts import ChartSpec
from randprod.laws import AtomicDiscrete, LawSequence, PowerDecay, Table
from randprod.three_series import Evidence, Policy, Status

I2 = np.eye(2)
E11 = group.unit(2, 0, 0)
AFF = ChartSpec.affine(0.5)
FAST = Policy(horizon=2000)


def statuses(report):
    return [v.status for v in report.verdicts]


def test_identity_sequence():
    rep = ts.evaluate(LawSequence(AtomicDiscrete([I2], [1.0])), AFF, FAST)
    assert rep.overall is Status.CONVERGES
    assert rep.g1.partial_sum == 0 and rep.g3.partial_sum == 0
    np.testing.assert_array_equal(rep.g2.partial_sum, I2)


def test_gaussian_fast_decay_converges():
    seq = LawSequence(laws.GaussianPerturbation(0.1, 2), PowerDecay(1.0))
    rep = ts.evaluate(seq, AFF, Policy(horizon=10_000))
    assert statuses(rep) == [Status.CONVERGES] * 3
    assert all(v.evidence is Evidence.CLOSED_FORM for v in rep.verdicts)
    # G1 terms are the chi-square tails Q(2, r^2 n^2 / 0.02)
    table = ts.term_table(seq, AFF, 50)
    n = np.arange(1, 51)
    np.testing.assert_allclose(table.p, sc.gammaincc(2, 0.25 * n**2 / 0.02), rtol=1e-12, atol=1e-300)
    assert np.all(table.s2 <= 4 * (0.1 / n) ** 2 + 1e-18)


def test_gaussian_harmonic_diverges_through_g3():
    seq = LawSequence(laws.GaussianPerturbation(0.5, 2), PowerDecay(0.5))
    rep = ts.evaluate(seq, AFF, FAST)
    assert rep.g3.status is Status.DIVERGES and rep.overall is Status.DIVERGES
    table = ts.term_table(seq, AFF, 2000)
    n = np.arange(1, 2001)
    # G3 terms approach d sigma_n^2 = 1/n from below
    assert table.s2[-1] * n[-1] == pytest.approx(1.0, rel=1e-6)


def test_haar_diverges_through_g1():
    rep = ts.evaluate(LawSequence(laws.HaarFiniteSubgroup.cyclic_rotations(4)), AFF, FAST)
    assert rep.g1.status is Status.DIVERGES and rep.overall is Status.DIVERGES
    assert rep.per_term_table[0].p_out == 0.75
    assert rep.g1.partial_sum == pytest.approx(0.75 * 2000)


def test_repeated_asymmetric_atoms_power():
    law = AtomicDiscrete([I2 + 0.2 * E11, I2 + 0.4 * E11], [0.5, 0.5])
    prods = ts.g2_partial_products(LawSequence(law), AFF, 30)
    assert prods.shape == (31, 2, 2)
    np.testing.assert_array_equal(prods[0], I2)
    np.testing.assert_allclose(prods[:, 0, 0], 1.3 ** np.arange(31), rtol=1e-13)
    rep = ts.evaluate(LawSequence(law), AFF, FAST)
    assert rep.g2.status is Status.DIVERGES and rep.g3.status is Status.DIVERGES


def test_convergent_infinite_product_of_means():
    # per-n atoms with truncated mean 0.3 E11 / n^2
    def term(n):
        c = 0.3 / n**2
        return AtomicDiscrete([I2 + 0.5 * c * E11, I2 + 1.5 * c * E11], [0.5, 0.5])

    seq = LawSequence.from_generator(term, dim=2)
    N = 1_000_000
    prods = ts.g2_partial_products(
        LawSequence(AtomicDiscrete([I2 + 0.15 * E11, I2 + 0.45 * E11], [0.5, 0.5]), PowerDecay(2.0)), AFF, N
    )
    n = np.arange(1, N + 1)
    ref = np.exp(np.sum(np.log1p(0.3 / n**2)))
    assert prods[-1, 0, 0] == pytest.approx(ref, rel=1e-12)
    small = ts.g2_partial_products(seq, AFF, 200)
    assert small[-1, 0, 0] == pytest.approx(prods[200, 0, 0], rel=1e-14)


def test_symmetric_products_stay_identity():
    seq = LawSequence(laws.UniformBallPerturbation(0.6, 2), PowerDecay(0.3))
    prods = ts.g2_partial_products(seq, AFF, 100)
    np.testing.assert_array_equal(prods, np.broadcast_to(I2, prods.shape))


def test_partial_sums_monotone():
    seq = LawSequence(laws.GaussianPerturbation(0.7, 2), PowerDecay(0.4))
    rep = ts.evaluate(seq, AFF, FAST)
    s1 = [row.s1_partial for row in rep.per_term_table]
    s3 = [row.s3_partial for row in rep.per_term_table]
    assert s1 == sorted(s1) and s3 == sorted(s3)


def test_checkpoint_grid():
    assert ts.checkpoint_grid(1600) == [100, 200, 400, 800, 1600]


def test_envelope_tier():
    # generator laws have no closed-form comparator
    def term(n):
        return AtomicDiscrete([I2 + (0.2 / n) * E11, I2 - (0.2 / n) * E11], [0.5, 0.5])

    seq = LawSequence.from_generator(term, dim=2, declared_envelope=(1.0, 2.0))
    rep = ts.evaluate(seq, AFF, Policy(horizon=200))
    assert rep.g1.evidence is Evidence.ENVELOPE and rep.g1.status is Status.CONVERGES
    assert rep.g3.evidence is Evidence.ENVELOPE
    # envelope that exact terms contradict is ignored
    bad = LawSequence.from_generator(term, dim=2, declared_envelope=(1e-6, 2.0))
    rep = ts.evaluate(bad, AFF, Policy(horizon=200))
    assert rep.g3.evidence is Evidence.HORIZON
    assert any("envelope ignored" in note for note in rep.notes)


def test_horizon_tier_is_never_decisive():
    def term(n):
        return AtomicDiscrete([I2 + (0.2 / n) * E11, I2 - (0.2 / n) * E11], [0.5, 0.5])

    seq = LawSequence.from_generator(term, dim=2)
    rep = ts.evaluate(seq, AFF, Policy(horizon=400, eps_c=1e-3))
    for v in rep.verdicts:
        assert v.evidence is Evidence.HORIZON
        assert v.status in (Status.CONVERGED_NUMERICALLY, Status.INCONCLUSIVE)
    assert rep.g3.status is Status.CONVERGED_NUMERICALLY
    strict = ts.evaluate(seq, AFF, Policy(horizon=400, eps_c=1e-12))
    assert strict.g3.status is Status.INCONCLUSIVE and strict.overall is Status.INCONCLUSIVE


def test_table_rate_uses_last_entry():
    seq = LawSequence(laws.GaussianPerturbation(0.1, 2), Table((1.0, 0.5, 0.0001)))
    rep = ts.evaluate(seq, AFF, FAST)
    # the tail law has sigma = 1e-5: positive G3 term, constant in n
    assert rep.g3.status is Status.DIVERGES
    assert rep.g1.status is Status.DIVERGES


def test_overall_rule():
    C, D, N, I = Status.CONVERGES, Status.DIVERGES, Status.CONVERGED_NUMERICALLY, Status.INCONCLUSIVE
    assert ts.overall_status([C, N, C]) is C
    assert ts.overall_status([C, I, D]) is D
    assert ts.overall_status([C, I, N]) is I


def test_policy_validation():
    with pytest.raises(ValueError):
        Policy(horizon=5)
    with pytest.raises(ValueError):
        Policy(eps_c=0)


def test_report_serialises():
    import json

    rep = ts.evaluate(LawSequence(laws.HaarFiniteSubgroup.cyclic_rotations(4)), AFF, FAST)
    doc = json.loads(json.dumps(rep.as_dict()))
    assert doc["overall"] == "Diverges" and doc["g1"]["evidence"] == "closed-form comparison"
