"""Scalar sums as matrix products, and a direct scalar three-series check.

A real x embeds as the unipotent matrix I + x E_12; these multiply by adding
the x's, so the matrix evaluator must agree with the scalar criterion
(K1) sum P(|x_n| > r), (K2) sum E[x_n 1_{|x_n| <= r}], (K3) sum Var(x_n 1_{|x_n| <= r}).
"""
from dataclasses import dataclass

import numpy as np

from .charts import ChartSpec
from .laws import AtomicDiscrete, Constant, LawSequence, PowerDecay
from .three_series import (
    Evidence,
    Policy,
    SeriesReport,
    SeriesVerdict,
    Status,
    evaluate,
    overall_status,
)


@dataclass(frozen=True)
class ScalarLaw:
    values: tuple
    probs: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(vals) != len(probs) or not vals:
            raise ValueError("need one probability per value")
        if any(p <= 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must be positive and sum to 1")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class ScalarSequence:
    """x_n = scale(n) * X with X ~ ``base``."""

    base: ScalarLaw
    rate: object = Constant()

    def law(self, n):
        s = float(self.rate.scale(n))
        return np.array(self.base.values) * s, np.array(self.base.probs)


def embed(values):
    values = np.asarray(values, float)
    out = np.broadcast_to(np.eye(2), values.shape + (2, 2)).copy()
    out[..., 0, 1] = values
    return out


def embed_sequence(seq):
    base = AtomicDiscrete(embed(seq.base.values), seq.base.probs)
    return LawSequence(base, seq.rate)


def scalar_terms(vals, probs, r):
    """(K1, K2, K3) terms of one atomic law."""
    inside = np.abs(vals) <= r
    trunc = np.where(inside, vals, 0.0)
    k1 = float(np.sum(probs * ~inside))
    k2 = float(np.sum(probs * trunc))
    k3 = float(np.sum(probs * (trunc - k2) ** 2))
    return k1, k2, k3


def _scalar_table(seq, r, horizon):
    ns = np.arange(1, horizon + 1)
    scales = seq.rate.scale(ns)
    vals = np.array(seq.base.values)[None, :] * scales[:, None]
    probs = np.array(seq.base.probs)
    inside = np.abs(vals) <= r
    trunc = np.where(inside, vals, 0.0)
    k1 = (probs * ~inside).sum(axis=1)
    k2 = (probs * trunc).sum(axis=1)
    k3 = (probs * (trunc - k2[:, None]) ** 2).sum(axis=1)
    return k1, k2, k3


def is_symmetric(vals, probs):
    """X and -X have the same law (exact comparison)."""
    return sorted(zip(vals, probs)) == sorted(zip((-v for v in vals), probs))


def _closed_scalar(seq, r):
    vals = np.array(seq.base.values)
    probs = np.array(seq.base.probs)
    rate = seq.rate
    out = {}
    symmetric = is_symmetric(seq.base.values, seq.base.probs)
    if isinstance(rate, PowerDecay):
        q = rate.q
        # past n0 every value is inside [-r, r]; all three terms are exact multiples of n^-q
        out["g1"] = (Status.CONVERGES, "terms vanish eventually")
        mean = float(np.sum(probs * vals))
        var = float(np.sum(probs * (vals - mean) ** 2))
        if var == 0 or 2 * q > 1:
            out["g3"] = (Status.CONVERGES, "K3 p-series")
        else:
            out["g3"] = (Status.DIVERGES, "K3 harmonic-type series")
        if symmetric or mean == 0 or q > 1:
            out["g2"] = (Status.CONVERGES, "K2 p-series")
        else:
            out["g2"] = (Status.DIVERGES, "K2 harmonic-type series")
        return out
    n_tail = rate.tail_start
    k1, k2, k3 = scalar_terms(vals * float(rate.scale(n_tail)), probs, r)
    out["g1"] = (Status.DIVERGES if k1 > 0 else Status.CONVERGES, "constant tail term")
    if symmetric:
        out["g2"] = (Status.CONVERGES, "symmetric law: truncated means vanish")
    else:
        out["g2"] = (Status.DIVERGES if k2 != 0 else Status.CONVERGES, "constant tail term")
    out["g3"] = (Status.DIVERGES if k3 > 0 else Status.CONVERGES, "constant tail term")
    return out


def kolmogorov(seq, r, policy=None):
    """Direct scalar three-series report (K1, K2, K3 in the g1, g2, g3 slots)."""
    policy = policy or Policy()
    N = policy.horizon
    k1, k2, k3 = _scalar_table(seq, r, N)
    closed = _closed_scalar(seq, r)
    sums = {"g1": np.cumsum(k1), "g2": np.cumsum(k2), "g3": np.cumsum(k3)}
    verdicts = {}
    for key, s in sums.items():
        status, detail = closed[key]
        verdicts[key] = SeriesVerdict(status, Evidence.CLOSED_FORM, float(s[-1]), N, detail)
    statuses = [verdicts[k].status for k in ("g1", "g2", "g3")]
    return SeriesReport(verdicts["g1"], verdicts["g2"], verdicts["g3"], overall_status(statuses), [])


def classical_reduce(seq, r, policy=None):
    """Evaluate the embedded sequence under the affine chart of radius r."""
    return evaluate(embed_sequence(seq), ChartSpec.affine(r, 2), policy)


def harmonic_signs(q):
    """x_n = +-n^-q with probability 1/2 each."""
    return ScalarSequence(ScalarLaw((1.0, -1.0), (0.5, 0.5)), PowerDecay(q))


__all__ = [
    "ScalarLaw",
    "ScalarSequence",
    "classical_reduce",
    "embed",
    "embed_sequence",
    "harmonic_signs",
    "is_symmetric",
    "kolmogorov",
    "scalar_terms",
]
