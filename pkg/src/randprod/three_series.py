"""Three-series verdicts for a sequence of independent random matrices.

For a chart (U, phi) the product x_1 x_2 ... x_n converges almost surely
iff

* G1: sum P(x_n outside U) converges,
* G2: the running product of truncated means b_1 b_2 ... b_n converges,
* G3: sum E||phi(x_n) 1_U - phi(b_n)||^2 converges.

Each series is judged in three tiers: a rigorous comparison with a p-series
built from exact terms or moment bounds, a user-declared envelope, and
finally a horizon Cauchy test that can only report ``ConvergedNumerically``
or ``Inconclusive``.
"""
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds, charts, kernels
from .group import frobenius, mat_exp
from .laws import AtomicDiscrete, Constant, PowerDecay, Table, monte_carlo_stats, term_stats

log = logging.getLogger(__name__)

EXACT_CHUNK = 8192
ENVELOPE_RTOL = 1e-9


class Status(str, enum.Enum):
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    CONVERGED_NUMERICALLY = "ConvergedNumerically"
    INCONCLUSIVE = "Inconclusive"


class Evidence(str, enum.Enum):
    CLOSED_FORM = "closed-form comparison"
    ENVELOPE = "declared envelope"
    HORIZON = "horizon Cauchy test"


@dataclass(frozen=True)
class Policy:
    horizon: int = 100_000
    budget: int = 10_000
    eps_c: float = 1e-6
    seed: int = 0
    # Monte-Carlo terms are only estimated up to this index
    mc_horizon: int = 256

    def __post_init__(self):
        if self.horizon < 10:
            raise ValueError(f"horizon must be at least 10, got {self.horizon}")
        if not self.eps_c > 0:
            raise ValueError(f"eps_c must be positive, got {self.eps_c}")
        if self.mc_horizon < 10:
            raise ValueError(f"mc_horizon must be at least 10, got {self.mc_horizon}")

    def as_dict(self):
        return {
            "horizon": self.horizon,
            "budget": self.budget,
            "eps_c": self.eps_c,
            "seed": self.seed,
            "mc_horizon": self.mc_horizon,
        }


@dataclass(frozen=True, eq=False)
class SeriesVerdict:
    status: Status
    evidence: Evidence
    partial_sum: object
    horizon_used: int
    detail: str = ""

    def as_dict(self):
        ps = self.partial_sum
        return {
            "status": self.status.value,
            "evidence": self.evidence.value,
            "partial_sum": ps.tolist() if isinstance(ps, np.ndarray) else ps,
            "horizon_used": self.horizon_used,
            "detail": self.detail,
        }


@dataclass(frozen=True, eq=False)
class TermRow:
    n: int
    p_out: float
    m: np.ndarray
    s2: float
    exact: bool
    b_hat: np.ndarray
    s1_partial: float
    s3_partial: float

    def as_dict(self):
        return {
            "n": self.n,
            "p_out": self.p_out,
            "m": self.m.tolist(),
            "s2": self.s2,
            "exact": self.exact,
            "b_hat": self.b_hat.tolist(),
            "g1_partial_sum": self.s1_partial,
            "g3_partial_sum": self.s3_partial,
        }


@dataclass(frozen=True, eq=False)
class SeriesReport:
    g1: SeriesVerdict
    g2: SeriesVerdict
    g3: SeriesVerdict
    overall: Status
    per_term_table: list
    notes: list = field(default_factory=list)

    @property
    def verdicts(self):
        return (self.g1, self.g2, self.g3)

    def as_dict(self):
        return {
            "overall": self.overall.value,
            "g1": self.g1.as_dict(),
            "g2": self.g2.as_dict(),
            "g3": self.g3.as_dict(),
            "per_term_table": [row.as_dict() for row in self.per_term_table],
            "notes": list(self.notes),
        }


def overall_status(statuses):
    statuses = list(statuses)
    if Status.DIVERGES in statuses:
        return Status.DIVERGES
    if all(s in (Status.CONVERGES, Status.CONVERGED_NUMERICALLY) for s in statuses):
        return Status.CONVERGES
    return Status.INCONCLUSIVE


# -- per-term tables -------------------------------------------------------


@dataclass(eq=False)
class TermTable:
    """Statistics for n = 1..horizon."""

    p: np.ndarray
    m: np.ndarray
    s2: np.ndarray
    exact: bool

    @property
    def horizon(self):
        return len(self.p)


def _constant_law(seq):
    return seq.is_scaled and isinstance(seq.rate, Constant)


def _distinct_scales(seq, horizon):
    ns = np.arange(1, horizon + 1)
    if isinstance(seq.rate, Table):
        cap = min(horizon, seq.rate.tail_start)
        idx = np.minimum(ns, cap) - 1
        return seq.scales(np.arange(1, cap + 1)), idx
    return seq.scales(ns), ns - 1


def term_table(seq, chart, horizon, budget=10_000, seed=0):
    """Exact or Monte-Carlo TermStats for every n <= horizon, as arrays."""
    k = seq.dim
    if chart.dim != k:
        raise ValueError(f"chart is for k={chart.dim}, sequence for k={k}")
    if seq.is_scaled and not isinstance(seq.rate, Constant):
        scales, idx = _distinct_scales(seq, horizon)
        parts = []
        for lo in range(0, len(scales), EXACT_CHUNK):
            res = seq.base.exact_stats_scaled(chart, scales[lo : lo + EXACT_CHUNK])
            if res is None:
                parts = None
                break
            parts.append(res)
        if parts is not None:
            p = np.concatenate([a for a, _, _ in parts])
            m = np.concatenate([b for _, b, _ in parts])
            s2 = np.concatenate([c for _, _, c in parts])
            return TermTable(p[idx], m[idx], s2[idx], True)
        if isinstance(seq.rate, Table):
            rows = [
                monte_carlo_stats(seq.base.scaled(float(s)), chart, budget, seed=seed, n=j + 1)
                for j, s in enumerate(scales)
            ]
            return _stack(rows, idx)
    if _constant_law(seq):
        st = term_stats(seq.base, chart, budget, seed=seed, n=1)
        idx = np.zeros(horizon, dtype=int)
        return _stack([st], idx)
    rows = [term_stats(seq.term(n), chart, budget, seed=seed, n=n) for n in range(1, horizon + 1)]
    return _stack(rows, np.arange(horizon))


def _stack(rows, idx):
    p = np.array([r.p_out for r in rows])[idx]
    m = np.array([r.m for r in rows])[idx]
    s2 = np.array([r.s2 for r in rows])[idx]
    return TermTable(p, m, s2, all(r.exact for r in rows))


def phi_inv_batch(chart, ms):
    """Vectorised inverse chart; tiny rounding past the radius is tolerated."""
    ms = np.asarray(ms, float)
    norms = frobenius(ms)
    if np.any(norms > chart.r * (1.0 + 1e-9)):
        raise charts.DomainError("truncated mean outside the chart image")
    if chart.kind is charts.ChartKind.AFFINE:
        return np.eye(chart.dim) + ms
    return mat_exp(ms)


def _running_products(bs, record):
    k = bs.shape[-1]
    final, final_exp, rec, rec_exp = kernels.chain_products(
        np.eye(k)[None], np.zeros(1, dtype=np.int64), np.ascontiguousarray(bs[:, None]), record
    )
    return rec[:, 0], rec_exp[:, 0]


def _scaled_value(x, e):
    with np.errstate(over="ignore"):
        return np.ldexp(x, np.asarray(e)[..., None, None])


def g2_partial_products(seq, chart, N, budget=10_000, seed=0):
    """Array (N + 1, k, k) with b_hat_0 = I and b_hat_n = b_1 ... b_n."""
    if N < 1:
        raise ValueError("N must be at least 1")
    table = term_table(seq, chart, N, budget, seed)
    bs = phi_inv_batch(chart, table.m)
    rec, rec_exp = _running_products(bs, np.ones(N, dtype=bool))
    return np.concatenate([np.eye(seq.dim)[None], _scaled_value(rec, rec_exp)])


def checkpoint_grid(horizon):
    """n in {N/16, N/8, N/4, N/2, N}."""
    return sorted({max(1, horizon // 2**j) for j in range(5)})


def _displacement_scaled(x_m, e_m, x_n, e_n):
    k = x_m.shape[-1]
    try:
        sol = np.linalg.solve(x_m, x_n)
    except np.linalg.LinAlgError:
        return math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        d = frobenius(np.ldexp(sol, int(e_n - e_m)) - np.eye(k))
    return float(d) if np.isfinite(d) else math.inf


def cauchy_statistic(xs, es):
    """max over checkpoint pairs m < n of displacement(b_hat_m, b_hat_n)."""
    worst = 0.0
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            worst = max(worst, _displacement_scaled(xs[i], es[i], xs[j], es[j]))
    return worst


# -- rigorous tier -----------------------------------------------------------


def _tail_index(seq, chart, N):
    """First n >= N at which every atom of the scaled law sits in the linear region."""
    law = seq.base
    if not isinstance(law, AtomicDiscrete):
        return N
    geo = bounds.chart_geometry(law, chart)
    sup = law.radial().sup
    if sup <= geo.a_in:
        return N
    need = math.ceil((sup / geo.a_in) ** (1.0 / seq.rate.q) * (1.0 + 1e-12))
    return max(N, need)


def _closed_form_power(seq, chart, N):
    q = seq.rate.q
    j = math.floor(1.0 / (2.0 * q)) + 1
    n0 = _tail_index(seq, chart, N)
    law0 = seq.term(n0)
    geo = bounds.chart_geometry(law0, chart)
    tb = bounds.tail_bounds(law0, chart, j)
    out = {}
    out["g1"] = (
        Status.CONVERGES,
        f"P(out) <= {tb.p_hi:.3g} (n0/n)^{2 * q * j:g} for n >= n0={n0}",
    )
    if 2 * q > 1:
        out["g3"] = (Status.CONVERGES, f"G3 term <= {tb.g3_hi:.3g} (n0/n)^{2 * q:g}")
    elif tb.g3_lo > 0:
        out["g3"] = (Status.DIVERGES, f"G3 term >= {tb.g3_lo:.3g} (n0/n)^{2 * q:g}, exponent <= 1")
    elif tb.g3_hi == 0:
        out["g3"] = (Status.CONVERGES, "G3 terms vanish beyond n0")
    if law0.symmetric and geo.linear:
        out["g2"] = (Status.CONVERGES, "symmetric law in an odd chart: b_n = I")
    elif tb.exact_linear_mean:
        if tb.mean_lin == 0:
            out["g2"] = (Status.CONVERGES, "truncated means vanish beyond n0")
        elif q > 1:
            out["g2"] = (Status.CONVERGES, f"||phi(b_n)|| = {tb.mean_lin:.3g} (n0/n)^{q:g}, summable")
        else:
            out["g2"] = (
                Status.DIVERGES,
                f"commuting truncated means phi(b_n) = c n^-{q:g} E y with E y != 0",
            )
    elif tb.mean_lin == 0 and 2 * q > 1:
        out["g2"] = (Status.CONVERGES, f"||phi(b_n)|| <= {tb.mean_dev:.3g} (n0/n)^{2 * q:g}")
    elif tb.mean_lin > 0 and q > 1:
        out["g2"] = (
            Status.CONVERGES,
            f"||phi(b_n)|| <= {tb.mean_lin + tb.mean_dev:.3g} (n0/n)^{q:g}",
        )
    return out


def _closed_form_fixed(law, chart, tail_from):
    fb = bounds.fixed_bounds(law, chart)
    where = f"for n >= {tail_from}"
    out = {}
    if fb.p_lo > 0:
        out["g1"] = (Status.DIVERGES, f"P(out) >= {fb.p_lo:.3g} {where}")
    elif math.isinf(law.radial().sup):
        # unbounded support leaves U with positive probability even when the value underflows
        out["g1"] = (Status.DIVERGES, f"P(out) > 0 (unbounded support) {where}")
    elif fb.p_hi == 0:
        out["g1"] = (Status.CONVERGES, f"P(out) = 0 {where}")
    if fb.g3_lo > 0:
        out["g3"] = (Status.DIVERGES, f"G3 term >= {fb.g3_lo:.3g} {where}")
    elif fb.g3_hi == 0:
        out["g3"] = (Status.CONVERGES, f"G3 term = 0 {where}")
    geo = bounds.chart_geometry(law, chart)
    if fb.mean_hi == 0 or (law.symmetric and geo.linear):
        out["g2"] = (Status.CONVERGES, f"b_n = I {where}")
    elif fb.exact:
        out["g2"] = (Status.DIVERGES, f"constant truncated mean b != I {where}")
    return out


def closed_form_verdicts(seq, chart, N):
    """Rigorous verdicts ``{"g1"|"g2"|"g3": (Status, detail)}``; missing keys are undecided."""
    if not seq.is_scaled:
        return {}
    rate = seq.rate
    if isinstance(rate, PowerDecay):
        return _closed_form_power(seq, chart, N)
    tail_from = rate.tail_start
    return _closed_form_fixed(seq.term(tail_from), chart, tail_from)


def _envelope_ok(seq, table, notes):
    if seq.declared_envelope is None:
        return False
    c, alpha = seq.declared_envelope
    if alpha <= 1:
        notes.append(f"declared envelope exponent {alpha} <= 1 decides nothing")
        return False
    if table.exact:
        ns = np.arange(1, table.horizon + 1)
        env = c * ns**-alpha * (1.0 + ENVELOPE_RTOL)
        if np.any(table.p > env) or np.any(table.s2 > env):
            n_bad = int(ns[(table.p > env) | (table.s2 > env)][0])
            notes.append(f"declared envelope ignored: exact term at n={n_bad} exceeds it")
            log.warning("declared envelope contradicted at n=%d", n_bad)
            return False
    return True


def evaluate(seq, chart, policy=None):
    """SeriesReport for ``seq`` under ``chart``."""
    policy = policy or Policy()
    N = policy.horizon
    notes = []
    closed = closed_form_verdicts(seq, chart, N)

    horizon = N
    if seq.is_scaled:
        table_probe_exact = seq.base.exact_stats_scaled(chart, [1.0]) is not None
    else:
        table_probe_exact = seq.term(1).is_exact(chart)
    if not _constant_law(seq) and not table_probe_exact:
        horizon = min(N, policy.mc_horizon)
        if horizon < N:
            notes.append(f"Monte-Carlo terms: horizon capped at {horizon}")
    table = term_table(seq, chart, horizon, policy.budget, policy.seed)
    if not table.exact:
        notes.append(f"Monte-Carlo term statistics, budget {policy.budget} per term")

    s1 = np.cumsum(table.p)
    s3 = np.cumsum(table.s2)
    grid = checkpoint_grid(horizon)
    record = np.zeros(horizon, dtype=bool)
    record[np.array(grid) - 1] = True
    bs = phi_inv_batch(chart, table.m)
    rec, rec_exp = _running_products(bs, record)
    b_final = _scaled_value(rec[-1], rec_exp[-1])

    envelope = _envelope_ok(seq, table, notes)
    half = horizon // 2

    def series_verdict(key, sums):
        total = float(sums[-1])
        if key in closed:
            status, detail = closed[key]
            return SeriesVerdict(status, Evidence.CLOSED_FORM, total, horizon, detail)
        if envelope:
            c, alpha = seq.declared_envelope
            return SeriesVerdict(
                Status.CONVERGES, Evidence.ENVELOPE, total, horizon, f"terms <= {c:g} n^-{alpha:g}"
            )
        tail = abs(total - float(sums[half - 1]))
        status = Status.CONVERGED_NUMERICALLY if tail < policy.eps_c else Status.INCONCLUSIVE
        return SeriesVerdict(status, Evidence.HORIZON, total, horizon, f"|S_N - S_N/2| = {tail:.3g}")

    g1 = series_verdict("g1", s1)
    g3 = series_verdict("g3", s3)
    if "g2" in closed:
        status, detail = closed["g2"]
        g2 = SeriesVerdict(status, Evidence.CLOSED_FORM, b_final, horizon, detail)
    else:
        stat = cauchy_statistic(rec, rec_exp)
        status = Status.CONVERGED_NUMERICALLY if stat < policy.eps_c else Status.INCONCLUSIVE
        g2 = SeriesVerdict(status, Evidence.HORIZON, b_final, horizon, f"max checkpoint displacement {stat:.3g}")

    rows = []
    for i, n in enumerate(grid):
        rows.append(
            TermRow(
                n=n,
                p_out=float(table.p[n - 1]),
                m=table.m[n - 1],
                s2=float(table.s2[n - 1]),
                exact=table.exact,
                b_hat=_scaled_value(rec[i], rec_exp[i]),
                s1_partial=float(s1[n - 1]),
                s3_partial=float(s3[n - 1]),
            )
        )
    return SeriesReport(g1, g2, g3, overall_status([g1.status, g2.status, g3.status]), rows, notes)
