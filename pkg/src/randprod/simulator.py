"""Monte-Carlo product paths and runtime checks of the product structure.

* :func:`simulate_paths` runs x_1 x_2 ... x_N for many paths, storing the
  running product on a geometric checkpoint grid.
* :func:`as_convergence_test` marks a path converged when its tail
  displacement is below eps: the max of ||x_p^-1 x_n - I|| over checkpoint
  pairs m* <= p < n, and over every n > m* against p = m* when the
  simulation was run with that m*.
* :func:`decompose` splits x_hat_n = z_hat_n b_hat_n with the truncated
  means b_n; :func:`martingale_check` tests that the compensated bump
  function process M_n f keeps mean f(e) = 1.
"""
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .group import frobenius, inverse, is_invertible
from .laws import AtomicDiscrete, LawError
from .rng import KeyedStreams
from .special import chi2_sf
from .three_series import phi_inv_batch, term_table

SIM_TAG = "paths"
MARTINGALE_TAG = "martingale"
CHUNK = 512
PATH_BLOCK = 256
RESIDUAL_RTOL = 1e-9


def checkpoint_grid(N, m_star=None):
    """Powers of two, m_star * 2**j, and N itself."""
    if m_star is None:
        m_star = max(1, N // 2)
    pts = {N}
    j = 1
    while j <= N:
        pts.add(j)
        j *= 2
    j = m_star
    while j <= N:
        pts.add(j)
        j *= 2
    return np.array(sorted(pts), dtype=np.int64)


def _scaled(x, e):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.ldexp(x, np.asarray(e)[..., None, None])


@dataclass(eq=False)
class ProductTrace:
    """Checkpoints of one path; values are ``mantissa * 2**exponent``."""

    path_id: int
    ns: np.ndarray
    mantissas: np.ndarray
    exponents: np.ndarray
    seed: int = 0
    # max over every n in (m_star, N] of ||x_m*^-1 x_n - I||, tracked while simulating
    m_star: Optional[int] = None
    anchor_max: float = 0.0

    @property
    def N(self):
        return int(self.ns[-1])

    @property
    def checkpoints(self):
        vals = _scaled(self.mantissas, self.exponents)
        return [(int(n), v) for n, v in zip(self.ns, vals)]

    def value(self, n):
        i = int(np.searchsorted(self.ns, n))
        if i == len(self.ns) or self.ns[i] != n:
            raise KeyError(f"n={n} is not a checkpoint")
        return _scaled(self.mantissas[i], self.exponents[i])

    def pair_displacements(self):
        return _pair_displacements(self.mantissas[None], self.exponents[None])[0]

    @property
    def tail_displacements(self):
        """(m, D_m) for every checkpoint m, D_m over grid pairs at or after m."""
        d = suffix_max(self.pair_displacements())
        return [(int(n), float(v)) for n, v in zip(self.ns, d)]

    def tail_displacement(self, m_star):
        sel = self.ns >= m_star
        pd = self.pair_displacements()[np.ix_(sel, sel)]
        d = float(np.max(pd)) if pd.size else 0.0
        if m_star == self.m_star:
            d = max(d, self.anchor_max)
        return d


def _pair_displacements(mant, expo):
    """(B, R, R) array with entry [p, n] = ||x_p^-1 x_n - I|| for p < n, else 0."""
    B, R, k, _ = mant.shape
    out = np.zeros((B, R, R))
    eye = np.eye(k)
    for p in range(R - 1):
        xp = mant[:, p]
        ok = is_invertible(xp) & np.all(np.isfinite(xp), axis=(-2, -1))
        sol = np.full((B, R - p - 1, k, k), np.nan)
        if ok.any():
            rhs = mant[ok, p + 1 :]
            lhs = np.broadcast_to(xp[ok][:, None], rhs.shape)
            sol[ok] = np.linalg.solve(lhs, rhs)
        shift = (expo[:, p + 1 :] - expo[:, p : p + 1]).astype(np.int64)
        with np.errstate(over="ignore", invalid="ignore"):
            d = frobenius(np.ldexp(sol, shift[..., None, None]) - eye)
        out[:, p, p + 1 :] = np.where(np.isfinite(d), d, np.inf)
    return out


def suffix_max(pd):
    """D_m = max over grid pairs m <= p < n, for each grid index m."""
    R = pd.shape[-1]
    row_max = pd.max(axis=-1)
    return np.maximum.accumulate(row_max[..., ::-1], axis=-1)[..., ::-1][..., :R]


def _anchored(anchor_inv, anchor_exp, rec, rec_exp):
    """||x_m*^-1 x_n - I|| for recorded products against the anchor."""
    k = rec.shape[-1]
    sol = np.matmul(anchor_inv, rec)
    with np.errstate(over="ignore", invalid="ignore"):
        d = frobenius(np.ldexp(sol, (rec_exp - anchor_exp)[..., None, None]) - np.eye(k))
    return np.where(np.isfinite(d), d, np.inf)


def _simulate_block(seq, N, grid, m_star, paths, streams):
    k = seq.dim
    B = len(paths)
    cur = np.broadcast_to(np.eye(k), (B, k, k)).copy()
    exp = np.zeros(B, dtype=np.int64)
    mant = np.empty((len(grid), B, k, k))
    expo = np.empty((len(grid), B), dtype=np.int64)
    is_grid = np.zeros(N + 1, dtype=bool)
    is_grid[grid] = True
    keep = is_grid.copy()
    keep[m_star:] = True
    anchor_inv = anchor_exp = None
    anchor_max = np.zeros(B)
    filled = 0
    for lo in range(1, N + 1, CHUNK):
        ns = np.arange(lo, min(lo + CHUNK, N + 1))
        xs = seq.sample_chunk(streams, ns, paths)
        cur, exp, rec, rec_exp = kernels.chain_products(cur, exp, xs, keep[ns])
        kept = ns[keep[ns]]
        on_grid = is_grid[kept]
        mant[filled : filled + on_grid.sum()] = rec[on_grid]
        expo[filled : filled + on_grid.sum()] = rec_exp[on_grid]
        filled += int(on_grid.sum())
        after = kept >= m_star
        if after.any():
            if anchor_inv is None:
                i = int(np.flatnonzero(kept == m_star)[0])
                ok = is_invertible(rec[i]) & np.all(np.isfinite(rec[i]), axis=(-2, -1))
                anchor_inv = np.full((B, k, k), np.nan)
                anchor_inv[ok] = np.linalg.inv(rec[i][ok])
                anchor_exp = rec_exp[i]
            d = _anchored(anchor_inv, anchor_exp, rec[after], rec_exp[after])
            anchor_max = np.maximum(anchor_max, d.max(axis=0))
    return mant.transpose(1, 0, 2, 3), expo.T, anchor_max


def simulate_paths(seq, N, paths, seed, m_star=None, workers=1):
    """One :class:`ProductTrace` per path; identical for any ``workers``."""
    if N < 2:
        raise ValueError("N must be at least 2")
    if paths < 1:
        raise ValueError("need at least one path")
    grid = checkpoint_grid(N, m_star)
    streams = KeyedStreams(seed, SIM_TAG)
    blocks = [np.arange(lo, min(lo + PATH_BLOCK, paths)) for lo in range(0, paths, PATH_BLOCK)]

    if m_star is None:
        m_star = max(1, N // 2)
    if not 1 <= m_star < N:
        raise ValueError(f"m_star must lie in [1, N), got {m_star}")

    def run(block):
        return _simulate_block(seq, N, grid, m_star, block, streams)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    traces = []
    for block, (mant, expo, amax) in zip(blocks, results):
        for i, pid in enumerate(block):
            traces.append(ProductTrace(int(pid), grid, mant[i], expo[i], seed, m_star, float(amax[i])))
    return traces


@dataclass(frozen=True, eq=False)
class PathVerdict:
    converged_fraction: float
    per_path: list
    eps: float
    m_star: int
    tail_displacements: list = field(default_factory=list)

    def as_dict(self):
        return {
            "converged_fraction": self.converged_fraction,
            "converged_paths": int(sum(self.per_path)),
            "paths": len(self.per_path),
            "eps": self.eps,
            "m_star": self.m_star,
        }


def as_convergence_test(traces, eps=1e-3, m_star=None):
    if not traces:
        raise ValueError("no traces to test")
    N = traces[0].N
    if m_star is None:
        m_star = max(1, N // 2)
    if not m_star < N:
        raise ValueError(f"m_star must be below N={N}, got {m_star}")
    mant = np.stack([t.mantissas for t in traces])
    expo = np.stack([t.exponents for t in traces])
    sel = traces[0].ns >= m_star
    pd = _pair_displacements(mant[:, sel], expo[:, sel])
    d = pd.max(axis=(-2, -1))
    anchored = [t.anchor_max if t.m_star == m_star else 0.0 for t in traces]
    d = np.maximum(d, anchored)
    per_path = [bool(v < eps) for v in d]
    return PathVerdict(float(np.mean(per_path)), per_path, eps, int(m_star), [float(v) for v in d])


TRACE_HEADER_DOC = (
    "path: path id; n: checkpoint index; xIJ: entry (I, J) of the running product "
    "x_1...x_n; D_m: max displacement ||x_p^-1 x_q - I||_F over checkpoints n <= p < q <= N"
)


def write_traces(traces, path):
    """Delimited text with header ``path,n,x11,...,xkk,D_m``."""
    k = traces[0].mantissas.shape[-1]
    cols = ["path", "n"] + [f"x{i + 1}{j + 1}" for i in range(k) for j in range(k)] + ["D_m"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for t in traces:
            d = suffix_max(t.pair_displacements())
            for (n, val), dm in zip(t.checkpoints, d):
                w.writerow([t.path_id, n] + [repr(float(v)) for v in val.ravel()] + [repr(float(dm))])
    return cols


def uniformity_pvalue(finals, elements):
    """Chi-square p-value that ``finals`` are uniform over the finite set ``elements``."""
    finals = np.asarray(finals)
    elements = np.asarray(elements)
    dist = frobenius(finals[:, None] - elements[None])
    idx = np.argmin(dist, axis=1)
    if np.any(dist[np.arange(len(idx)), idx] > 1e-6):
        raise ValueError("a final value is not one of the elements")
    counts = np.bincount(idx, minlength=len(elements))
    expected = len(finals) / len(elements)
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return float(chi2_sf(stat, len(elements) - 1)), counts


# -- decomposition -----------------------------------------------------------


@dataclass(eq=False)
class DecompositionTrace:
    z: np.ndarray
    z_hat: np.ndarray
    b_hat: np.ndarray
    x_hat: np.ndarray
    residual: np.ndarray
    aborted_at: Optional[int] = None

    @property
    def max_relative_residual(self):
        if len(self.residual) == 0:
            return 0.0
        return float(np.max(self.residual / (1.0 + frobenius(self.x_hat))))


def path_factors(seq, N, path, seed):
    """The x_1..x_N drawn for ``path`` by :func:`simulate_paths` with ``seed``."""
    streams = KeyedStreams(seed, SIM_TAG)
    return seq.sample_chunk(streams, np.arange(1, N + 1), np.array([path]))[:, 0]


def truncated_means(seq, chart, N, budget=10_000, seed=0):
    table = term_table(seq, chart, N, budget, seed)
    if not table.exact:
        raise LawError("decomposition needs exact truncated means")
    return phi_inv_batch(chart, table.m)


def decompose_factors(xs, bs):
    """x_hat_n = z_hat_n b_hat_n for given factors ``xs`` and truncated means ``bs``."""
    N, k, _ = xs.shape
    eye = np.eye(k)
    z = np.empty_like(xs)
    z_hat = np.empty_like(xs)
    b_hat = np.empty_like(xs)
    x_hat = np.empty_like(xs)
    zh, bh, xh = eye, eye, eye
    for i in range(N):
        bn = bh @ bs[i]
        if not is_invertible(bn):
            return DecompositionTrace(z[:i], z_hat[:i], b_hat[:i], x_hat[:i], _res(x_hat[:i], z_hat[:i], b_hat[:i]), i + 1)
        # z_n = b_hat_{n-1} x_n b_hat_n^-1; grouping z_hat_{n-1} z_n as
        # (z_hat_{n-1} b_hat_{n-1} x_n) b_hat_n^-1 keeps rounding bounded when b_hat is ill-conditioned
        zn = _right_solve(bh @ xs[i], bn)
        zh = _right_solve(zh @ bh @ xs[i], bn)
        bh = bn
        xh = xh @ xs[i]
        z[i], z_hat[i], b_hat[i], x_hat[i] = zn, zh, bh, xh
    return DecompositionTrace(z, z_hat, b_hat, x_hat, _res(x_hat, z_hat, b_hat))


def _right_solve(a, b):
    """a b^-1 without forming the inverse."""
    return np.linalg.solve(b.T, a.T).T


def _res(x_hat, z_hat, b_hat):
    return frobenius(x_hat - np.matmul(z_hat, b_hat))


def decompose(seq, chart, trace, budget=10_000):
    """Decomposition along the path that produced ``trace``."""
    xs = path_factors(seq, trace.N, trace.path_id, trace.seed)
    bs = truncated_means(seq, chart, trace.N, budget)
    return decompose_factors(xs, bs)


# -- martingale check ----------------------------------------------------------


@dataclass(frozen=True)
class BumpFunction:
    """f(g) = (1 - t)^3 for t = ||g - I||^2 / width^2 < 1, else 0."""

    width: float = 0.8

    @property
    def id(self):
        return f"bump(width={self.width:g})"

    def __call__(self, g):
        t = frobenius(np.asarray(g) - np.eye(np.shape(g)[-1])) ** 2 / self.width**2
        return np.where(t <= 1.0, (1.0 - np.minimum(t, 1.0)) ** 3, 0.0)


@dataclass(frozen=True)
class MartingaleReport:
    function_id: str
    m: int
    n: int
    estimate: float
    se: float
    passed: bool

    def as_dict(self):
        return dict(self.__dict__)


def _atomic_terms(seq, chart, n):
    laws = [seq.term(p) for p in range(1, n + 1)]
    if not all(isinstance(law, AtomicDiscrete) for law in laws):
        raise LawError("martingale check needs atomic laws")
    ms = np.array([law.exact_stats(chart).m for law in laws])
    return laws, phi_inv_batch(chart, ms)


def _compensator_step(f, zh, bh, law, b):
    """E over x ~ law of f(zh bh x b^-1 bh^-1) - f(zh), per row of ``zh``."""
    conj_r = np.matmul(inverse(b), inverse(bh))
    moved = np.matmul(np.matmul(zh, bh)[..., None, :, :], law.atoms @ conj_r[..., None, :, :])
    return np.tensordot(f(moved), law.probs, axes=([-1], [0])) - f(zh)


def _martingale_values(f, xs, laws, bs):
    """M_n f for each row of factor paths ``xs`` (R, n, k, k)."""
    R, n, k, _ = xs.shape
    zh = np.broadcast_to(np.eye(k), (R, k, k)).copy()
    bh = np.eye(k)
    comp = np.zeros(R)
    for p in range(n):
        comp += _compensator_step(f, zh, bh, laws[p], bs[p])
        zp = bh @ xs[:, p] @ inverse(bs[p]) @ inverse(bh)
        zh = np.matmul(zh, zp)
        bh = bh @ bs[p]
    return f(zh) - comp


def martingale_check(seq, chart, n, replicates, seed, f=None):
    f = f or BumpFunction()
    laws, bs = _atomic_terms(seq, chart, n)
    streams = KeyedStreams(seed, MARTINGALE_TAG)
    reps = np.arange(replicates)
    xs = seq.sample_chunk(streams, np.arange(1, n + 1), reps).transpose(1, 0, 2, 3)
    vals = _martingale_values(f, xs, laws, bs)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    # the floor only absorbs rounding when every path gives the same value
    passed = abs(est - 1.0) <= max(3.0 * se, 1e-12)
    return MartingaleReport(f.id, 0, n, est, se, passed)


def martingale_exact(seq, chart, n, f=None):
    """E[M_n f] by enumerating every outcome sequence."""
    f = f or BumpFunction()
    laws, bs = _atomic_terms(seq, chart, n)
    grids = np.meshgrid(*[np.arange(len(law.probs)) for law in laws], indexing="ij")
    idx = [g.ravel() for g in grids]
    xs = np.stack([laws[p].atoms[idx[p]] for p in range(n)], axis=1)
    w = np.prod([laws[p].probs[idx[p]] for p in range(n)], axis=0)
    vals = _martingale_values(f, xs, laws, bs)
    return float(math.fsum(w * vals))
