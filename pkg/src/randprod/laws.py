"""Distributions of the factors x_n and their per-term statistics.

A :class:`LawTerm` describes the law of one factor. A :class:`LawSequence`
maps ``n -> LawTerm``; the common case is a base law whose perturbation is
scaled by a rate (constant, power decay ``n**-q`` or an explicit table).

Every law samples from a fixed number of uniforms per draw, so the draw for
``(seed, tag, n, path)`` never depends on other keys.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import charts, rng
from .group import DomainError, as_element, frobenius, is_invertible, mat_exp
from .special import chi2_moment, gammainc_lower, gammainc_upper

MAX_RETRIES = 8
PROB_TOL = 1e-12
CLOSURE_TOL = 1e-9
MIN_MC_BUDGET = 100


class LawError(ValueError):
    pass


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TermStats:
    """Per-term inputs of the three series.

    ``p_out`` is P(x outside U), ``m`` the truncated coordinate mean
    E[phi(x) 1_U], ``s2`` = E||phi(x) 1_U - m||^2.
    """

    p_out: float
    m: np.ndarray
    s2: float
    exact: bool
    se_p: Optional[float] = None
    se_m: Optional[float] = None
    se_s2: Optional[float] = None

    def as_dict(self):
        return {
            "p_out": self.p_out,
            "m": self.m.tolist(),
            "s2": self.s2,
            "exact": self.exact,
            "se_p": self.se_p,
            "se_m": self.se_m,
            "se_s2": self.se_s2,
        }


# -- radial laws of the perturbation norm --------------------------------


@dataclass(frozen=True)
class ChiRadial:
    """t = sigma * chi_d (norm of a d-vector of N(0, sigma^2) entries)."""

    sigma: float
    d: int
    sup: float = math.inf

    def moment(self, j):
        return self.sigma**j * chi2_moment(j / 2.0, self.d)

    def partial(self, j, u):
        if u <= 0:
            return 0.0
        if math.isinf(u):
            return self.moment(j)
        return self.moment(j) * gammainc_lower((self.d + j) / 2.0, u * u / (2.0 * self.sigma**2))

    def tail(self, u):
        if u <= 0:
            return 1.0
        if math.isinf(u):
            return 0.0
        return gammainc_upper(self.d / 2.0, u * u / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class BallRadial:
    """t = rho * U**(1/d) (norm of a uniform point in the d-ball of radius rho)."""

    rho: float
    d: int

    @property
    def sup(self):
        return self.rho

    def moment(self, j):
        return self.d / (self.d + j) * self.rho**j

    def partial(self, j, u):
        u = min(max(u, 0.0), self.rho)
        return self.d / (self.d + j) * u ** (self.d + j) / self.rho**self.d

    def tail(self, u):
        u = min(max(u, 0.0), self.rho)
        return 1.0 - (u / self.rho) ** self.d


@dataclass(frozen=True, eq=False)
class AtomRadial:
    norms: np.ndarray
    probs: np.ndarray

    @property
    def sup(self):
        return float(self.norms.max())

    def moment(self, j):
        return float(np.sum(self.probs * self.norms**j))

    def partial(self, j, u):
        sel = self.norms <= u
        return float(np.sum(self.probs[sel] * self.norms[sel] ** j))

    def tail(self, u):
        return float(np.sum(self.probs[self.norms > u]))


# -- law terms ------------------------------------------------------------


class LawTerm:
    """Base class. Subclasses set ``dim``, ``geometry`` and ``n_uniforms``.

    ``geometry`` is ``"additive"`` for x = I + y and ``"exponential"`` for
    x = exp(y); ``radial()`` is the law of ||y||_F.
    """

    geometry = "additive"
    symmetric = False
    may_be_singular = False
    n_uniforms = 2

    def from_uniforms(self, u, scale=1.0):
        raise NotImplementedError

    def scaled(self, s):
        raise NotImplementedError

    def radial(self):
        raise NotImplementedError

    def mean_perturbation(self):
        """E[y]."""
        return np.zeros((self.dim, self.dim))

    def second_moment(self):
        """E||y||^2."""
        return self.radial().moment(2)

    def exact_stats(self, chart):
        """Exact TermStats under ``chart``, or None when only Monte-Carlo applies."""
        return None

    def exact_stats_scaled(self, chart, scales):
        """Exact (p_out, m, s2) arrays for the laws ``scaled(s)``, s in ``scales``."""
        rows = [self.scaled(float(s)).exact_stats(chart) for s in scales]
        if any(r is None for r in rows):
            return None
        return (
            np.array([r.p_out for r in rows]),
            np.array([r.m for r in rows]),
            np.array([r.s2 for r in rows]),
        )

    def is_exact(self, chart):
        return self.exact_stats(chart) is not None

    def sample(self, stream):
        """One draw from an exclusive :class:`~randprod.rng.Stream`."""
        for _ in range(MAX_RETRIES + 1):
            x = self.from_uniforms(stream.uniform(self.n_uniforms))
            if not self.may_be_singular or is_invertible(x):
                return x
        raise SamplerError(f"{type(self).__name__}: no invertible draw after {MAX_RETRIES} retries")


def _gaussian_closed_form(sigma, d, r):
    """p_out, s2 for ||y||^2 / sigma^2 ~ chi^2_d truncated at radius r."""
    x = r * r / (2.0 * np.asarray(sigma, float) ** 2)
    p_out = gammainc_upper(d / 2.0, x)
    s2 = d * np.asarray(sigma, float) ** 2 * gammainc_lower(d / 2.0 + 1.0, x)
    return p_out, s2


class _GaussianBase(LawTerm):
    symmetric = True

    def __init__(self, sigma, dim):
        if not sigma > 0 or not math.isfinite(sigma):
            raise LawError(f"sigma must be positive, got {sigma}")
        if int(dim) != dim or dim < 1:
            raise LawError(f"dimension must be a positive integer, got {dim}")
        self.sigma = float(sigma)
        self.dim = int(dim)
        self.n_uniforms = rng.normal_uniform_count(self.dim**2)

    def __repr__(self):
        return f"{type(self).__name__}(sigma={self.sigma!r}, dim={self.dim})"

    def __eq__(self, other):
        return type(self) is type(other) and (self.sigma, self.dim) == (other.sigma, other.dim)

    def __hash__(self):
        return hash((type(self).__name__, self.sigma, self.dim))

    def scaled(self, s):
        return type(self)(self.sigma * s, self.dim)

    def radial(self):
        return ChiRadial(self.sigma, self.dim**2)

    def _perturbation(self, u, scale):
        d = self.dim**2
        z = rng.uniforms_to_normals(u)[..., :d]
        sig = self.sigma * np.asarray(scale, float)[..., None]
        return (sig * z).reshape(z.shape[:-1] + (self.dim, self.dim))

    def _closed(self, chart, scales):
        d = self.dim**2
        sig = self.sigma * np.asarray(scales, float)
        p_out, s2 = _gaussian_closed_form(sig, d, chart.r)
        m = np.zeros(sig.shape + (self.dim, self.dim))
        return np.atleast_1d(p_out), m, np.atleast_1d(s2)


class GaussianPerturbation(_GaussianBase):
    """x = I + y with i.i.d. N(0, sigma^2) entries."""

    may_be_singular = True

    def from_uniforms(self, u, scale=1.0):
        return np.eye(self.dim) + self._perturbation(u, scale)

    def exact_stats(self, chart):
        if chart.kind is not charts.ChartKind.AFFINE:
            return None
        p, m, s2 = self._closed(chart, [1.0])
        return TermStats(float(p[0]), m[0], float(s2[0]), True)

    def exact_stats_scaled(self, chart, scales):
        if chart.kind is not charts.ChartKind.AFFINE:
            return None
        return self._closed(chart, scales)


class ExpGaussian(_GaussianBase):
    """x = exp(y) with i.i.d. N(0, sigma^2) entries.

    Under the exponential chart phi(x) = y, so the Gaussian closed forms
    apply in y. This ignores draws with ||y||_F >= pi, where the principal
    logarithm no longer returns y; their probability is below
    P(chi^2_d > pi^2 / sigma^2).
    """

    geometry = "exponential"

    def from_uniforms(self, u, scale=1.0):
        return mat_exp(self._perturbation(u, scale))

    def exact_stats(self, chart):
        if chart.kind is not charts.ChartKind.EXPONENTIAL:
            return None
        p, m, s2 = self._closed(chart, [1.0])
        return TermStats(float(p[0]), m[0], float(s2[0]), True)

    def exact_stats_scaled(self, chart, scales):
        if chart.kind is not charts.ChartKind.EXPONENTIAL:
            return None
        return self._closed(chart, scales)


class UniformBallPerturbation(LawTerm):
    """x = I + y with y uniform on the Frobenius ball of radius rho < 1."""

    symmetric = True

    def __init__(self, rho, dim):
        if not 0.0 < rho < 1.0:
            raise LawError(f"rho must lie in (0, 1), got {rho}")
        if int(dim) != dim or dim < 1:
            raise LawError(f"dimension must be a positive integer, got {dim}")
        self.rho = float(rho)
        self.dim = int(dim)
        self.n_uniforms = rng.normal_uniform_count(self.dim**2) + 2

    def __repr__(self):
        return f"UniformBallPerturbation(rho={self.rho!r}, dim={self.dim})"

    def __eq__(self, other):
        return type(self) is type(other) and (self.rho, self.dim) == (other.rho, other.dim)

    def __hash__(self):
        return hash(("ball", self.rho, self.dim))

    def scaled(self, s):
        return UniformBallPerturbation(self.rho * s, self.dim)

    def radial(self):
        return BallRadial(self.rho, self.dim**2)

    def from_uniforms(self, u, scale=1.0):
        d = self.dim**2
        z = rng.uniforms_to_normals(u[..., :-2])[..., :d]
        direction = z / np.linalg.norm(z, axis=-1, keepdims=True)
        radius = self.rho * np.asarray(scale, float) * u[..., -1] ** (1.0 / d)
        y = (radius[..., None] * direction).reshape(z.shape[:-1] + (self.dim, self.dim))
        return np.eye(self.dim) + y

    def _closed(self, chart, scales):
        d = self.dim**2
        rho = self.rho * np.atleast_1d(np.asarray(scales, float))
        inner = np.minimum(chart.r, rho)
        p_out = 1.0 - (inner / rho) ** d
        s2 = d / (d + 2.0) * inner ** (d + 2) / rho**d
        return p_out, np.zeros(rho.shape + (self.dim, self.dim)), s2

    def exact_stats(self, chart):
        if chart.kind is not charts.ChartKind.AFFINE:
            return None
        p, m, s2 = self._closed(chart, [1.0])
        return TermStats(float(p[0]), m[0], float(s2[0]), True)

    def exact_stats_scaled(self, chart, scales):
        if chart.kind is not charts.ChartKind.AFFINE:
            return None
        return self._closed(chart, scales)


def _is_symmetric_atoms(perts, probs):
    flat = perts.reshape(len(perts), -1)
    used = np.zeros(len(perts), dtype=bool)
    for i in range(len(perts)):
        if used[i]:
            continue
        match = np.flatnonzero(
            ~used & np.all(flat == -flat[i], axis=1) & (probs == probs[i])
        )
        match = match[match != i] if np.any(flat[i] != 0) else np.array([i])
        if match.size == 0:
            return False
        used[i] = used[match[0]] = True
    return True


class AtomicDiscrete(LawTerm):
    """Finitely many atoms with positive probabilities summing to one."""

    def __init__(self, atoms, probs):
        atoms = as_element(np.asarray(atoms, dtype=float))
        if atoms.ndim != 3:
            raise LawError("atoms must be a list of square matrices")
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (atoms.shape[0],):
            raise LawError("need exactly one probability per atom")
        if np.any(probs <= 0):
            raise LawError("atom probabilities must be positive")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise LawError(f"atom probabilities sum to {probs.sum()!r}, not 1")
        self.atoms = atoms
        self.probs = probs
        self.dim = atoms.shape[-1]
        self._cum = np.cumsum(probs)
        self._perts = atoms - np.eye(self.dim)
        self.symmetric = _is_symmetric_atoms(self._perts, probs)

    def __repr__(self):
        return f"{type(self).__name__}(atoms={self.atoms.tolist()}, probs={self.probs.tolist()})"

    @property
    def perturbations(self):
        return self._perts

    def is_square_zero(self):
        """True when every perturbation y satisfies y @ y = 0 (log(I + y) = y)."""
        sq = np.matmul(self._perts, self._perts)
        return bool(np.all(np.abs(sq) <= 1e-15 * (1.0 + frobenius(self._perts)[:, None, None] ** 2)))

    def scaled(self, s):
        if s == 1.0:
            return self
        atoms = np.eye(self.dim) + s * self._perts
        if not np.all(is_invertible(atoms)):
            raise LawError(f"scaling by {s} makes an atom singular")
        return AtomicDiscrete(atoms, self.probs)

    def radial(self):
        return AtomRadial(frobenius(self._perts), self.probs)

    def mean_perturbation(self):
        return np.tensordot(self.probs, self._perts, axes=1)

    def spread(self):
        """E||y - E y||^2."""
        dev = self._perts - self.mean_perturbation()
        return float(np.sum(self.probs * frobenius(dev) ** 2))

    def scaled_atoms(self, scales):
        scales = np.asarray(scales, float)
        return np.eye(self.dim) + scales[..., None, None, None] * self._perts

    def from_uniforms(self, u, scale=1.0):
        idx = np.searchsorted(self._cum, u[..., 0], side="right")
        idx = np.minimum(idx, len(self.probs) - 1)
        scale = np.asarray(scale, float)
        return np.eye(self.dim) + scale[..., None, None] * self._perts[idx]

    def _enumerate(self, chart, atoms):
        inside, coords = charts.coordinates(chart, atoms)
        w = self.probs
        p_out = np.sum(w * ~inside, axis=-1)
        m = np.einsum("a,...aij->...ij", w, coords)
        dev = coords - m[..., None, :, :]
        s2 = np.einsum("a,...a->...", w, np.sum(dev * dev, axis=(-2, -1)))
        return p_out, m, s2

    def exact_stats(self, chart):
        if chart.dim != self.dim:
            raise LawError("chart and law dimensions differ")
        p_out, m, s2 = self._enumerate(chart, self.atoms)
        return TermStats(float(p_out), m, float(s2), True)

    def exact_stats_scaled(self, chart, scales):
        return self._enumerate(chart, self.scaled_atoms(scales))


class HaarFiniteSubgroup(AtomicDiscrete):
    """Uniform (normalised Haar) law on a finite matrix subgroup."""

    def __init__(self, elements):
        elements = np.asarray(elements, dtype=float)
        super().__init__(elements, np.full(len(elements), 1.0 / len(elements)))
        self._check_closed()

    def _index_of(self, g):
        dist = frobenius(self.atoms - g)
        i = int(np.argmin(dist))
        return i if dist[i] <= CLOSURE_TOL else None

    def _check_closed(self):
        if self._index_of(np.eye(self.dim)) is None:
            raise LawError("subgroup must contain the identity")
        for a in self.atoms:
            if self._index_of(np.linalg.inv(a)) is None:
                raise LawError("element list is not closed under inverse")
            for b in self.atoms:
                if self._index_of(a @ b) is None:
                    raise LawError("element list is not closed under multiplication")

    @classmethod
    def cyclic_rotations(cls, order):
        """C_order acting on R^2 by rotations through multiples of 2 pi / order."""
        from .group import rotation

        mats = [rotation(2 * math.pi * j / order) for j in range(order)]
        # exact entries for the quarter turns
        mats = [np.where(np.abs(m) < 1e-15, 0.0, m) for m in mats]
        return cls(mats)

    def scaled(self, s):
        if s != 1.0:
            raise LawError("a Haar law cannot be rescaled")
        return self


# -- sequences ------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    kind = "constant"
    tail_start = 1

    def scale(self, n):
        return np.ones(np.shape(n))


@dataclass(frozen=True)
class PowerDecay:
    """Perturbation scale n**-q."""

    q: float
    kind = "power"
    tail_start = 1

    def __post_init__(self):
        if not self.q > 0:
            raise LawError(f"power-decay exponent must be positive, got {self.q}")

    def scale(self, n):
        return np.asarray(n, float) ** -self.q


@dataclass(frozen=True)
class Table:
    """Explicit per-n scales; indices past the table reuse the last entry."""

    values: tuple
    kind = "table"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals or any(v <= 0 or not math.isfinite(v) for v in vals):
            raise LawError("table entries must be positive and finite")
        object.__setattr__(self, "values", vals)

    @property
    def tail_start(self):
        return len(self.values)

    def scale(self, n):
        idx = np.minimum(np.asarray(n, dtype=np.int64), len(self.values)) - 1
        return np.asarray(self.values)[idx]


@dataclass(frozen=True)
class LawSequence:
    """Independent factors x_n, either ``base`` scaled by ``rate`` or an
    arbitrary ``generator(n) -> LawTerm``.

    ``declared_envelope = (C, alpha)`` asserts P(x_n outside U) and the
    centred second moment are both <= C n**-alpha.
    """

    base: Optional[LawTerm] = None
    rate: object = field(default_factory=Constant)
    generator: Optional[Callable[[int], LawTerm]] = None
    declared_envelope: Optional[tuple] = None
    horizon_hint: int = 1000
    dim_hint: Optional[int] = None

    def __post_init__(self):
        if (self.base is None) == (self.generator is None):
            raise LawError("give exactly one of base or generator")
        if self.declared_envelope is not None:
            c, alpha = self.declared_envelope
            if not c > 0:
                raise LawError("envelope constant must be positive")
            object.__setattr__(self, "declared_envelope", (float(c), float(alpha)))

    @classmethod
    def from_generator(cls, generator, dim, **kwargs):
        return cls(generator=generator, dim_hint=dim, **kwargs)

    @property
    def dim(self):
        if self.base is not None:
            return self.base.dim
        return self.dim_hint if self.dim_hint is not None else self.generator(1).dim

    @property
    def is_scaled(self):
        return self.base is not None

    def term(self, n):
        if n < 1:
            raise LawError("sequence indices start at 1")
        if self.base is not None:
            return self.base.scaled(float(self.rate.scale(n)))
        return self.generator(n)

    def scales(self, ns):
        return self.rate.scale(np.asarray(ns))

    def _draw(self, streams, ns, paths, offset=0):
        """Draws for flat key arrays ``ns``, ``paths`` (same length)."""
        if self.base is not None:
            law = self.base
            if isinstance(law, AtomicDiscrete) and not isinstance(law, HaarFiniteSubgroup):
                uniq = np.unique(ns)
                if not np.all(is_invertible(law.scaled_atoms(self.scales(uniq)))):
                    raise SamplerError("a scaled atom is singular")
            u = streams.uniform(ns, paths, law.n_uniforms, offset=offset * law.n_uniforms)
            return law.from_uniforms(u, scale=self.scales(ns))
        out = np.empty((len(ns), self.dim, self.dim))
        for n in np.unique(ns):
            sel = ns == n
            law = self.generator(int(n))
            u = streams.uniform(n, paths[sel], law.n_uniforms, offset=offset * law.n_uniforms)
            out[sel] = law.from_uniforms(u)
        return out

    def _may_be_singular(self, ns):
        if self.base is not None:
            return self.base.may_be_singular
        return any(self.generator(int(n)).may_be_singular for n in np.unique(ns))

    def draw_keys(self, streams, ns, paths):
        """Draws for flat key arrays, redrawing tolerance-singular ones."""
        ns = np.asarray(ns, dtype=np.int64).ravel()
        paths = np.asarray(paths, dtype=np.int64).ravel()
        xs = self._draw(streams, ns, paths)
        if not self._may_be_singular(ns):
            return xs
        bad = np.flatnonzero(~is_invertible(xs))
        for attempt in range(1, MAX_RETRIES + 1):
            if bad.size == 0:
                return xs
            xs[bad] = self._draw(streams, ns[bad], paths[bad], offset=attempt)
            bad = bad[~is_invertible(xs[bad])]
        if bad.size:
            i = bad[0]
            raise SamplerError(
                f"no invertible draw after {MAX_RETRIES} retries at n={ns[i]}, path={paths[i]}"
            )
        return xs

    def sample_chunk(self, streams, ns, paths):
        """Draws for every (n, path) pair; shape (len(ns), len(paths), k, k)."""
        ns = np.asarray(ns, dtype=np.int64)
        paths = np.asarray(paths, dtype=np.int64)
        nn, pp = np.meshgrid(ns, paths, indexing="ij")
        xs = self.draw_keys(streams, nn, pp)
        return xs.reshape(len(ns), len(paths), self.dim, self.dim)


# -- statistics -----------------------------------------------------------


def sample(law, stream):
    return law.sample(stream)


def monte_carlo_stats(law, chart, budget, seed=0, n=0):
    """TermStats from ``budget`` keyed draws (tag ``"term-stats"``, index n)."""
    if budget < MIN_MC_BUDGET:
        raise LawError(f"Monte-Carlo budget must be at least {MIN_MC_BUDGET}, got {budget}")
    streams = rng.KeyedStreams(seed, "term-stats")
    seq = LawSequence(generator=lambda _n: law, dim_hint=law.dim)
    xs = seq.draw_keys(streams, np.full(budget, n), np.arange(budget))
    inside, coords = charts.coordinates(chart, xs)
    b = float(budget)
    p_out = float(np.mean(~inside))
    m = coords.mean(axis=0)
    dev2 = np.sum((coords - m) ** 2, axis=(-2, -1))
    s2 = float(dev2.sum() / (b - 1.0))
    se_m = float(np.sqrt(np.sum(coords.var(axis=0, ddof=1)) / b))
    return TermStats(
        p_out,
        m,
        s2,
        False,
        se_p=math.sqrt(max(p_out * (1.0 - p_out), 0.0) / b),
        se_m=se_m,
        se_s2=float(dev2.std(ddof=1) / math.sqrt(b)),
    )


def term_stats(law, chart, budget=10_000, seed=0, n=0):
    """Exact statistics where a closed form or enumeration exists, else Monte-Carlo."""
    if chart.dim != law.dim:
        raise LawError(f"chart is for k={chart.dim}, law for k={law.dim}")
    exact = law.exact_stats(chart)
    if exact is not None:
        return exact
    return monte_carlo_stats(law, chart, budget, seed=seed, n=n)


def truncated_mean(law, chart, budget=10_000, seed=0, n=0):
    """The U-truncated mean b with phi(b) = E[phi(x) 1_U]."""
    return charts.phi_inv(chart, term_stats(law, chart, budget, seed=seed, n=n).m)


def g3_equivalent_form(stats):
    """E[||phi(x) - m||^2 1_U] = s2 - ||m||^2 p_out for exact stats."""
    if not stats.exact:
        raise LawError("the equivalent form needs exact statistics")
    value = stats.s2 - float(np.sum(stats.m**2)) * stats.p_out
    if value < -1e-12:
        raise LawError(f"inconsistent statistics: equivalent G3 term {value!r} < 0")
    return max(value, 0.0)


def truncated_second_moment(law, chart):
    """E[||phi(x) - m||^2 1_U] computed directly (exact laws only)."""
    if isinstance(law, AtomicDiscrete):
        inside, coords = charts.coordinates(chart, law.atoms)
        m = np.tensordot(law.probs, coords, axes=1)
        dev = frobenius(coords - m) ** 2
        return float(np.sum(law.probs * dev * inside))
    stats = law.exact_stats(chart)
    if stats is None:
        raise LawError("law has no exact statistics under this chart")
    # symmetric continuous laws: m = 0, so the in-U part is all of s2
    return stats.s2


__all__ = [
    "AtomicDiscrete",
    "Constant",
    "DomainError",
    "ExpGaussian",
    "GaussianPerturbation",
    "HaarFiniteSubgroup",
    "LawError",
    "LawSequence",
    "LawTerm",
    "PowerDecay",
    "SamplerError",
    "Table",
    "TermStats",
    "UniformBallPerturbation",
    "g3_equivalent_form",
    "monte_carlo_stats",
    "sample",
    "term_stats",
    "truncated_mean",
]
