"""Almost-sure convergence of products of independent random matrices."""
from .charts import ChartKind, ChartSpec, coordinates, contains, phi, phi_inv
from .classical import ScalarLaw, ScalarSequence, classical_reduce, kolmogorov
from .group import displacement, inverse, mat_exp, mat_log, multiply
from .laws import (
    AtomicDiscrete,
    Constant,
    ExpGaussian,
    GaussianPerturbation,
    HaarFiniteSubgroup,
    LawSequence,
    PowerDecay,
    Table,
    TermStats,
    UniformBallPerturbation,
    g3_equivalent_form,
    sample,
    term_stats,
    truncated_mean,
)
from .scenarios import ScenarioConfig, builtin, builtin_names
from .simulator import (
    BumpFunction,
    as_convergence_test,
    decompose,
    martingale_check,
    martingale_exact,
    simulate_paths,
)
from .three_series import Policy, SeriesReport, Status, evaluate, g2_partial_products

__version__ = "0.1.0"
