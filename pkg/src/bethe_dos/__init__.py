"""Strong-disorder expansion of the density of states of the Anderson model on the Bethe lattice."""

from .expansion import (
    DosValue,
    Expansion,
    ExpansionParams,
    M_n,
    RemainderBudget,
    dos_coefficient,
    dos_density,
    m_partial,
    remainder_budget,
    uniform_two_term,
)
from .oracle import MCConfig, MCEstimate, dense_green_oracle, mc_average, root_green_sample, subtree_green
from .stieltjes import (
    AnalyticWindow,
    GenericAnalyticLaw,
    UniformLaw,
    build_eta,
    s_continued,
    s_uniform_closed,
    s_upper,
    sk_bound,
    uniform_as_generic,
)
from .treewalk import (
    CoefficientTable,
    CountPolynomial,
    OccupationProfile,
    ball_size,
    brute_force_walks,
    count_closed_walks,
    enumerate_walk_classes,
    sphere_size,
    spectrum_window,
)

__version__ = "0.1.0"
