"""Embedded Gaussian random-matrix ensembles and q-Hermite spectral models."""

from .ensemble import EnsembleRunSpec, embed, embedding_plan, generate_member, sample_kbody
from .estimators import QHermiteDensity, SpectrumStandardizer
from .fock import BasisTable, OccupationState, OperatorString, enumerate_basis, enumerate_k_configs
from .observables import (
    WindowSpec,
    chi2_per_bin,
    density_run,
    diagonalize,
    quench_run,
    standardize,
    survival_mc,
    survival_theory,
    theory_bin_density,
    theory_density,
)
from .qfunc import moment_closed_form, q_hermite, weight_pdf
from .qparam import EnsembleKind, SystemSpec, q_begue, q_fegoe, q_fegue, q_for

__version__ = "0.1.0"
