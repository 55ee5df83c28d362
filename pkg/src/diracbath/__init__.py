"""Quantum emitters coupled to a honeycomb lattice of bosonic modes.

The package splits along the method boundary: lattice/selfenergy hold
the finite-grid ground truth, specfun/resolvent the continuum analytic
continuation, dynamics the wavefunction propagation, and collective the
two-emitter spectral analysis.  The cli module wraps it all for batch
runs.
"""
__version__ = "0.1.0"

from .collective import (
    CollectivePoleResult,
    effective_coupling_matrix,
    markov_populations,
    solve_collective_pole,
)
from .dynamics import (
    EmitterSpec,
    LossModel,
    SingleExcitationState,
    apply_losses,
    bath_population_map,
    build_hamiltonian_action,
    evolve,
    evolve_two_emitters,
    initial_state,
)
from .lattice import BathModel
from .specfun import SheetId
from .resolvent import SpectralDecomposition, ce_resolvent, find_poles, markov_ce
from .selfenergy import (
    CollectiveIndex,
    SmallZExpansion,
    build_small_z_expansions,
    g_of_n,
    g_of_n_approx,
    g_pm,
    jab_markov_asymptotic,
    markov_pole,
    residue_r0,
    residue_subradiant_aa,
    sigma12_finite,
    sigma_e_closed,
    sigma_e_finite,
    sigma_e_near_zero,
)

__all__ = [
    "BathModel",
    "CollectiveIndex",
    "CollectivePoleResult",
    "EmitterSpec",
    "LossModel",
    "SheetId",
    "SingleExcitationState",
    "SmallZExpansion",
    "SpectralDecomposition",
    "apply_losses",
    "bath_population_map",
    "build_hamiltonian_action",
    "build_small_z_expansions",
    "ce_resolvent",
    "effective_coupling_matrix",
    "evolve",
    "evolve_two_emitters",
    "find_poles",
    "g_of_n",
    "g_of_n_approx",
    "g_pm",
    "initial_state",
    "jab_markov_asymptotic",
    "markov_ce",
    "markov_pole",
    "markov_populations",
    "residue_r0",
    "residue_subradiant_aa",
    "sigma12_finite",
    "sigma_e_closed",
    "sigma_e_finite",
    "sigma_e_near_zero",
    "solve_collective_pole",
]
