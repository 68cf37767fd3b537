"""Subwavelength dimer chains: band gaps, dislocations and mid-gap frequencies.

Leading-order (dilute, high-contrast) capacitance model of a one-dimensional
chain of resonator dimers, its band structure, the mid-gap frequencies
created by a dislocation, and finite-array robustness experiments.
"""

from .errors import (
    BranchAmbiguityError,
    ConvergenceError,
    DimerChainError,
    DomainError,
    NoMidGapError,
    OutOfGapError,
    OverlapError,
    PoleError,
    SingularityError,
)
from .geometry import ChainParams, FiniteChain, build_finite_chain, make_rng, perturb_chain
from .capacitance import finite_capacitance, quasi_capacitance, quasi_eigen
from .spectra import (
    band_gap,
    band_structure,
    decay_rate,
    finite_spectrum,
    freq_from_lambda,
    trimer_eigenvalues,
)
from .dislocation import (
    appendix_b_diagnostics,
    midgap_integrals,
    midgap_interval,
    omega_infinity,
    solve_midgap_removed,
    solve_midgap_unit,
    toeplitz_blocks,
)
from .stability import dislocation_sweep, min_variance_scan, stability_experiment

__version__ = "0.1.0"
