"""Finite-state uniqueness theory for invariant measures of Markov kernels."""

from .errors import CertificateError, ErgokitError, InputError
from .examples import (
    FatCantorSpec,
    TwoPointMapSpec,
    build_block_kernel,
    build_fat_cantor_kernel,
    build_two_point_map_kernel,
)
from .invariant import (
    ergodic_decomposition,
    ergodic_measures,
    ergodicity_check,
    is_invariant,
    lemma1_density,
    singular_pair,
    stationary_on_class,
    uniqueness_certificate,
)
from .kernel import (
    ProbMeasure,
    ResolventParams,
    StateFunction,
    StateSet,
    StochasticKernel,
    apply_left,
    apply_right,
    cesaro_average,
    power,
    resolvent,
    validate_kernel,
)
from .simulate import (
    cesaro_tv_curve,
    doeblin_rate_check,
    duflo_check,
    occupation_measure,
    sample_path,
    tv_distance,
)
from .structure import (
    class_decomposition,
    indecomposability_certificate,
    is_absorbing,
    largest_absorbing_subset,
    support_digraph,
    theorem_witness_pair,
)

__version__ = "0.1.0"
