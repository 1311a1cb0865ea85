"""Permutation pattern densities, permutons and the indecomposable density body."""

__version__ = "0.1.0"

from .compressive import CompressivePartition, enumerate_compressive, quotient
from .errors import (ContractViolation, InternalConsistencyError, ParseError, PermlabError,
                     SearchFailure, SizeLimitError)
from .fbullet import (FBulletParam, TesterConfig, build_oscillating_param, estimate_by_subsampling,
                      f_bullet, forcing_failure_experiment)
from .perm import (PatternCounts, Permutation, canonical_patterns, count_patterns, density,
                   density_hom, density_mon, dominates, enumerate_patterns, inversions,
                   is_indecomposable, is_simple, is_thorough, sample_uniform_statistics)
from .permuton import (DirectSum, Identity, MCEstimate, Permuton, Reverse, StepUp, Uniform,
                       density_dsum, density_exact, density_mc, density_mon_mc,
                       density_mon_permuton, density_stepup, from_json, pattern_frequencies,
                       sample_permutation, sample_points, to_json)
from .rng import DEFAULT_SEED
from .spectra import (BorsukPair, DensityVector, InteriorWitness, Jacobian, MonMatrix,
                      SpanningSystem, borsuk_pair_search, certify_interior_point, density_vector,
                      finite_difference_error, find_spanning_system, jacobian, mon_matrix,
                      numerical_jacobian, psi_map, transform_vector)
