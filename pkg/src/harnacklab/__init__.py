"""harnacklab: a desk-scale numerical laboratory for monotone stochastic
evolution equations.

Discretizes dX = A(X) dt + B dW on (0, 1) with Dirichlet boundary, steps it
with a split-step proximal (implicit Euler) scheme, builds the coupled copy
whose Girsanov density drives the dimension-free Harnack bound, and
verifies every computable claim: the Harnack inequality with its explicit
constant, coupling success, contraction and algebraic decay rates,
invariant-measure moments, and ergodicity rates.
"""

from .space import (DiscreteSpace, NormKind, H_NORM, v_norm, b_norm,
                    build_space, norm, embedding_constant)
from .drift import (DriftModel, MonotonicityReport, linear, reaction_diffusion,
                    p_laplace, high_order, signed_power, lemma31_gap,
                    apply_drift, potential, check_monotonicity)
from .noise import (NoiseModel, WienerIncrement, build_noise, sample_increment,
                    sample_increments, apply_b, apply_b_inverse, xi_constant,
                    certified_xi)
from .integrator import (SdeProblem, Trajectory, ProximalSolveError,
                         make_problem, proximal_solve, simulate,
                         simulate_ensemble, deterministic_flow)
from .coupling import (CouplingParams, CouplingRecord, CouplingEnsemble,
                       make_params, simulate_coupled, simulate_coupled_ensemble,
                       girsanov_moment, verify_weighted_law)
from .analysis import (StateFunction, TEST_FUNCTIONS, ScalarOU, HarnackReport,
                       RateFit, harnack_constant, harnack_constant_quadrature,
                       ou_harnack_anchor, verify_harnack, solve_comparison_ode,
                       fit_decay, fit_contraction, estimate_invariant,
                       fit_ergodic_rate, density_bound, ultrabound_profile)

__version__ = "0.1.0"
