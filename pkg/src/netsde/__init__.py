"""Influence prediction on propagation networks by numerically solving jump SDEs."""
__version__ = "0.1.0"

from .network import (GeneratorConfig, NetworkError, PropagationNetwork, build_network, generate,
                      generate_erdos_renyi, generate_scale_free, generate_small_world, random_sources,
                      read_network, read_sources, write_network, write_sources)
from .sampling import (ComplexityConstants, EvaluationFunctional, InfluenceEstimate, SamplePlan,
                       antithetic_poisson_pair, estimate_constants, plan_h_L, poisson_inverse_cdf,
                       run_estimator)
from .sde import (EventList, JumpIncrements, Trajectory, coeff_b, euler_step, jump_adapted_replay,
                  simulate_trajectory, taylor2_step)
from .baselines import (CascadeRecord, empirical_marginals, gillespie_simulate, meanfield_solve,
                        monte_carlo_marginals)
from .ratemodel import (AugmentedState, Constant, NetworkRates, Throttled, Weibull, edge_intensity,
                        sde_simulate_time_varying, thinning_simulate)
from .experiments import convergence_study, error_curves, predict, robustness_sweep, vr_study
