"""Continuum Kawasaki dynamics toolkit.

Exact stochastic simulation of interacting hopping particles on a periodic
torus, correlation-function estimation, deterministic solvers for the
mean-field kinetic equation, analytic well-posedness certificates, and a
scaling harness that verifies the mean-field limit empirically.
"""

from .errors import (BoundViolation, BudgetError, ConfigError, GeometryError,
                     HorizonError, InvalidSpecError, KawasakiError,
                     NoDynamicsError, NumericError, StepSizeError)
from .fields import DensityField
from .kernels import (KernelSpec, PotentialSpec, ScaledFactors, alpha, c_phi,
                      mean_phi, sample_displacement)
from .torus import Torus
from .simulator import (Configuration, SimulationParams, Simulation, Trajectory,
                        detailed_balance_residual, gillespie_step,
                        interaction_energy, jump_rate, sample_poisson_initial,
                        sample_poisson_positions, simulate, simulate_ensemble,
                        total_pair_energy)
from .estimator import (CorrelationEstimate, SubPoissonReport,
                        estimate_correlations, estimate_density,
                        estimate_pair_correlation, lp_exponent,
                        radial_product_profile, sub_poisson_report)
from .kinetic import (BoundReport, KineticTrajectory, PicardResult, SolverConfig,
                      convolve, kinetic_rhs, monitor_bounds, picard_solve,
                      solve_kinetic, step_rk4, vlasov_first_order)
from .horizon import (HorizonReport, contraction_factor, existence_horizon,
                      find_T_for_q, horizon_report, op_norm_bound, t_star,
                      theta_of_t)
from .scaling import (ConvergenceReport, SweepResult, SweepSpec,
                      convergence_report, renormalize, run_sweep,
                      write_sweep_outputs)
from .gibbs import GibbsSampler, calibrate_activity

__version__ = "0.1.0"
