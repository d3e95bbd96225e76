"""Sequential approval with e-value tests: agent policies and optimal subsidies."""

from .config import ConfigError, PriorAtom, ProtocolConfig, load_config
from .core import BeliefState, DomainError, log_e_value, log_f, update_belief
from .mdp import ResourceError, SolvedPolicy, solve
from .mixture import MixtureSpec, QuadratureError, log_f_mix
from .rollout import RolloutBatch, RolloutConfig, exact_outcome, simulate, simulate_prior_mixture
from .subsidy import ConvexityError, SubsidySolution, optimize

__version__ = "0.1.0"
