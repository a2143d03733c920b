"""Worst-case (minimax) control of finite partially observed systems.

Exact DPs over memories and conditional ranges, a quantized approximate DP
with measured and formula-based error ledgers, and tools to evaluate and
simulate the resulting strategies.
"""

from .approx import (
    ApproxState,
    BoundLedger,
    QuantizationScheme,
    alpha_recursion,
    build_quantizer,
    check_value_bounds,
    measured_bounds,
    quantize_range,
    solve_approx_dp,
    theoretical_bounds,
    uniform_scheme,
)
from .additive import augment_additive
from .exact import (
    CapacityError,
    check_theorem1,
    feasible_observations,
    initial_range,
    range_update,
    solve_infostate_dp,
    solve_memory_dp,
    verify_information_state,
)
from .gridworld import GridworldConfig, build_gridworld
from .model import MemoryNode, SystemModel, load_model, save_model, validate
from .ranges import FiniteSpace, hausdorff, lipschitz_constant, shortest_path_metric
from .rollout import compare_policies, evaluate_policy_worstcase, simulate

__version__ = "0.1.0"
