"""Day-ahead distribution-market auction engine.

Clears a welfare-maximizing unit-commitment MILP for a distribution
territory (generators, storage, fixed and price-responsive loads, upstream
supply at the wholesale price), prices every bus-hour with the dual of its
energy-balance constraint, and settles all participants at those prices.
"""

from .branch_bound import (BbConfig, MilpSolution, enumerate_oracle,
                           solve_milp)
from .model import (ConstraintRow, MilpModel, RowTag, VariableIndex, VarKey,
                    build_model, fix_binaries, model_to_lp, replay_violations,
                    row_lookup, simulate_counters, write_lp_text)
from .pricing import (DlmpReport, PropertyReport, Settlement,
                      check_market_properties, compute_dlmp, settle)
from .scenario import (BssSpec, BusData, GeneratorSpec, GenSegment,
                       LoadSegment, LoadSpec, Scenario, ScenarioParseError,
                       ScenarioValidationError, Violation, WsmCommitment,
                       bundled_scenario_path, load_scenario, save_scenario,
                       scale_lmp, validate_scenario, with_gamma)
from .simplex import (LpProblem, LpResult, SimplexBasis, make_problem,
                      solve_lp, solve_lp_warm)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
