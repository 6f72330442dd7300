"""Level-hitting times of a branching process with immigration in a varying
environment with geometric offspring laws."""

__version__ = "0.1.0"

from .environment import (
    EnvSpecError,
    Explicit,
    Homogeneous,
    PolyCritical,
    env_from_dict,
    env_from_json,
    mean_at,
    p_at,
)
from .exact import (
    ConditionalKernel,
    DTable,
    conditional_distribution,
    d_value,
    d_window,
    dependence_ratio,
    homogeneous_conditional,
    joint_level_probability,
    level_probability,
    return_probability,
    visit_count_moment,
    window_ratio,
)
from .combinatorics import composition_count, identity_l2, lemsa_sum
from .simulate import LevelHitRecord, SimulationConfig, run_ensemble, run_replication, step
from .analysis import classify, d_asymptotics, expected_count_profile, limit_law_check
