//! Finite-dimensional controller synthesis for the unstable block.

mod actuators;
mod companion;
mod controllability;
mod null_control;
mod transform;

pub use actuators::{default_actuators, randomized_actuators, ActuatorSet, MAX_SEARCH_ATTEMPTS};
pub use companion::{build_companion, companion_from_modes, CompanionSystem};
pub use controllability::{
    gramian_ratio, kalman_observability_check, kalman_rank, rank_conditions, RankReport, SliceRank,
    GRAMIAN_REL_TOL, RANK_REL_TOL,
};
pub use null_control::{
    min_energy_control, min_energy_control_on, ode_residual, recover_v, simulate_companion,
    steer_modal_state, NullControl, DEFAULT_INTERVALS, MAX_GRAMIAN_COND,
};
pub use transform::{
    transform_and_group, transform_system, EigenCluster, TransformedSystem, CLUSTER_REL_TOL,
    MAX_TRANSFORM_COND,
};
