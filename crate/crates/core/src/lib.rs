//! Learning-rate drop scheduling driven by the angular velocity of model
//! parameters.
//!
//! The crate is organised around the pieces of the method:
//!
//! * [`angular_velocity`]: angle between consecutive parameter steps.
//! * [`noisy_quadratic`]: the noisy quadratic model, its descent chain and
//!   the closed-form steady state of step angles.
//! * [`unified_momentum`]: heavy-ball / Nesterov / plain descent under one
//!   update rule, piecewise schedules and their drop-gap constraints.
//! * [`autodrop`]: the epoch-level drop scheduler and its iteration-level
//!   variant on the quadratic model.
//! * [`velocity_model`]: the analytic velocity curve and the idealized
//!   derivative-threshold scheduler built on it.
//! * [`trainer`]: a small perceptron on synthetic blobs that runs the
//!   scheduler end to end.

pub mod angular_velocity;
pub mod autodrop;
pub mod error;
pub mod noisy_quadratic;
pub mod params;
pub mod trainer;
pub mod unified_momentum;
pub mod velocity_model;

pub use angular_velocity::{angle_between, AngleDegrees, VelocityTracker};
pub use autodrop::nqm::{autodrop_nqm_experiment, NqmAutoDropConfig, NqmAutoDropRun};
pub use autodrop::{AutoDrop, AutoDropConfig, AutoDropSnapshot, EpochDecision};
pub use error::{LabError, Result};
pub use noisy_quadratic::{
    nqm_empirical_limits, nqm_loss, nqm_oracle, nqm_step, CurvePoint, EmpiricalLimits, NqmConfig,
    NqmOracle, NqmProblem, NqmState,
};
pub use params::{seeded_rng, LabRng, ParamVector};
pub use unified_momentum::{
    run_um, um_step, validate_schedule, DecayLaw, GradientOracle, PiecewiseSchedule,
    ScheduleReport, UmConfig, UmRecord, UmState,
};
pub use velocity_model::{
    drop_gap, lemma1_bounds, simulate_algorithm2, ApproxDropConfig, DropGap, PhasePlan,
    VelocityModelParams,
};
