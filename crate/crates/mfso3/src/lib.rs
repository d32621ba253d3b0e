//! Matrix Fisher distributions on the rotation group SO(3), and Bayesian
//! attitude estimators built on them.
//!
//! The library provides:
//!
//! - exact 3x3 rotation primitives: hat/vee, exponential/logarithm, proper
//!   singular value decomposition, quaternion conversion ([`so3`]);
//! - modified Bessel functions of the first kind and Gauss-Legendre
//!   quadrature ([`special`]);
//! - the matrix Fisher distribution itself: density, normalizing constant
//!   and its derivatives, moments, mean attitude, cumulative distribution,
//!   per-axis marginal densities on the sphere, and exact sampling
//!   ([`matrix_fisher`]), together with the von Mises-Fisher distribution
//!   on the sphere used by direction sensors ([`vmf`]);
//! - maximum-likelihood / moment-matching recovery of the matrix parameter
//!   ([`fitting`]);
//! - two Bayesian attitude filters sharing an exact conjugate measurement
//!   update: first-order moment propagation and an unscented transform on
//!   SO(3) ([`estimator`]);
//! - a rigid-body pendulum simulator and sensor models for end-to-end
//!   estimation scenarios ([`simulation`]).
//!
//! All distributions are immutable after construction and safe to share
//! across threads. Samplers take a caller-owned random source.

pub mod error;
pub mod estimator;
pub mod fitting;
pub mod io;
pub mod matrix_fisher;
pub mod simulation;
pub mod so3;
pub mod special;
pub mod vmf;

pub use error::Error;
pub use estimator::{
    correct, inverse_unscented, propagate_first_order, propagate_unscented, run_filter,
    unscented_transform, AttitudeSensor, EstimationRun, FilterMode, FilterState, GyroModel,
    MeasurementEvent, UnscentedSet,
};
pub use fitting::{fit_from_moment, fit_from_samples, newton_solve, FitResult, MomentFitProblem};
pub use matrix_fisher::{cumulative_isotropic, MatrixFisher, NormalizingInfo};
pub use simulation::{
    run_scenario, simulate_attitude_measurement, simulate_gyro, simulate_truth, PendulumConfig,
    ScenarioConfig, ScenarioOutput, ScenarioSummary,
};
pub use so3::{
    exp_so3, hat, log_so3, proper_svd, sample_uniform, vee, Matrix3, ProperSvd, Quaternion,
    Rotation, Vector3,
};
pub use special::{bessel_i0, bessel_i0_scaled, bessel_i1, bessel_i1_scaled, QuadratureRule};
pub use vmf::VonMisesFisherS2;
