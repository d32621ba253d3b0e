//! Bayesian attitude estimators on SO(3).
//!
//! Both filters propagate a matrix Fisher posterior along the gyro-driven
//! attitude kinematics and share the exact conjugate correction: with a
//! matrix Fisher prior, matrix-Fisher attitude measurements and von
//! Mises-Fisher direction measurements, the posterior parameter is the
//! additive update `F + sum Z_i F_Zi^T + sum b_j B_j a_j z_j^T`.
//!
//! Prediction is approximate in both cases. The first-order filter pushes
//! the first moment through
//! `E[R_{k+1}] = E[R_k] {I + (h/2)(G - tr(G) I)} exp(h hat(Omega_k))`
//! with `G = H H^T`, then refits the parameter by moment matching. The
//! unscented filter transports seven sigma rotations instead, recombines
//! their weighted moment (an exact identity, not an approximation), applies
//! the same diffusion factor, and refits.

use crate::error::Error;
use crate::fitting::fit_from_moment_with_rule;
use crate::matrix_fisher::{default_rule, MatrixFisher};
use crate::so3::{exp_so3, Matrix3, Rotation, Vector3};
use crate::vmf::VonMisesFisherS2;
use std::io::Write;

/// For slot `i`, the complementary circular pair `(j, k)`.
const CIRC: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];

/// Angular-velocity sensor model: diagonal noise scaling `H` (rad/sqrt(s))
/// with cached diffusion `G = H H^T`.
#[derive(Debug, Clone)]
pub struct GyroModel {
    h: Matrix3,
    g: Matrix3,
}

impl GyroModel {
    /// Builds the model from the diagonal of `H`.
    pub fn from_diagonal(diag: Vector3) -> Self {
        let h = Matrix3::from_diagonal(&diag);
        GyroModel {
            g: h * h.transpose(),
            h,
        }
    }

    /// Noiseless sensor.
    pub fn zero() -> Self {
        Self::from_diagonal(Vector3::zeros())
    }

    pub fn noise_matrix(&self) -> &Matrix3 {
        &self.h
    }

    /// `G = H H^T`.
    pub fn diffusion(&self) -> &Matrix3 {
        &self.g
    }

    /// Moment shrink factor `I + (h/2)(G - tr(G) I)` over a step of
    /// length `h`.
    fn moment_factor(&self, h: f64) -> Matrix3 {
        Matrix3::identity() + 0.5 * h * (self.g - self.g.trace() * Matrix3::identity())
    }

    /// The shrink factor keeps moments feasible only for modest steps;
    /// `h tr(G) < 2/3` guarantees it.
    fn check_step(&self, h: f64) -> Result<(), Error> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("step size {h}")));
        }
        if h * self.g.trace() >= 2.0 / 3.0 {
            return Err(Error::InvalidParameter(format!(
                "step {h} times diffusion trace {} reaches the feasibility bound 2/3",
                self.g.trace()
            )));
        }
        Ok(())
    }
}

/// Full-attitude sensor: the error rotation `R^T Z` follows a matrix
/// Fisher distribution with this parameter.
#[derive(Debug, Clone)]
pub struct AttitudeSensor {
    f_z: Matrix3,
}

impl AttitudeSensor {
    pub fn new(f_z: Matrix3) -> Self {
        AttitudeSensor { f_z }
    }

    pub fn parameter(&self) -> &Matrix3 {
        &self.f_z
    }
}

/// Seven sigma rotations and weights whose weighted first moment equals
/// that of the source distribution exactly.
///
/// Layout: `[R0, R1(+t1), R1(-t1), R2(+t2), R2(-t2), R3(+t3), R3(-t3)]`
/// with weights `[w0, w1, w1, w2, w2, w3, w3]`; `w0 = 1 - 2(w1+w2+w3)` may
/// be negative.
#[derive(Debug, Clone)]
pub struct UnscentedSet {
    pub rotations: [Rotation; 7],
    pub weights: [f64; 7],
    /// Rotation angles about the three principal axes, each in `(0, pi)`.
    pub angles: [f64; 3],
    pub sigma: f64,
}

impl UnscentedSet {
    /// Weighted first moment of the sigma rotations.
    pub fn weighted_moment(&self) -> Matrix3 {
        let mut m = Matrix3::zeros();
        for (r, w) in self.rotations.iter().zip(&self.weights) {
            m += *w * r.matrix();
        }
        m
    }
}

/// Lower end of the admissible interval for the spread parameter:
/// `max{(2s1+s2-s3-1)/(2s1+s2-s3+1), (s1-s3)/(s1+s2)}`, the second
/// fraction read as 0 for the uniform distribution.
pub fn sigma_lower_bound(s: &[f64; 3]) -> f64 {
    let m = 2.0 * s[0] + s[1] - s[2];
    let lb1 = (m - 1.0) / (m + 1.0);
    let lb2 = if s[0] + s[1] > 0.0 {
        (s[0] - s[2]) / (s[0] + s[1])
    } else {
        0.0
    };
    lb1.max(lb2)
}

/// Unscented transform of a matrix Fisher distribution.
///
/// The sigma rotations are the mean attitude and rotations of it about
/// each principal axis; where the distribution along an axis is
/// concentrated the angle is chosen so that the six non-central points
/// share one density value, and the uniform distribution yields angles of
/// 60 degrees with weights `(w0, w_i) = (-2, 1/2)`.
pub fn unscented_transform(d: &MatrixFisher, sigma: f64) -> Result<UnscentedSet, Error> {
    let s = d.singular_values();
    let lower = sigma_lower_bound(&s);
    if !(sigma > lower && sigma < 1.0) {
        return Err(Error::SigmaOutOfRange { sigma, lower });
    }
    let log_c = d.normalizing().log_c;
    let moment = d.normalizing().moment_diag();
    let mut angles = [0.0; 3];
    let mut half_weights = [0.0; 3];
    for i in 0..3 {
        let (j, k) = CIRC[i];
        let spread = s[j] + s[k];
        let cos_theta = if spread >= 1.0 {
            sigma + (1.0 - sigma) * (log_c - s[i]) / spread
        } else {
            (sigma + (1.0 - sigma) * (log_c - s[i]) - 0.5) * spread + 0.5
        };
        let theta = cos_theta.clamp(-1.0, 1.0).acos();
        angles[i] = theta;
        half_weights[i] = ((moment[i] - moment[j] - moment[k]) + 1.0) / (4.0 * (1.0 - cos_theta));
    }
    let w0 = 1.0 - 2.0 * (half_weights[0] + half_weights[1] + half_weights[2]);
    let svd = d.proper_svd();
    let sigma_point = |axis: usize, angle: f64| {
        let mut v = Vector3::zeros();
        v[axis] = angle;
        Rotation::from_matrix_unchecked(
            svd.u.matrix() * *exp_so3(&v).matrix() * svd.v.matrix().transpose(),
        )
    };
    let rotations = [
        d.mean_attitude(),
        sigma_point(0, angles[0]),
        sigma_point(0, -angles[0]),
        sigma_point(1, angles[1]),
        sigma_point(1, -angles[1]),
        sigma_point(2, angles[2]),
        sigma_point(2, -angles[2]),
    ];
    let weights = [
        w0,
        half_weights[0],
        half_weights[0],
        half_weights[1],
        half_weights[1],
        half_weights[2],
        half_weights[2],
    ];
    Ok(UnscentedSet {
        rotations,
        weights,
        angles,
        sigma,
    })
}

/// Recovers the matrix Fisher distribution matching the weighted first
/// moment of a sigma set.
pub fn inverse_unscented(set: &UnscentedSet) -> Result<MatrixFisher, Error> {
    Ok(fit_from_moment_with_rule(&set.weighted_moment(), default_rule())?.distribution)
}

/// Posterior state of a filter at one time step.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub step: usize,
    pub distribution: MatrixFisher,
    /// Propagation step size in seconds.
    pub h: f64,
}

impl FilterState {
    pub fn new(distribution: MatrixFisher, h: f64) -> Result<Self, Error> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("step size {h}")));
        }
        Ok(FilterState {
            step: 0,
            distribution,
            h,
        })
    }
}

fn refit(state: &FilterState, moment: Matrix3, step: usize) -> Result<FilterState, Error> {
    let fit = fit_from_moment_with_rule(&moment, default_rule())?;
    Ok(FilterState {
        step,
        distribution: fit.distribution,
        h: state.h,
    })
}

/// First-order prediction: propagate the first moment analytically, then
/// refit by moment matching.
pub fn propagate_first_order(
    state: &FilterState,
    omega: &Vector3,
    gyro: &GyroModel,
) -> Result<FilterState, Error> {
    gyro.check_step(state.h)?;
    let transport = exp_so3(&(state.h * omega));
    let moment =
        state.distribution.first_moment() * gyro.moment_factor(state.h) * transport.matrix();
    refit(state, moment, state.step + 1)
}

/// Unscented prediction: transport each sigma rotation by the noiseless
/// kinematics, recombine the weighted moment, apply the diffusion factor,
/// and refit.
pub fn propagate_unscented(
    state: &FilterState,
    omega: &Vector3,
    gyro: &GyroModel,
    sigma: f64,
) -> Result<FilterState, Error> {
    gyro.check_step(state.h)?;
    let set = unscented_transform(&state.distribution, sigma)?;
    let transport = exp_so3(&(state.h * omega));
    let mut moment = Matrix3::zeros();
    for (r, w) in set.rotations.iter().zip(&set.weights) {
        moment += *w * (r.matrix() * transport.matrix());
    }
    moment *= gyro.moment_factor(state.h);
    refit(state, moment, state.step + 1)
}

/// Exact conjugate measurement update:
/// `F+ = F + sum Z_i F_Zi^T + sum b_j B_j a_j z_j^T`.
pub fn correct(
    state: &FilterState,
    attitude_measurements: &[(Rotation, &AttitudeSensor)],
    direction_measurements: &[(Vector3, &VonMisesFisherS2)],
) -> Result<FilterState, Error> {
    let mut f = *state.distribution.parameter();
    for (z, sensor) in attitude_measurements {
        f += z.matrix() * sensor.parameter().transpose();
    }
    for (z, sensor) in direction_measurements {
        let pole_dir = *sensor.bias() * *sensor.direction();
        f += sensor.concentration() * pole_dir * z.transpose();
    }
    Ok(FilterState {
        step: state.step,
        distribution: MatrixFisher::new(f)?,
        h: state.h,
    })
}

/// Which prediction scheme a filter run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    FirstOrder,
    Unscented,
}

/// Measurements arriving at one gyro step, applied after the propagation
/// that lands on `step`.
#[derive(Debug, Clone, Default)]
pub struct MeasurementEvent {
    pub step: usize,
    pub attitude: Vec<(Rotation, AttitudeSensor)>,
    pub directions: Vec<(Vector3, VonMisesFisherS2)>,
}

/// Per-step record of a filter run.
#[derive(Debug, Clone)]
pub struct EstimationStep {
    pub time: f64,
    /// Angle between the posterior mean attitude and the truth, degrees;
    /// absent when no truth was supplied.
    pub error_deg: Option<f64>,
    pub singular_values: [f64; 3],
    pub mean_attitude: Rotation,
}

/// Time-indexed record of posterior parameters, mean attitudes, and error
/// angles for one filter run.
#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub h: f64,
    pub steps: Vec<EstimationStep>,
}

impl EstimationRun {
    /// Mean error angle (degrees) over the records with `time >= t0`.
    pub fn mean_error_after(&self, t0: f64) -> Option<f64> {
        let errors: Vec<f64> = self
            .steps
            .iter()
            .filter(|s| s.time >= t0)
            .filter_map(|s| s.error_deg)
            .collect();
        if errors.is_empty() {
            None
        } else {
            Some(errors.iter().sum::<f64>() / errors.len() as f64)
        }
    }

    /// Time-averaged pair sums `(s2+s3, s3+s1, s1+s2)` over `time >= t0`:
    /// the concentrations of rotation about the three principal axes.
    pub fn mean_pair_sums_after(&self, t0: f64) -> [f64; 3] {
        let mut sums = [0.0; 3];
        let mut n = 0usize;
        for rec in self.steps.iter().filter(|s| s.time >= t0) {
            let s = rec.singular_values;
            sums[0] += s[1] + s[2];
            sums[1] += s[2] + s[0];
            sums[2] += s[0] + s[1];
            n += 1;
        }
        if n > 0 {
            for v in &mut sums {
                *v /= n as f64;
            }
        }
        sums
    }

    /// Writes the run as CSV: a version comment, a header, then one row
    /// per step with the uncertainty diagnostics `1/(s_i+s_j)` and the
    /// mean-attitude entries.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# mfso3-run v1")?;
        writeln!(
            out,
            "t,error_deg,s1,s2,s3,inv_s23,inv_s31,inv_s12,m11,m12,m13,m21,m22,m23,m31,m32,m33"
        )?;
        for rec in &self.steps {
            let s = rec.singular_values;
            let m = rec.mean_attitude.matrix();
            write!(
                out,
                "{},{},{},{},{},{},{},{}",
                rec.time,
                rec.error_deg.map_or(f64::NAN, |e| e),
                s[0],
                s[1],
                s[2],
                1.0 / (s[1] + s[2]),
                1.0 / (s[2] + s[0]),
                1.0 / (s[0] + s[1])
            )?;
            for i in 0..3 {
                for j in 0..3 {
                    write!(out, ",{}", m[(i, j)])?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn record(state: &FilterState, truth: Option<&Rotation>) -> EstimationStep {
    let mean = state.distribution.mean_attitude();
    EstimationStep {
        time: state.step as f64 * state.h,
        error_deg: truth.map(|t| t.angle_to(&mean).to_degrees()),
        singular_values: state.distribution.singular_values(),
        mean_attitude: mean,
    }
}

/// Runs one filter over a gyro stream and a time-ordered measurement
/// stream.
///
/// `gyro_measured[k]` drives the propagation from step `k` to `k+1`;
/// events are applied after landing on their step. When supplied, `truth`
/// must hold one rotation per step including the initial one. In unscented
/// mode the spread parameter is clamped into the admissible interval of
/// each step's distribution; the weighted moment, and therefore the filter
/// output, does not depend on that choice.
#[allow(clippy::too_many_arguments)]
pub fn run_filter(
    initial: MatrixFisher,
    mode: FilterMode,
    sigma: f64,
    h: f64,
    gyro_measured: &[Vector3],
    gyro_model: &GyroModel,
    events: &[MeasurementEvent],
    truth: Option<&[Rotation]>,
) -> Result<EstimationRun, Error> {
    if let Some(t) = truth {
        if t.len() != gyro_measured.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "truth length {} does not match {} gyro steps",
                t.len(),
                gyro_measured.len()
            )));
        }
    }
    if events.windows(2).any(|w| w[0].step > w[1].step) {
        return Err(Error::InvalidParameter(
            "measurement events must be time-ordered".into(),
        ));
    }
    if let Some(ev) = events.last() {
        if ev.step > gyro_measured.len() {
            return Err(Error::InvalidParameter(format!(
                "measurement event at step {} beyond the {} gyro steps",
                ev.step,
                gyro_measured.len()
            )));
        }
    }
    let mut state = FilterState::new(initial, h)?;
    let mut pending = events.iter().peekable();
    let mut steps = Vec::with_capacity(gyro_measured.len() + 1);

    fn apply_events<'a>(
        state: FilterState,
        pending: &mut std::iter::Peekable<std::slice::Iter<'a, MeasurementEvent>>,
    ) -> Result<FilterState, Error> {
        let mut current = state;
        while let Some(ev) = pending.peek() {
            if ev.step != current.step {
                break;
            }
            let att: Vec<(Rotation, &AttitudeSensor)> =
                ev.attitude.iter().map(|(z, s)| (*z, s)).collect();
            let dir: Vec<(Vector3, &VonMisesFisherS2)> =
                ev.directions.iter().map(|(z, s)| (*z, s)).collect();
            let step = current.step;
            current = correct(&current, &att, &dir).map_err(|e| e.at_step(step))?;
            pending.next();
        }
        Ok(current)
    }

    state = apply_events(state, &mut pending)?;
    steps.push(record(&state, truth.map(|t| &t[0])));

    for (k, omega) in gyro_measured.iter().enumerate() {
        state = match mode {
            FilterMode::FirstOrder => propagate_first_order(&state, omega, gyro_model)
                .map_err(|e| e.at_step(k + 1))?,
            FilterMode::Unscented => {
                let lower = sigma_lower_bound(&state.distribution.singular_values());
                let sigma_eff = if sigma > lower {
                    sigma
                } else {
                    0.5 * (lower + 1.0)
                };
                propagate_unscented(&state, omega, gyro_model, sigma_eff)
                    .map_err(|e| e.at_step(k + 1))?
            }
        };
        state = apply_events(state, &mut pending)?;
        steps.push(record(&state, truth.map(|t| &t[k + 1])));
    }
    Ok(EstimationRun { h, steps })
}
