//! Ground-truth generation and sensor simulation.
//!
//! The truth trajectory integrates a rigid-body pendulum under uniform
//! gravity, `J dOmega = (J Omega) x Omega + m rho x (g R^T e3)` with
//! attitude kinematics `dR = R hat(Omega)`, using a second-order
//! Runge-Kutta scheme whose attitude update goes through the exponential
//! map (the iterates never leave the group). Gyro readings add discrete
//! white noise `H xi sqrt(h)` per sample, the per-step increment of the
//! attitude diffusion; attitude and direction measurements are exact draws
//! from their sensor distributions.

use crate::error::Error;
use crate::estimator::{
    run_filter, AttitudeSensor, EstimationRun, FilterMode, GyroModel, MeasurementEvent,
};
use crate::matrix_fisher::MatrixFisher;
use crate::so3::{exp_so3, Matrix3, Rotation, Vector3};
use crate::vmf::VonMisesFisherS2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Rigid-body pendulum parameters and initial conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PendulumConfig {
    /// Inertia matrix, kg m^2; must be symmetric positive definite.
    pub inertia: [[f64; 3]; 3],
    /// Body mass, kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Body-frame center-of-mass offset from the pivot, m.
    pub com_offset: [f64; 3],
    /// Initial attitude.
    pub initial_attitude: [[f64; 3]; 3],
    /// Initial body angular velocity, rad/s.
    pub initial_rate: [f64; 3],
}

impl Default for PendulumConfig {
    /// A swift, non-periodic tumble: triaxial inertia and the initial rate
    /// `4.14 (1, 1, 1)` rad/s.
    fn default() -> Self {
        PendulumConfig {
            inertia: [[0.2, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, 0.4]],
            mass: 1.0,
            gravity: 9.81,
            com_offset: [0.008, 0.004, 0.01],
            initial_attitude: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            initial_rate: [4.14, 4.14, 4.14],
        }
    }
}

fn matrix_from(rows: &[[f64; 3]; 3]) -> Matrix3 {
    Matrix3::from_fn(|i, j| rows[i][j])
}

fn vector_from(v: &[f64; 3]) -> Vector3 {
    Vector3::new(v[0], v[1], v[2])
}

impl PendulumConfig {
    pub fn inertia_matrix(&self) -> Matrix3 {
        matrix_from(&self.inertia)
    }

    pub fn initial_rotation(&self) -> Result<Rotation, Error> {
        Rotation::from_matrix(matrix_from(&self.initial_attitude))
    }

    fn validate(&self, problems: &mut Vec<String>) {
        let j = self.inertia_matrix();
        if (j - j.transpose()).norm() > 1e-12 {
            problems.push("pendulum.inertia: not symmetric".into());
        } else if j.symmetric_eigenvalues().iter().any(|l| *l <= 0.0) {
            problems.push("pendulum.inertia: not positive definite".into());
        }
        if !(self.mass > 0.0) {
            problems.push(format!("pendulum.mass: {} not positive", self.mass));
        }
        if !self.gravity.is_finite() {
            problems.push("pendulum.gravity: not finite".into());
        }
        if self.initial_rotation().is_err() {
            problems.push("pendulum.initial_attitude: not a rotation matrix".into());
        }
    }

    /// Total energy of a state: kinetic plus gravity potential.
    pub fn energy(&self, r: &Rotation, omega: &Vector3) -> f64 {
        let j = self.inertia_matrix();
        let rho = vector_from(&self.com_offset);
        0.5 * omega.dot(&(j * omega))
            - self.mass * self.gravity * Vector3::z().dot(&(*r.matrix() * rho))
    }
}

/// Integrates the pendulum at `rate` Hz for `duration` seconds, returning
/// the `(attitude, body rate)` series including the initial state.
pub fn simulate_truth(
    cfg: &PendulumConfig,
    duration: f64,
    rate: f64,
) -> Result<Vec<(Rotation, Vector3)>, Error> {
    if !(duration > 0.0) || !(rate > 0.0) {
        return Err(Error::InvalidParameter(
            "duration and rate must be positive".into(),
        ));
    }
    let mut problems = Vec::new();
    cfg.validate(&mut problems);
    if !problems.is_empty() {
        return Err(Error::InvalidParameter(problems.join("; ")));
    }
    let h = 1.0 / rate;
    let n = (duration * rate).round() as usize;
    let j = cfg.inertia_matrix();
    let j_inv = j.try_inverse().expect("positive definite inertia");
    let rho = vector_from(&cfg.com_offset);
    let mg = cfg.mass * cfg.gravity;
    let rate_dot = |r: &Rotation, w: &Vector3| -> Vector3 {
        j_inv * ((j * w).cross(w) + mg * rho.cross(&(r.transpose() * Vector3::z())))
    };

    let mut series = Vec::with_capacity(n + 1);
    let mut r = cfg.initial_rotation()?;
    let mut w = vector_from(&cfg.initial_rate);
    series.push((r, w));
    for _ in 0..n {
        // explicit midpoint with exponential-map transport
        let k1 = rate_dot(&r, &w);
        let r_mid = r * exp_so3(&(0.5 * h * w));
        let w_mid = w + 0.5 * h * k1;
        let k2 = rate_dot(&r_mid, &w_mid);
        r = r * exp_so3(&(h * w_mid));
        w += h * k2;
        series.push((r, w));
    }
    Ok(series)
}

/// Gyro readings: the true rate plus discrete white noise `H xi sqrt(h)`,
/// the increment of the attitude diffusion over one sample interval.
/// Returns one reading per step, taken at the left endpoint.
pub fn simulate_gyro<R: Rng + ?Sized>(
    truth_rates: &[Vector3],
    gyro: &GyroModel,
    h: f64,
    rng: &mut R,
) -> Vec<Vector3> {
    let scale = h.sqrt();
    truth_rates
        .iter()
        .map(|w| {
            let xi = Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            w + gyro.noise_matrix() * xi * scale
        })
        .collect()
}

/// One full-attitude measurement: `Z = R_true E` with `E` drawn from the
/// sensor's error distribution.
pub fn simulate_attitude_measurement<R: Rng + ?Sized>(
    r_true: &Rotation,
    error_distribution: &MatrixFisher,
    rng: &mut R,
) -> Rotation {
    *r_true * error_distribution.sample(rng)
}

/// One direction sensor in a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionSensorConfig {
    /// Known direction in the inertial frame; unit length.
    pub direction: [f64; 3],
    /// von Mises-Fisher concentration.
    pub concentration: f64,
    /// Optional bias rotation; identity when omitted.
    #[serde(default)]
    pub bias: Option<[[f64; 3]; 3]>,
}

impl DirectionSensorConfig {
    fn build(&self) -> Result<VonMisesFisherS2, Error> {
        let bias = match &self.bias {
            Some(rows) => Rotation::from_matrix(matrix_from(rows))?,
            None => Rotation::identity(),
        };
        VonMisesFisherS2::new(vector_from(&self.direction), self.concentration, bias)
    }
}

/// Complete description of one estimation scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Simulated time span, s.
    pub duration: f64,
    /// Gyro sampling rate, Hz; sets the filter step size.
    pub gyro_rate_hz: f64,
    /// Attitude/direction measurement rate, Hz; the gyro rate must be an
    /// integer multiple of it.
    pub measurement_rate_hz: f64,
    /// Diagonal of the gyro noise scaling H, rad/sqrt(s).
    pub gyro_noise: [f64; 3],
    /// Filter-assumed gyro noise when it differs from the simulated one.
    #[serde(default)]
    pub filter_gyro_noise: Option<[f64; 3]>,
    /// Attitude-sensor error parameter F_Z; omit for no attitude sensor.
    #[serde(default)]
    pub attitude_sensor: Option<[[f64; 3]; 3]>,
    /// Direction sensors sampled at the measurement rate.
    #[serde(default)]
    pub direction_sensors: Vec<DirectionSensorConfig>,
    /// Initial filter parameter F(0).
    pub initial_parameter: [[f64; 3]; 3],
    /// Unscented spread parameter.
    pub sigma: f64,
    /// Seed for the measurement realization.
    pub seed: u64,
    #[serde(default)]
    pub pendulum: PendulumConfig,
}

impl ScenarioConfig {
    /// Large initial estimation error: concentrated prior at a half-turn
    /// from the truth, `F(0) = 100 exp(pi hat(e1))`.
    pub fn case_i(seed: u64) -> Self {
        let f0 = 100.0 * *exp_so3(&(std::f64::consts::PI * Vector3::x())).matrix();
        ScenarioConfig {
            initial_parameter: [
                [f0[(0, 0)], f0[(0, 1)], f0[(0, 2)]],
                [f0[(1, 0)], f0[(1, 1)], f0[(1, 2)]],
                [f0[(2, 0)], f0[(2, 1)], f0[(2, 2)]],
            ],
            ..Self::case_ii(seed)
        }
    }

    /// Large initial uncertainty: uniform prior, `F(0) = 0`.
    pub fn case_ii(seed: u64) -> Self {
        ScenarioConfig {
            duration: 10.0,
            gyro_rate_hz: 50.0,
            measurement_rate_hz: 10.0,
            gyro_noise: [1.8, 1.6, 2.4],
            filter_gyro_noise: None,
            attitude_sensor: Some([[40.0, 0.0, 0.0], [0.0, 50.0, 0.0], [0.0, 0.0, 35.0]]),
            direction_sensors: Vec::new(),
            initial_parameter: [[0.0; 3]; 3],
            sigma: 0.9,
            seed,
            pendulum: PendulumConfig::default(),
        }
    }

    /// Collects every schema violation, field by field.
    pub fn validate(&self) -> Result<(), Error> {
        let mut problems = Vec::new();
        if !(self.duration > 0.0) {
            problems.push(format!("duration: {} not positive", self.duration));
        }
        if !(self.gyro_rate_hz > 0.0) {
            problems.push(format!("gyro_rate_hz: {} not positive", self.gyro_rate_hz));
        }
        if !(self.measurement_rate_hz > 0.0) {
            problems.push(format!(
                "measurement_rate_hz: {} not positive",
                self.measurement_rate_hz
            ));
        }
        if self.gyro_rate_hz > 0.0 && self.measurement_rate_hz > 0.0 {
            let ratio = self.gyro_rate_hz / self.measurement_rate_hz;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
                problems.push(format!(
                    "gyro_rate_hz: {} is not an integer multiple of measurement_rate_hz {}",
                    self.gyro_rate_hz, self.measurement_rate_hz
                ));
            }
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            problems.push(format!("sigma: {} outside (0, 1)", self.sigma));
        }
        if !self.gyro_noise.iter().all(|v| v.is_finite() && *v >= 0.0) {
            problems.push("gyro_noise: entries must be finite and nonnegative".into());
        }
        if let Some(fz) = &self.attitude_sensor {
            if !fz.iter().flatten().all(|v| v.is_finite()) {
                problems.push("attitude_sensor: entries must be finite".into());
            }
        }
        for (i, d) in self.direction_sensors.iter().enumerate() {
            if let Err(e) = d.build() {
                problems.push(format!("direction_sensors[{i}]: {e}"));
            }
        }
        if !self.initial_parameter.iter().flatten().all(|v| v.is_finite()) {
            problems.push("initial_parameter: entries must be finite".into());
        }
        self.pendulum.validate(&mut problems);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}

/// Steady-state aggregates of one filter run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSummary {
    pub mean_error_deg: f64,
    /// Time-averaged `(s2+s3, s3+s1, s1+s2)`.
    pub mean_pair_sums: [f64; 3],
}

/// Scenario aggregates for both filters, over `time >= steady_state_from`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub steady_state_from: f64,
    pub first_order: FilterSummary,
    pub unscented: FilterSummary,
}

/// Everything produced by one scenario execution.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub truth: Vec<(Rotation, Vector3)>,
    pub first_order: EstimationRun,
    pub unscented: EstimationRun,
    pub summary: ScenarioSummary,
}

/// Time from which steady-state statistics are aggregated.
pub const STEADY_STATE_FROM: f64 = 0.5;

/// Runs both filters on one shared measurement realization.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput, Error> {
    cfg.validate()?;
    let h = 1.0 / cfg.gyro_rate_hz;
    let truth = simulate_truth(&cfg.pendulum, cfg.duration, cfg.gyro_rate_hz)?;
    let n = truth.len() - 1;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let sim_gyro = GyroModel::from_diagonal(vector_from(&cfg.gyro_noise));
    let filter_gyro = cfg
        .filter_gyro_noise
        .map(|d| GyroModel::from_diagonal(vector_from(&d)))
        .unwrap_or_else(|| sim_gyro.clone());

    // Rate gyros report the mean rate over the sample interval; use the
    // increment-consistent rate log(R_k^T R_{k+1})/h so the noiseless
    // reading transports the truth exactly.
    let truth_rates: Vec<Vector3> = truth
        .windows(2)
        .map(|w| crate::so3::log_so3(&(w[0].0.transpose() * w[1].0)) / h)
        .collect();
    let gyro_meas = simulate_gyro(&truth_rates, &sim_gyro, h, &mut rng);

    let attitude_error = cfg
        .attitude_sensor
        .as_ref()
        .map(|fz| MatrixFisher::new(matrix_from(fz)))
        .transpose()?;
    let direction_sensors: Vec<VonMisesFisherS2> = cfg
        .direction_sensors
        .iter()
        .map(|d| d.build())
        .collect::<Result<_, _>>()?;

    let stride = (cfg.gyro_rate_hz / cfg.measurement_rate_hz).round() as usize;
    let mut events = Vec::new();
    let mut step = stride;
    while step <= n {
        let r_true = &truth[step].0;
        let mut ev = MeasurementEvent {
            step,
            ..Default::default()
        };
        if let (Some(err), Some(fz)) = (&attitude_error, &cfg.attitude_sensor) {
            let z = simulate_attitude_measurement(r_true, err, &mut rng);
            ev.attitude.push((z, AttitudeSensor::new(matrix_from(fz))));
        }
        for sensor in &direction_sensors {
            let z = sensor.sample(r_true, &mut rng);
            ev.directions.push((z, sensor.clone()));
        }
        events.push(ev);
        step += stride;
    }

    let truth_rotations: Vec<Rotation> = truth.iter().map(|(r, _)| *r).collect();
    let initial = MatrixFisher::new(matrix_from(&cfg.initial_parameter))?;
    let first_order = run_filter(
        initial.clone(),
        FilterMode::FirstOrder,
        cfg.sigma,
        h,
        &gyro_meas,
        &filter_gyro,
        &events,
        Some(&truth_rotations),
    )?;
    let unscented = run_filter(
        initial,
        FilterMode::Unscented,
        cfg.sigma,
        h,
        &gyro_meas,
        &filter_gyro,
        &events,
        Some(&truth_rotations),
    )?;

    let summary = ScenarioSummary {
        steady_state_from: STEADY_STATE_FROM,
        first_order: FilterSummary {
            mean_error_deg: first_order.mean_error_after(STEADY_STATE_FROM).unwrap_or(f64::NAN),
            mean_pair_sums: first_order.mean_pair_sums_after(STEADY_STATE_FROM),
        },
        unscented: FilterSummary {
            mean_error_deg: unscented.mean_error_after(STEADY_STATE_FROM).unwrap_or(f64::NAN),
            mean_pair_sums: unscented.mean_pair_sums_after(STEADY_STATE_FROM),
        },
    };

    Ok(ScenarioOutput {
        truth,
        first_order,
        unscented,
        summary,
    })
}
