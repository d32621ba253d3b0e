//! The von Mises-Fisher distribution on the unit sphere, parameterized for
//! direction sensors: a known inertial direction `a`, a concentration `b`,
//! and a bias rotation `B`. Conditioned on the attitude `R`, the measured
//! direction concentrates around the pole `R^T B a`.

use crate::error::Error;
use crate::so3::{Rotation, Vector3};
use rand::Rng;

/// Direction-sensor model: von Mises-Fisher density on the sphere with
/// pole `R^T B a` and concentration `b`.
#[derive(Debug, Clone)]
pub struct VonMisesFisherS2 {
    direction: Vector3,
    concentration: f64,
    bias: Rotation,
}

impl VonMisesFisherS2 {
    /// `direction` must be unit length within 1e-12 and `concentration`
    /// strictly positive.
    pub fn new(direction: Vector3, concentration: f64, bias: Rotation) -> Result<Self, Error> {
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "reference direction norm {} is not 1",
                direction.norm()
            )));
        }
        if !(concentration > 0.0) || !concentration.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "concentration {concentration} must be positive and finite"
            )));
        }
        Ok(VonMisesFisherS2 {
            direction,
            concentration,
            bias,
        })
    }

    /// Unbiased sensor for inertial direction `a`.
    pub fn unbiased(direction: Vector3, concentration: f64) -> Result<Self, Error> {
        Self::new(direction, concentration, Rotation::identity())
    }

    pub fn direction(&self) -> &Vector3 {
        &self.direction
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn bias(&self) -> &Rotation {
        &self.bias
    }

    /// Pole of the conditional density: `R^T B a`.
    pub fn pole(&self, r: &Rotation) -> Vector3 {
        r.transpose() * (self.bias * self.direction)
    }

    /// Log-density of the measured direction `z` given attitude `r`,
    /// relative to the uniform distribution on the sphere:
    /// `log(b / sinh b) + b <pole, z>`, with the prefactor evaluated in a
    /// form that stays finite for large `b`.
    pub fn log_pdf(&self, r: &Rotation, z: &Vector3) -> f64 {
        let b = self.concentration;
        // log(b / sinh b) = log(2b) - b - log(1 - e^{-2b})
        let log_prefactor = (2.0 * b).ln() - b - (-(-2.0 * b).exp()).ln_1p();
        log_prefactor + b * self.pole(r).dot(z)
    }

    /// Density relative to the uniform distribution on the sphere.
    pub fn pdf(&self, r: &Rotation, z: &Vector3) -> f64 {
        self.log_pdf(r, z).exp()
    }

    /// Exact draw via the closed-form inverse CDF of the cosine of the
    /// polar angle about the pole, with uniform azimuth.
    pub fn sample<G: Rng + ?Sized>(&self, r: &Rotation, rng: &mut G) -> Vector3 {
        let b = self.concentration;
        let pole = self.pole(r);
        let u: f64 = rng.random();
        // w = 1 + log(u + (1-u) e^{-2b}) / b, the inverse CDF of the
        // density proportional to exp(b w) on [-1, 1]
        let w = (1.0 + (u + (1.0 - u) * (-2.0 * b).exp()).ln() / b).clamp(-1.0, 1.0);
        let (e1, e2) = tangent_basis(&pole);
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let sin_theta = (1.0 - w * w).max(0.0).sqrt();
        pole * w + (e1 * phi.cos() + e2 * phi.sin()) * sin_theta
    }
}

/// Orthonormal pair spanning the plane normal to a unit vector.
fn tangent_basis(n: &Vector3) -> (Vector3, Vector3) {
    let helper = if n.x.abs() < 0.7 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}
