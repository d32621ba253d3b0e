//! Exact 3x3 rotation-group primitives.
//!
//! Rotations are stored as validated 3x3 matrices. The hat map sends a
//! vector to the antisymmetric matrix acting as its cross product, `exp_so3`
//! / `log_so3` move between the group and its tangent space, and
//! [`proper_svd`] produces the sign-corrected singular value decomposition
//! `F = U S V^T` with `U, V` proper rotations and possibly negative third
//! singular value.

use crate::error::Error;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::ops::Mul;

/// Real 3-vector used throughout the crate.
pub type Vector3 = nalgebra::Vector3<f64>;
/// Real 3x3 matrix used throughout the crate.
pub type Matrix3 = nalgebra::Matrix3<f64>;

const ORTHO_TOL: f64 = 1e-12;
/// Below this angle the exponential/logarithm switch to series expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// A rotation matrix: orthogonal with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3);

impl Rotation {
    /// The identity rotation.
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates `R^T R = I` and `det R = 1`, both within 1e-12.
    pub fn from_matrix(m: Matrix3) -> Result<Self, Error> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        if ortho > ORTHO_TOL {
            return Err(Error::NotARotation(format!(
                "orthogonality defect {ortho:.3e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::NotARotation(format!("determinant {det}")));
        }
        Ok(Rotation(m))
    }

    /// Caller guarantees the invariants hold.
    pub(crate) fn from_matrix_unchecked(m: Matrix3) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3 {
        &self.0
    }

    /// The inverse rotation, `R^T`.
    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// Column `i` (0-based): direction of the `i`-th body axis in the
    /// inertial frame.
    pub fn column(&self, i: usize) -> Vector3 {
        self.0.column(i).into_owned()
    }

    /// Rotation angle separating `self` from `other`, in `[0, pi]`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        log_so3(&(self.transpose() * *other)).norm()
    }

    /// Rotation angle from the identity, in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        log_so3(self).norm()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3> for Rotation {
    type Output = Vector3;
    fn mul(self, rhs: Vector3) -> Vector3 {
        self.0 * rhs
    }
}

/// Antisymmetric matrix of `v`: `hat(v) * w = v x w`.
pub fn hat(v: &Vector3) -> Matrix3 {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of the hat map. The symmetric part is discarded by averaging
/// off-diagonal pairs; inputs whose symmetric part exceeds 1e-10 are
/// rejected.
pub fn vee(m: &Matrix3) -> Result<Vector3, Error> {
    let sym = 0.5 * (m + m.transpose());
    let norm = sym.norm();
    if norm > 1e-10 {
        return Err(Error::NotAntisymmetric { norm });
    }
    Ok(Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    ))
}

/// Exponential map: rotation about `v / |v|` by the angle `|v|`
/// (Rodrigues' formula, with a series fallback below 1e-6).
pub fn exp_so3(v: &Vector3) -> Rotation {
    let theta = v.norm();
    let vh = hat(v);
    let (a, b) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / (theta * theta),
        )
    };
    Rotation(Matrix3::identity() + a * vh + b * (vh * vh))
}

/// Logarithm map; returned vector has norm in `[0, pi]`.
///
/// At the angle-pi boundary the axis is recovered from the symmetric part
/// of `R`; when the skew part cannot break the `+-a` tie, the sign is fixed
/// deterministically (first nonzero component positive).
pub fn log_so3(r: &Rotation) -> Vector3 {
    let m = r.matrix();
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let skew = Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    );
    if cos_theta < -0.5 {
        // Wide-angle region: arccos loses digits approaching pi, so take
        // the angle from the skew norm and the axis from the symmetric
        // part, a a^T = I + (sym(R) - I)/(1 - cos theta).
        let sin_theta = skew.norm().min(1.0);
        let theta = PI - sin_theta.asin();
        let aat = Matrix3::identity()
            + (0.5 * (m + m.transpose()) - Matrix3::identity()) / (1.0 - cos_theta);
        let k = (0..3)
            .max_by(|&i, &j| aat[(i, i)].partial_cmp(&aat[(j, j)]).unwrap())
            .unwrap();
        let mut axis = aat.column(k).into_owned() / aat[(k, k)].max(1e-300).sqrt();
        axis.normalize_mut();
        if sin_theta > 1e-8 {
            if axis.dot(&skew) < 0.0 {
                axis = -axis;
            }
        } else if let Some(lead) = axis.iter().find(|c| c.abs() > 1e-8) {
            if *lead < 0.0 {
                axis = -axis;
            }
        }
        return axis * theta;
    }
    let theta = cos_theta.acos();
    if theta < SMALL_ANGLE {
        // skew = sin(theta) * axis; theta/sin(theta) ~ 1 + theta^2/6
        return skew * (1.0 + theta * theta / 6.0);
    }
    skew * (theta / theta.sin())
}

/// A unit quaternion, vector part first and scalar part last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub vector: Vector3,
    pub scalar: f64,
}

impl Quaternion {
    /// Validates unit norm within 1e-12.
    pub fn new(vector: Vector3, scalar: f64) -> Result<Self, Error> {
        let norm = (vector.norm_squared() + scalar * scalar).sqrt();
        if (norm - 1.0).abs() > ORTHO_TOL {
            return Err(Error::NotUnitQuaternion { norm });
        }
        Ok(Quaternion { vector, scalar })
    }

    pub(crate) fn new_unchecked(vector: Vector3, scalar: f64) -> Self {
        Quaternion { vector, scalar }
    }
}

/// Rotation matrix of a unit quaternion:
/// `(q4^2 - q^T q) I + 2 q q^T + 2 q4 hat(q)`. Antipodal quaternions map to
/// the same rotation.
pub fn quat_to_rotation(x: &Quaternion) -> Rotation {
    let q = &x.vector;
    let q4 = x.scalar;
    let m = (q4 * q4 - q.dot(q)) * Matrix3::identity()
        + 2.0 * q * q.transpose()
        + 2.0 * q4 * hat(q);
    Rotation(m)
}

/// Proper singular value decomposition `F = U S V^T` with `U, V` rotations
/// and `s1 >= s2 >= |s3| >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct ProperSvd {
    pub u: Rotation,
    pub v: Rotation,
    pub s: [f64; 3],
}

impl ProperSvd {
    /// Reassembles `U diag(s) V^T`.
    pub fn reconstruct(&self) -> Matrix3 {
        self.u.matrix() * Matrix3::from_diagonal(&Vector3::new(self.s[0], self.s[1], self.s[2]))
            * self.v.matrix().transpose()
    }

    /// Mean attitude `U V^T` of a distribution with this parameter.
    pub fn u_vt(&self) -> Rotation {
        self.u * self.v.transpose()
    }
}

/// Computes the proper singular value decomposition of an arbitrary real
/// 3x3 matrix. The sign of a negative-determinant input is absorbed into
/// `s3`, keeping `det U = det V = +1`.
pub fn proper_svd(f: &Matrix3) -> ProperSvd {
    if f.norm() == 0.0 {
        return ProperSvd {
            u: Rotation::identity(),
            v: Rotation::identity(),
            s: [0.0; 3],
        };
    }
    let svd = f
        .svd(true, true);
    let mut u = svd.u.expect("svd requested u");
    let mut v = svd.v_t.expect("svd requested v").transpose();
    // nalgebra sorts singular values in descending order.
    let sv = svd.singular_values;
    let du = u.determinant().signum();
    let dv = v.determinant().signum();
    for i in 0..3 {
        u[(i, 2)] *= du;
        v[(i, 2)] *= dv;
    }
    ProperSvd {
        u: Rotation::from_matrix_unchecked(u),
        v: Rotation::from_matrix_unchecked(v),
        s: [sv[0], sv[1], du * dv * sv[2]],
    }
}

/// Haar-uniform random rotation: a uniform quaternion on the 3-sphere
/// mapped through [`quat_to_rotation`].
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let q4: f64 = rng.sample(StandardNormal);
        let norm = (q.norm_squared() + q4 * q4).sqrt();
        if norm > 1e-12 {
            return quat_to_rotation(&Quaternion::new_unchecked(q / norm, q4 / norm));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn e(i: usize) -> Vector3 {
        let mut v = Vector3::zeros();
        v[i] = 1.0;
        v
    }

    fn random_rotation(rng: &mut ChaCha12Rng) -> Rotation {
        sample_uniform(rng)
    }

    #[test]
    fn hat_acts_as_cross_product() {
        assert_relative_eq!(hat(&e(2)) * e(0), e(1), epsilon = 1e-15);
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = Vector3::new(rng.random(), rng.random(), rng.random());
            let w = Vector3::new(rng.random(), rng.random(), rng.random());
            assert_relative_eq!(hat(&v) * w, v.cross(&w), epsilon = 1e-14);
            assert_relative_eq!((hat(&v) + hat(&v).transpose()).norm(), 0.0);
        }
    }

    #[test]
    fn vee_inverts_hat() {
        assert_relative_eq!(
            vee(&hat(&Vector3::new(1.0, 2.0, 3.0))).unwrap(),
            Vector3::new(1.0, 2.0, 3.0)
        );
        assert_eq!(vee(&Matrix3::zeros()).unwrap(), Vector3::zeros());
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..100 {
            let v = Vector3::new(rng.random(), rng.random(), rng.random()) * 10.0;
            assert_relative_eq!(vee(&hat(&v)).unwrap(), v, epsilon = 1e-13);
        }
    }

    #[test]
    fn vee_rejects_non_skew() {
        let mut m = hat(&Vector3::new(1.0, 2.0, 3.0));
        m[(0, 0)] = 1e-6;
        assert!(matches!(vee(&m), Err(Error::NotAntisymmetric { .. })));
    }

    #[test]
    fn exp_basics() {
        assert_relative_eq!(
            *exp_so3(&Vector3::zeros()).matrix(),
            Matrix3::identity()
        );
        let half_turn = exp_so3(&(PI * e(0)));
        assert_relative_eq!(
            *half_turn.matrix(),
            Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn exp_trace_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let eta = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            ) * 6.0;
            let r = exp_so3(&eta);
            assert_relative_eq!(
                r.matrix().trace(),
                1.0 + 2.0 * eta.norm().cos(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn log_basics() {
        assert_relative_eq!(log_so3(&Rotation::identity()), Vector3::zeros());
        let v = 0.3 * e(1);
        assert_relative_eq!(log_so3(&exp_so3(&v)), v, epsilon = 1e-12);
        assert_relative_eq!(log_so3(&exp_so3(&(PI * e(0)))).norm(), PI, epsilon = 1e-9);
    }

    #[test]
    fn log_near_pi_round_trips() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..200 {
            let axis = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            )
            .normalize();
            for theta in [PI - 1e-3, PI - 1e-7, PI] {
                let r = exp_so3(&(theta * axis));
                let back = exp_so3(&log_so3(&r));
                assert!(
                    (back.matrix() - r.matrix()).norm() < 1e-9,
                    "round trip defect {:.2e} at theta {theta}",
                    (back.matrix() - r.matrix()).norm()
                );
            }
        }
    }

    #[test]
    fn proper_svd_examples() {
        let d = proper_svd(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)));
        assert_eq!(d.s, [1.0, 1.0, -1.0]);
        assert_relative_eq!(*d.u.matrix(), Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(*d.v.matrix(), Matrix3::identity(), epsilon = 1e-12);

        let z = proper_svd(&Matrix3::zeros());
        assert_eq!(z.s, [0.0; 3]);
        assert_relative_eq!(*z.u.matrix(), Matrix3::identity());
        assert_relative_eq!(*z.v.matrix(), Matrix3::identity());
    }

    #[test]
    fn proper_svd_recovers_singular_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q0 = random_rotation(&mut rng);
            let q1 = random_rotation(&mut rng);
            let f = q0.matrix()
                * Matrix3::from_diagonal(&Vector3::new(5.0, 2.0, 1.0))
                * q1.matrix().transpose();
            let d = proper_svd(&f);
            assert_relative_eq!(d.s[0], 5.0, epsilon = 1e-10);
            assert_relative_eq!(d.s[1], 2.0, epsilon = 1e-10);
            assert_relative_eq!(d.s[2].abs(), 1.0, epsilon = 1e-10);
            assert_relative_eq!(d.reconstruct(), f, epsilon = 1e-10);
            assert_relative_eq!(d.u.matrix().determinant(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(d.v.matrix().determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn proper_svd_negative_determinant() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..100 {
            let q0 = random_rotation(&mut rng);
            let f = q0.matrix() * Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, -1.5));
            let d = proper_svd(&f);
            assert!(d.s[2] < 0.0);
            assert_relative_eq!(d.s[2], -1.5, epsilon = 1e-10);
            assert_relative_eq!(d.reconstruct(), f, epsilon = 1e-10);
            assert_relative_eq!(d.u.matrix().determinant(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(d.v.matrix().determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn quaternion_conversion() {
        let q = Quaternion::new(Vector3::zeros(), 1.0).unwrap();
        assert_relative_eq!(*quat_to_rotation(&q).matrix(), Matrix3::identity());
        let q = Quaternion::new(e(0), 0.0).unwrap();
        assert_relative_eq!(
            *quat_to_rotation(&q).matrix(),
            Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn quaternion_antipodal_identification() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            );
            let s: f64 = rng.random::<f64>() - 0.5;
            let norm = (v.norm_squared() + s * s).sqrt();
            let q = Quaternion::new(v / norm, s / norm).unwrap();
            let nq = Quaternion::new(-q.vector, -q.scalar).unwrap();
            assert_relative_eq!(
                *quat_to_rotation(&q).matrix(),
                *quat_to_rotation(&nq).matrix(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn quaternion_rejects_non_unit() {
        assert!(Quaternion::new(e(0), 0.5).is_err());
    }

    #[test]
    fn uniform_samples_are_rotations_with_zero_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 100_000;
        let mut mean = Matrix3::zeros();
        for _ in 0..n {
            let r = sample_uniform(&mut rng);
            mean += r.matrix();
        }
        mean /= n as f64;
        let tol = 3.0 / (n as f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                assert!(mean[(i, j)].abs() < tol, "mean entry {}", mean[(i, j)]);
            }
        }
    }

    #[test]
    fn uniform_angle_distribution_matches_haar_cdf() {
        // Prob[angle <= t] = (t - sin t)/pi for the uniform distribution.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let n = 100_000;
        let thresholds = [0.5, 1.5, 2.5, 3.0];
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let r = sample_uniform(&mut rng);
            let a = r.angle();
            for (k, t) in thresholds.iter().enumerate() {
                if a <= *t {
                    counts[k] += 1;
                }
            }
        }
        for (k, t) in thresholds.iter().enumerate() {
            let expected = (t - t.sin()) / PI;
            let se = (expected * (1.0 - expected) / n as f64).sqrt();
            let got = counts[k] as f64 / n as f64;
            assert!(
                (got - expected).abs() < 4.0 * se + 1e-9,
                "cdf at {t}: got {got}, expected {expected}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn exp_log_round_trip(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() < PI - 1e-6);
            let r = exp_so3(&v);
            // exp lands on the group
            let defect = (r.matrix().transpose() * r.matrix() - Matrix3::identity()).norm();
            prop_assert!(defect < 1e-12);
            prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
            let back = log_so3(&r);
            prop_assert!((back - v).norm() < 1e-9);
        }

        #[test]
        fn hat_vee_round_trip(x in -100.0f64..100.0, y in -100.0f64..100.0, z in -100.0f64..100.0) {
            let v = Vector3::new(x, y, z);
            let back = vee(&hat(&v)).unwrap();
            prop_assert!((back - v).norm() <= 1e-12 * (1.0 + v.norm()));
        }
    }
}
