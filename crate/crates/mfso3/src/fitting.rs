//! Maximum-likelihood / moment-matching recovery of the matrix parameter
//! from a first-moment matrix or from i.i.d. rotation samples.
//!
//! The stationarity condition `E[Q_ii](S) = d_i` is solved in its
//! exponentially scaled form `(1/c_bar) d c_bar/d s_i = d_i - 1` by damped
//! Newton iteration; the Jacobian comes from the second-derivative
//! integrals. The frames `U, V` of the fitted parameter are those of the
//! proper singular value decomposition of the target moment.

use crate::error::Error;
use crate::matrix_fisher::{default_rule, MatrixFisher, NormalizingInfo};
use crate::so3::{proper_svd, Matrix3, Rotation, Vector3};
use crate::special::QuadratureRule;

/// Margin keeping targets strictly inside the feasible set; on its
/// boundary the maximum-likelihood parameter diverges.
const FEASIBILITY_MARGIN: f64 = 1e-9;

/// First moments of rotation distributions fill the convex hull of SO(3),
/// whose ordered diagonal section is the tetrahedron `d1 + d2 - d3 < 1`
/// (a point mass has `d = (1,1,1)`, on the boundary).
fn is_feasible(d: &[f64; 3]) -> bool {
    d[0] + d[1] - d[2] < 1.0 - FEASIBILITY_MARGIN
}

const MAX_ITERATIONS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-10;

/// Outcome of a Newton solve.
#[derive(Debug, Clone, Copy)]
pub struct NewtonSolution {
    pub s: [f64; 3],
    pub iterations: usize,
    pub residual: f64,
    /// False when the fitted singular values contain ties, where the
    /// maximum-likelihood characterization assumes distinct values; the
    /// returned parameter still satisfies the first-order conditions.
    pub distinct: bool,
}

/// A moment-matching problem: target proper singular values of the mean
/// together with its frames.
#[derive(Debug, Clone, Copy)]
pub struct MomentFitProblem {
    d: [f64; 3],
    u: Rotation,
    v: Rotation,
}

impl MomentFitProblem {
    /// Decomposes a first-moment matrix and checks that it lies strictly
    /// inside the feasible set.
    pub fn from_moment(m: &Matrix3) -> Result<Self, Error> {
        let svd = proper_svd(m);
        if !is_feasible(&svd.s) {
            return Err(Error::InfeasibleMoment(svd.s[0], svd.s[1], svd.s[2]));
        }
        Ok(MomentFitProblem {
            d: svd.s,
            u: svd.u,
            v: svd.v,
        })
    }

    pub fn target(&self) -> [f64; 3] {
        self.d
    }

    pub fn frames(&self) -> (&Rotation, &Rotation) {
        (&self.u, &self.v)
    }

    /// Solves for the singular values and assembles the distribution.
    pub fn solve(&self, rule: &QuadratureRule) -> Result<FitResult, Error> {
        let newton = newton_solve_with_rule(self.d, rule)?;
        let s = Vector3::new(newton.s[0], newton.s[1], newton.s[2]);
        let f = self.u.matrix() * Matrix3::from_diagonal(&s) * self.v.matrix().transpose();
        let distribution = MatrixFisher::with_rule(f, rule)?;
        Ok(FitResult {
            distribution,
            newton,
        })
    }
}

/// A fitted distribution plus the solver diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub distribution: MatrixFisher,
    pub newton: NewtonSolution,
}

/// Solves `E[Q_ii](S) = d_i` for ordered feasible `d` with the default
/// quadrature rule.
pub fn newton_solve(d: [f64; 3]) -> Result<NewtonSolution, Error> {
    newton_solve_with_rule(d, default_rule())
}

/// High-concentration starting point: from the Gaussian limit,
/// `1 - d_i ~ (a_j + a_k)/2` with `a_i = 1/(s_j + s_k)`. Returns `None`
/// when the inversion leaves the model's range (strong anisotropy), in
/// which case the caller starts from zero instead.
fn concentrated_init(d: &[f64; 3]) -> Option<[f64; 3]> {
    let t = [2.0 * (1.0 - d[0]), 2.0 * (1.0 - d[1]), 2.0 * (1.0 - d[2])];
    let a = [
        0.5 * (t[1] + t[2] - t[0]),
        0.5 * (t[2] + t[0] - t[1]),
        0.5 * (t[0] + t[1] - t[2]),
    ];
    if a.iter().any(|ai| *ai <= 1e-8) {
        return None;
    }
    let pair = [1.0 / a[0], 1.0 / a[1], 1.0 / a[2]]; // pair[k] = s_i + s_j
    Some([
        0.5 * (pair[1] + pair[2] - pair[0]),
        0.5 * (pair[2] + pair[0] - pair[1]),
        0.5 * (pair[0] + pair[1] - pair[2]),
    ])
}

fn residual(info: &NormalizingInfo, d: &[f64; 3]) -> Vector3 {
    let m = info.moment_diag();
    Vector3::new(m[0] - d[0], m[1] - d[1], m[2] - d[2])
}

/// Damped Newton iteration on the scaled stationarity system. The line
/// search halves the step until the residual norm decreases, which keeps
/// the iteration monotone.
pub fn newton_solve_with_rule(d: [f64; 3], rule: &QuadratureRule) -> Result<NewtonSolution, Error> {
    if !d.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("moment must be finite".into()));
    }
    if d[0] < d[1] - 1e-9 || d[1] < d[2].abs() - 1e-9 {
        return Err(Error::UnorderedSingularValues(d[0], d[1], d[2]));
    }
    if !is_feasible(&d) {
        return Err(Error::InfeasibleMoment(d[0], d[1], d[2]));
    }

    let mut started_from_zero = d[0] <= 0.5;
    let mut s = if started_from_zero {
        [0.0; 3]
    } else {
        concentrated_init(&d).unwrap_or_else(|| {
            started_from_zero = true;
            [0.0; 3]
        })
    };
    let mut info = NormalizingInfo::compute_unchecked(s, rule);
    let mut f = residual(&info, &d);
    let mut iterations = 0;
    while f.amax() > RESIDUAL_TOL {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                residual: f.amax(),
            });
        }
        let c = info.c_bar;
        let g = Vector3::new(info.grad_bar[0], info.grad_bar[1], info.grad_bar[2]);
        let jac = info.hess_bar / c - (g * g.transpose()) / (c * c);
        let step = jac.lu().solve(&(-f)).ok_or(Error::NoConvergence {
            iterations,
            residual: f.amax(),
        })?;
        // backtracking on residual-norm decrease
        let mut t = 1.0;
        let norm0 = f.norm();
        let mut accepted = false;
        while t > 1e-7 {
            let cand = [s[0] + t * step[0], s[1] + t * step[1], s[2] + t * step[2]];
            let cand_info = NormalizingInfo::compute_unchecked(cand, rule);
            let cand_f = residual(&cand_info, &d);
            if cand_f.norm() < norm0 {
                s = cand;
                info = cand_info;
                f = cand_f;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if started_from_zero {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: f.amax(),
                });
            }
            // a poor concentrated start can stall; the descent from zero
            // is globally reliable since the Jacobian is a covariance
            started_from_zero = true;
            s = [0.0; 3];
            info = NormalizingInfo::compute_unchecked(s, rule);
            f = residual(&info, &d);
        }
        iterations += 1;
    }
    let distinct = (s[0] - s[1]).abs() > 1e-9 && (s[1] - s[2]).abs() > 1e-9;
    Ok(NewtonSolution {
        s,
        iterations,
        residual: f.amax(),
        distinct,
    })
}

/// Maximum-likelihood parameter from a first-moment matrix.
pub fn fit_from_moment(m: &Matrix3) -> Result<FitResult, Error> {
    fit_from_moment_with_rule(m, default_rule())
}

pub fn fit_from_moment_with_rule(m: &Matrix3, rule: &QuadratureRule) -> Result<FitResult, Error> {
    MomentFitProblem::from_moment(m)?.solve(rule)
}

/// Maximum-likelihood parameter from i.i.d. rotation samples: arithmetic
/// mean, then moment fit. A single repeated sample has `d = (1,1,1)` and
/// is rejected as infeasible.
pub fn fit_from_samples(samples: &[Rotation]) -> Result<FitResult, Error> {
    fit_from_samples_with_rule(samples, default_rule())
}

pub fn fit_from_samples_with_rule(
    samples: &[Rotation],
    rule: &QuadratureRule,
) -> Result<FitResult, Error> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let mut mean = Matrix3::zeros();
    for r in samples {
        mean += r.matrix();
    }
    mean /= samples.len() as f64;
    fit_from_moment_with_rule(&mean, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_fisher::MatrixFisher;
    use crate::so3::sample_uniform;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn diag(a: f64, b: f64, c: f64) -> Matrix3 {
        Matrix3::from_diagonal(&Vector3::new(a, b, c))
    }

    #[test]
    fn zero_moment_is_uniform_with_zero_iterations() {
        let sol = newton_solve([0.0, 0.0, 0.0]).unwrap();
        assert_eq!(sol.s, [0.0; 3]);
        assert_eq!(sol.iterations, 0);

        let fit = fit_from_moment(&Matrix3::zeros()).unwrap();
        assert_relative_eq!(*fit.distribution.parameter(), Matrix3::zeros());
    }

    #[test]
    fn round_trip_isotropic() {
        let d = MatrixFisher::new(diag(1.0, 1.0, 1.0)).unwrap();
        let m = d.normalizing().moment_diag();
        let sol = newton_solve(m).unwrap();
        for v in sol.s {
            assert_relative_eq!(v, 1.0, epsilon = 1e-8);
        }
        // ties are reported, not rejected
        assert!(!sol.distinct);
        let sol = newton_solve(
            MatrixFisher::new(diag(7.0, 3.0, 1.0))
                .unwrap()
                .normalizing()
                .moment_diag(),
        )
        .unwrap();
        assert!(sol.distinct);
    }

    #[test]
    fn round_trip_through_first_moment() {
        for s in [[10.0, 4.0, 1.0], [100.0, 100.0, 100.0], [30.0, 20.0, -15.0]] {
            let d = MatrixFisher::new(diag(s[0], s[1], s[2])).unwrap();
            let fit = fit_from_moment(&d.first_moment()).unwrap();
            let got = fit.distribution.singular_values();
            for i in 0..3 {
                assert_relative_eq!(got[i], s[i], max_relative = 1e-6, epsilon = 1e-6);
            }
            // the refit moment reproduces the target
            assert_relative_eq!(
                fit.distribution.first_moment(),
                d.first_moment(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn residual_below_tolerance_for_random_feasible_targets() {
        let mut rng = ChaCha12Rng::seed_from_u64(50);
        for _ in 0..100 {
            // draw strictly inside the feasible tetrahedron
            let d1 = 0.97 * rng.random::<f64>();
            let d2 = d1 * rng.random::<f64>();
            let lo = (-d2).max(d1 + d2 - 1.0 + 1e-6);
            let d3 = lo + (d2 - lo) * rng.random::<f64>();
            let sol = newton_solve([d1, d2, d3]).unwrap();
            assert!(sol.residual < 1e-10, "residual {}", sol.residual);
        }
    }

    #[test]
    fn single_sample_is_infeasible() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let r = sample_uniform(&mut rng);
        match fit_from_samples(&[r]) {
            Err(Error::InfeasibleMoment(d1, _, _)) => assert_relative_eq!(d1, 1.0),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn uniform_samples_fit_near_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(52);
        let samples: Vec<_> = (0..100_000).map(|_| sample_uniform(&mut rng)).collect();
        let fit = fit_from_samples(&samples).unwrap();
        for v in fit.distribution.singular_values() {
            assert!(v.abs() < 0.05, "singular value {v}");
        }
    }

    #[test]
    fn sampled_fit_recovers_parameters() {
        let truth = MatrixFisher::new(diag(5.0, 2.0, 1.0)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        let samples = truth.sample_batch(100_000, &mut rng).rotations;
        let fit = fit_from_samples(&samples).unwrap();
        let got = fit.distribution.singular_values();
        for (g, e) in got.iter().zip([5.0, 2.0, 1.0]) {
            assert!(
                (g - e).abs() / e < 0.05,
                "fitted {g} vs {e} beyond 5 percent"
            );
        }
    }

    #[test]
    fn frames_are_preserved() {
        let mut rng = ChaCha12Rng::seed_from_u64(54);
        for _ in 0..10 {
            let q0 = sample_uniform(&mut rng);
            let q1 = sample_uniform(&mut rng);
            let f = q0.matrix() * diag(8.0, 3.0, 1.0) * q1.matrix().transpose();
            let d = MatrixFisher::new(f).unwrap();
            let fit = fit_from_moment(&d.first_moment()).unwrap();
            assert_relative_eq!(
                *fit.distribution.parameter(),
                f,
                epsilon = 1e-6,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn concentration_grows_along_a_moment_ray() {
        // fitted s1 + s2 increases as d approaches the boundary
        let base = MatrixFisher::new(diag(6.0, 3.0, 1.5)).unwrap();
        let d_star = base.normalizing().moment_diag();
        let mut last = 0.0;
        for t in [0.5, 0.7, 0.9, 0.99] {
            let d = [t * d_star[0], t * d_star[1], t * d_star[2]];
            let sol = newton_solve(d).unwrap();
            let spread = sol.s[0] + sol.s[1];
            assert!(spread > last);
            last = spread;
        }
    }

    #[test]
    fn rejects_infeasible_target() {
        assert!(matches!(
            newton_solve([1.0, 0.2, 0.1]),
            Err(Error::InfeasibleMoment(_, _, _))
        ));
        assert!(matches!(
            newton_solve([1.0 - 1e-12, 0.2, 0.1]),
            Err(Error::InfeasibleMoment(_, _, _))
        ));
        // inside the ordering cone but outside the convex hull of SO(3)
        assert!(matches!(
            newton_solve([0.9, 0.9, 0.5]),
            Err(Error::InfeasibleMoment(_, _, _))
        ));
    }
}
