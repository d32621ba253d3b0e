//! Shared brute-force oracles, independent of the library's evaluation
//! paths: a 3-1-3 Euler-angle triple quadrature over the rotation group
//! and a composite plain-Bessel quadrature of the normalizing integral.
// Each test binary compiles this module separately and uses a subset.
#![allow(dead_code)]

use mfso3::special::QuadratureRule;
use mfso3::{Matrix3, Vector3};

/// Everything the triple quadrature produces about `M(diag(s))`, in
/// exponentially scaled form so large concentrations stay finite:
/// `c_bar = e^{-tr S} c`, the scaled derivative integrals
/// `e^{-tr S} dc/ds_i`, and the moments `E[Q_ii]`, `E[Q_ii Q_jj]`.
pub struct EulerOracle {
    pub c_bar: f64,
    pub dc_bar: [f64; 3],
    pub moment: [f64; 3],
    pub second: Matrix3,
}

/// Brute-force integration over the 3-1-3 Euler parameterization
/// `R = Rz(a) Rx(b) Rz(g)` with Haar weight `sin(b)/(8 pi^2)`.
/// Periodic rectangle rules in `a, g`; Gauss-Legendre in `b`.
pub fn euler_oracle(s: [f64; 3], n_angle: usize, n_beta: usize) -> EulerOracle {
    let rule = QuadratureRule::gauss_legendre(n_beta).unwrap();
    let tr: f64 = s.iter().sum();
    let two_pi = 2.0 * std::f64::consts::PI;
    let da = two_pi / n_angle as f64;

    let mut c = 0.0;
    let mut dc = [0.0; 3];
    let mut sec = Matrix3::zeros();
    for (&xb, &wb) in rule.nodes().iter().zip(rule.weights()) {
        // b in [0, pi]
        let b = (xb + 1.0) * std::f64::consts::PI / 2.0;
        let (cb, sb) = (b.cos(), b.sin());
        let w_beta = wb * std::f64::consts::PI / 2.0 * sb;
        for ia in 0..n_angle {
            let a = da * ia as f64;
            let (ca, sa) = (a.cos(), a.sin());
            for ig in 0..n_angle {
                let g = da * ig as f64;
                let (cg, sg) = (g.cos(), g.sin());
                // diagonal of Rz(a) Rx(b) Rz(g)
                let q11 = ca * cg - sa * cb * sg;
                let q22 = -sa * sg + ca * cb * cg;
                let q33 = cb;
                let e = (s[0] * q11 + s[1] * q22 + s[2] * q33 - tr).exp();
                let w = w_beta * e;
                c += w;
                dc[0] += w * q11;
                dc[1] += w * q22;
                dc[2] += w * q33;
                let q = [q11, q22, q33];
                for i in 0..3 {
                    for j in 0..3 {
                        sec[(i, j)] += w * q[i] * q[j];
                    }
                }
            }
        }
    }
    let norm = da * da / (8.0 * std::f64::consts::PI * std::f64::consts::PI);
    c *= norm;
    for v in &mut dc {
        *v *= norm;
    }
    sec *= norm;
    EulerOracle {
        c_bar: c,
        dc_bar: dc,
        moment: [dc[0] / c, dc[1] / c, dc[2] / c],
        second: sec / c,
    }
}

/// Plain (unscaled) one-dimensional quadrature of the normalizing
/// constant: `int_{-1}^{1} (1/2) I0(a(1-u)) I0(b(1+u)) e^{s3 u} du` with
/// `a = (s1-s2)/2`, `b = (s1+s2)/2`, over a uniform composite grid. Only
/// usable while `e^{tr S}` stays in range.
pub fn plain_normalizer(s: [f64; 3], panels: usize, order: usize) -> f64 {
    let rule = QuadratureRule::gauss_legendre(order).unwrap();
    let a = 0.5 * (s[0] - s[1]);
    let b = 0.5 * (s[0] + s[1]);
    let mut total = 0.0;
    for p in 0..panels {
        let lo = -1.0 + 2.0 * p as f64 / panels as f64;
        let hi = -1.0 + 2.0 * (p + 1) as f64 / panels as f64;
        total += rule.integrate_on(lo, hi, |u| {
            0.5 * mfso3::bessel_i0(a * (1.0 - u))
                * mfso3::bessel_i0(b * (1.0 + u))
                * (s[2] * u).exp()
        });
    }
    total
}

/// Random ordered proper singular values with `s1 <= s_max` and a sign
/// choice for `s3`.
pub fn random_ordered_s<R: rand::Rng>(rng: &mut R, s_max: f64, allow_negative: bool) -> [f64; 3] {
    let s1 = s_max * rng.random::<f64>();
    let s2 = s1 * rng.random::<f64>();
    let s3 = if allow_negative {
        s2 * (2.0 * rng.random::<f64>() - 1.0)
    } else {
        s2 * rng.random::<f64>()
    };
    [s1, s2, s3]
}

/// Random rotation matrix pair sandwiching a diagonal: `Q0 diag(s) Q1^T`.
pub fn random_frame_parameter<R: rand::Rng>(rng: &mut R, s: [f64; 3]) -> Matrix3 {
    let q0 = mfso3::sample_uniform(rng);
    let q1 = mfso3::sample_uniform(rng);
    q0.matrix() * Matrix3::from_diagonal(&Vector3::new(s[0], s[1], s[2])) * q1.matrix().transpose()
}
