//! Modified Bessel functions of the first kind (orders 0 and 1), their
//! exponentially scaled variants, and Gauss-Legendre quadrature on [-1, 1].
//!
//! The scaled forms `exp(-|x|) I_nu(x)` stay finite for arbitrarily large
//! arguments and are the workhorse of every normalizing-constant integral;
//! the plain forms are defined through them and overflow past `|x| ~ 700`.

use crate::error::Error;

/// Power series below this argument, asymptotic expansion above.
const SERIES_CUTOFF: f64 = 16.0;

fn i0_series(ax: f64) -> f64 {
    // sum (x/2)^{2n} / (n!)^2, all terms positive
    let q = 0.25 * ax * ax;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0f64;
    loop {
        n += 1.0;
        term *= q / (n * n);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
    }
}

fn i1_series(ax: f64) -> f64 {
    // (x/2) sum (x/2)^{2n} / (n! (n+1)!)
    let q = 0.25 * ax * ax;
    let mut term = 0.5;
    let mut sum = 0.5;
    let mut n = 0.0f64;
    loop {
        n += 1.0;
        term *= q / (n * (n + 1.0));
        sum += term;
        if term < 1e-17 * sum {
            return ax * sum;
        }
    }
}

/// Asymptotic expansion of `exp(-x) I_nu(x) * sqrt(2 pi x)` for x >> 1,
/// truncated at the smallest term. `mu = 4 nu^2`.
fn scaled_asymptotic(ax: f64, mu: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0;
    let mut k = 0.0f64;
    loop {
        k += 1.0;
        let factor = -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * ax);
        let next = term * factor;
        if next.abs() >= term.abs() || k > 60.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * ax).sqrt()
}

/// Exponentially scaled modified Bessel function `exp(-|x|) I_0(x)`.
/// Finite for all representable arguments; even in `x`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_CUTOFF {
        i0_series(ax) * (-ax).exp()
    } else {
        scaled_asymptotic(ax, 0.0)
    }
}

/// Exponentially scaled modified Bessel function `exp(-|x|) I_1(x)`.
/// Odd in `x`.
pub fn bessel_i1_scaled(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_CUTOFF {
        i1_series(ax) * (-ax).exp()
    } else {
        scaled_asymptotic(ax, 4.0)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Modified Bessel function of the first kind, order 0. Overflows for
/// `|x|` beyond roughly 700; use [`bessel_i0_scaled`] for large arguments.
pub fn bessel_i0(x: f64) -> f64 {
    x.abs().exp() * bessel_i0_scaled(x)
}

/// Modified Bessel function of the first kind, order 1; equals the
/// derivative of [`bessel_i0`].
pub fn bessel_i1(x: f64) -> f64 {
    x.abs().exp() * bessel_i1_scaled(x)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Integrates polynomials of degree `2n - 1` exactly; the nodes are strictly
/// increasing and the weights sum to 2.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds the `n`-point Gauss-Legendre rule, `2 <= n <= 512`.
    ///
    /// Nodes are the roots of the Legendre polynomial `P_n`, found by
    /// Newton iteration from the Chebyshev initial guess; weights are
    /// `2 / ((1 - x^2) P_n'(x)^2)`.
    pub fn gauss_legendre(n: usize) -> Result<Self, Error> {
        if !(2..=512).contains(&n) {
            return Err(Error::InvalidQuadratureOrder { n });
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for k in 0..m {
            // k-th root counted from the right
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[n - 1 - k] = x;
            nodes[k] = -x;
            weights[n - 1 - k] = w;
            weights[k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[-1, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Integrates `f` over `[a, b]` by affine transformation of the rule.
    pub fn integrate_on<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`, by the
/// three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
