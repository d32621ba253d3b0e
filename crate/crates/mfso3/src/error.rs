//! Error type shared across the library.

/// Errors raised by construction, fitting, and filtering operations.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A matrix failed the rotation invariants (orthogonality / determinant).
    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),

    /// Input to `vee` has a symmetric part above tolerance.
    #[error("matrix is not antisymmetric (symmetric part norm {norm:.3e})")]
    NotAntisymmetric { norm: f64 },

    /// A quaternion is not unit length.
    #[error("quaternion norm {norm} is not 1 within 1e-12")]
    NotUnitQuaternion { norm: f64 },

    /// Quadrature order outside the supported range.
    #[error("quadrature order {n} outside supported range 2..=512")]
    InvalidQuadratureOrder { n: usize },

    /// Singular values do not satisfy s1 >= s2 >= |s3|.
    #[error("singular values ({0}, {1}, {2}) violate s1 >= s2 >= |s3| >= 0")]
    UnorderedSingularValues(f64, f64, f64),

    /// A first-moment matrix lies outside the feasible set (d1 >= 1), so no
    /// matrix Fisher distribution reproduces it.
    #[error("infeasible first moment: proper singular values ({0:.12}, {1:.12}, {2:.12})")]
    InfeasibleMoment(f64, f64, f64),

    /// Newton iteration failed to reach the residual tolerance.
    #[error("moment fit did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Requested unscented-transform parameter lies outside the admissible
    /// interval for the given distribution.
    #[error("sigma {sigma} outside admissible interval ({lower}, 1)")]
    SigmaOutOfRange { sigma: f64, lower: f64 },

    /// Generic parameter validation failure.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A filter step failed; carries the step index of the failure.
    #[error("filter step {step}: {source}")]
    FilterStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::FilterStep {
            step,
            source: Box::new(self),
        }
    }
}
