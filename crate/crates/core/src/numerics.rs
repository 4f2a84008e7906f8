//! Fixed-size linear algebra shared by the kinematics, plant and controller.
//!
//! The Jacobian of the arm is always 3×6 (task axes × tendons), so everything
//! here is sized for that case. The pseudo-inverse inverts the 3×3 Gram matrix
//! `J·Jᵀ` in closed form instead of going through an SVD.

use nalgebra::{Matrix3, SMatrix, Vector3, Vector6};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat3x6 = SMatrix<f64, 3, 6>;
pub type Mat6x3 = SMatrix<f64, 6, 3>;
pub type Mat6 = SMatrix<f64, 6, 6>;

/// Scale-free singularity threshold on `det(JJᵀ) / (trace(JJᵀ)/3)³`.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("J·Jᵀ is numerically singular (normalized determinant {normalized_det:e})")]
    SingularJacobian { normalized_det: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

/// Right pseudo-inverse `Jᵀ(JJᵀ + λI)⁻¹`.
///
/// With `damping == 0` the Gram matrix must be well conditioned; a pose at the
/// workspace boundary returns [`NumericsError::SingularJacobian`].
pub fn right_pseudo_inverse(j: &Mat3x6, damping: f64) -> Result<Mat6x3, NumericsError> {
    right_pseudo_inverse_with(j, damping, SINGULARITY_THRESHOLD)
}

pub fn right_pseudo_inverse_with(j: &Mat3x6, damping: f64, threshold: f64) -> Result<Mat6x3, NumericsError> {
    if !j.iter().all(|v| v.is_finite()) || !damping.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let gram = j * j.transpose() + Mat3::identity() * damping.max(0.0);
    let det = gram.determinant();
    let scale = gram.trace() / 3.0;
    let normalized_det = if scale > 0.0 { det / (scale * scale * scale) } else { 0.0 };
    if damping == 0.0 && !(normalized_det > threshold) {
        return Err(NumericsError::SingularJacobian { normalized_det });
    }
    if det == 0.0 {
        return Err(NumericsError::SingularJacobian { normalized_det });
    }
    Ok(j.transpose() * adjugate_inverse(&gram, det))
}

fn adjugate_inverse(m: &Mat3, det: f64) -> Mat3 {
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)];
    // Transposed cofactor matrix.
    Mat3::new(
        c(1, 1, 2, 2),
        -c(0, 1, 2, 2),
        c(0, 1, 1, 2),
        -c(1, 0, 2, 2),
        c(0, 0, 2, 2),
        -c(0, 0, 1, 2),
        c(1, 0, 2, 1),
        -c(0, 0, 2, 1),
        c(0, 0, 1, 1),
    ) / det
}

/// Velocity-level null-space projector `I − J†J`.
pub fn null_space_projector_velocity(j: &Mat3x6) -> Result<Mat6, NumericsError> {
    let pinv = right_pseudo_inverse(j, 0.0)?;
    Ok(Mat6::identity() - pinv * j)
}

/// Force-level null-space projector `I − (Jᵀ)†Jᵀ`.
///
/// `(Jᵀ)†` is the left pseudo-inverse of `Jᵀ`, i.e. `(JJᵀ)⁻¹J`, so the
/// product is the 6×6 matrix `Jᵀ(JJᵀ)⁻¹J`. Tensions of the form `P_f ζ`
/// produce no task-space force.
pub fn null_space_projector_force(j: &Mat3x6) -> Result<Mat6, NumericsError> {
    let jt_pinv = transpose_pseudo_inverse(j)?;
    Ok(Mat6::identity() - j.transpose() * jt_pinv)
}

/// `(Jᵀ)† = (JJᵀ)⁻¹J`, the map from joint-space forces to task-space force.
pub fn transpose_pseudo_inverse(j: &Mat3x6) -> Result<SMatrix<f64, 3, 6>, NumericsError> {
    Ok(right_pseudo_inverse(j, 0.0)?.transpose())
}

/// Central-difference Jacobian of `f` at `at`, one column per input.
pub fn finite_difference_jacobian<F, E>(mut f: F, at: &Vec6, h: f64) -> Result<Mat3x6, E>
where
    F: FnMut(&Vec6) -> Result<Vec3, E>,
    E: From<NumericsError>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(NumericsError::InvalidStep(h).into());
    }
    let mut jac = Mat3x6::zeros();
    for i in 0..6 {
        let mut plus = *at;
        let mut minus = *at;
        plus[i] += h;
        minus[i] -= h;
        let column = (f(&plus)? - f(&minus)?) / (2.0 * h);
        jac.set_column(i, &column);
    }
    Ok(jac)
}
