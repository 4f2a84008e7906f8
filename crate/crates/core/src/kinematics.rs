//! Piecewise-constant-curvature kinematics of the two-segment, six-tendon arm.
//!
//! Tendons 1–3 end at the distal disk of segment 1; tendons 4–6 pass through
//! segment 1 and end at the distal disk of segment 2. A segment bent with
//! curvature `κ` in the plane at angle `φ` changes the length of a tendon at
//! angle `θ` by `−ℓκd·cos(θ − φ)`.
//!
//! Internally each segment is described by its curvature vector
//! `(κx, κy) = κ(cos φ, sin φ)` and its arc length. Positions and rotations are
//! smooth in those coordinates, including the straight pose, and the
//! coordinates themselves are rational functions of the tendon lengths. The
//! analytic Jacobian is the product of the two derivative blocks.

use std::f64::consts::{FRAC_PI_3, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Mat3, Mat3x6, Vec3, Vec6};

pub const SEGMENTS: usize = 2;
pub const TENDONS: usize = 6;
pub const TENDONS_PER_SEGMENT: usize = 3;

/// Below this bending angle `κℓ` the arc terms switch to their power series.
const SERIES_SWITCH: f64 = 0.1;
/// Bending angle below which [`JacobianEval::near_straight`] is raised.
pub const NEAR_STRAIGHT_BENDING: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("segment {segment}: tendon lengths imply κ·d = {kappa_d:.4} ≥ 1")]
    InconsistentLengths { segment: usize, kappa_d: f64 },
    #[error("tendon {tendon} has non-positive or non-finite length {length}")]
    InvalidLength { tendon: usize, length: f64 },
    #[error("segment {segment}: invalid arc ({reason})")]
    InvalidArc { segment: usize, reason: &'static str },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// Geometric constants of the arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotGeometry {
    /// Backbone length of each segment (m).
    pub segment_lengths: [f64; SEGMENTS],
    /// Distance from the backbone to every tendon (m).
    pub pitch_radius: f64,
    /// Angle of the first tendon of each segment (rad); the other two follow
    /// at +120° and +240°.
    pub tendon_offsets: [f64; SEGMENTS],
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self { segment_lengths: [0.254, 0.254], pitch_radius: 0.035, tendon_offsets: [0.0, 0.0] }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (j, &len) in self.segment_lengths.iter().enumerate() {
            if !(len > 0.0) || !len.is_finite() {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "segment {} length must be positive, got {len}",
                    j + 1
                )));
            }
        }
        if !(self.pitch_radius > 0.0) || !self.pitch_radius.is_finite() {
            return Err(KinematicsError::InvalidGeometry(format!(
                "pitch radius must be positive, got {}",
                self.pitch_radius
            )));
        }
        if !self.tendon_offsets.iter().all(|o| o.is_finite()) {
            return Err(KinematicsError::InvalidGeometry("tendon offsets must be finite".into()));
        }
        Ok(())
    }

    /// Angle of tendon `k` (0-based, 0..6) in its segment's disk frame.
    pub fn tendon_angle(&self, tendon: usize) -> f64 {
        let segment = tendon / TENDONS_PER_SEGMENT;
        let k = tendon % TENDONS_PER_SEGMENT;
        self.tendon_offsets[segment] + 2.0 * FRAC_PI_3 * k as f64
    }

    /// Sum of backbone lengths, used as the workspace radius.
    pub fn total_length(&self) -> f64 {
        self.segment_lengths.iter().sum()
    }

    /// Tendon lengths of the straight arm.
    pub fn straight_lengths(&self) -> TendonLengths {
        let [l1, l2] = self.segment_lengths;
        TendonLengths(Vec6::new(l1, l1, l1, l1 + l2, l1 + l2, l1 + l2))
    }
}

/// Constant-curvature arc of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentArc {
    pub kappa: f64,
    pub phi: f64,
    pub ell: f64,
}

impl SegmentArc {
    pub fn straight(ell: f64) -> Self {
        Self { kappa: 0.0, phi: 0.0, ell }
    }

    /// Builds an arc from its curvature vector, normalizing `φ` into `(−π, π]`.
    pub fn from_curvature_vector(kx: f64, ky: f64, ell: f64) -> Self {
        let kappa = kx.hypot(ky);
        let phi = if kappa == 0.0 { 0.0 } else { normalize_angle(ky.atan2(kx)) };
        Self { kappa, phi, ell }
    }

    pub fn curvature_vector(&self) -> (f64, f64) {
        (self.kappa * self.phi.cos(), self.kappa * self.phi.sin())
    }

    pub fn bending_angle(&self) -> f64 {
        self.kappa * self.ell
    }

    fn check(&self, segment: usize, d: f64) -> Result<(), KinematicsError> {
        if !(self.ell > 0.0) || !self.ell.is_finite() {
            return Err(KinematicsError::InvalidArc { segment, reason: "arc length must be positive" });
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() || !self.phi.is_finite() {
            return Err(KinematicsError::InvalidArc { segment, reason: "curvature must be finite and non-negative" });
        }
        if self.kappa * d >= 1.0 {
            return Err(KinematicsError::InconsistentLengths { segment, kappa_d: self.kappa * d });
        }
        Ok(())
    }
}

fn normalize_angle(a: f64) -> f64 {
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Six tendon lengths (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendonLengths(pub Vec6);

impl TendonLengths {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (i, &l) in self.0.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(KinematicsError::InvalidLength { tendon: i + 1, length: l });
            }
        }
        Ok(())
    }
}

/// Curvature-vector description of one segment: `(κx, κy, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bend {
    kx: f64,
    ky: f64,
    ell: f64,
}

/// Solves one segment from the three lengths routed over it.
///
/// Returns the bend and the gradient of `(κx, κy, ℓ)` with respect to the
/// three residual lengths.
fn solve_segment(residual: [f64; 3], angles: [f64; 3], d: f64) -> (Bend, [[f64; 3]; 3]) {
    let sum: f64 = residual.iter().sum();
    let mean = sum / 3.0;
    // Deviations from the mean, so equal lengths give exactly zero curvature.
    let cx: f64 = residual.iter().zip(angles).map(|(l, t)| (l - mean) * t.cos()).sum();
    let cy: f64 = residual.iter().zip(angles).map(|(l, t)| (l - mean) * t.sin()).sum();
    let kx = -2.0 * cx / (d * sum);
    let ky = -2.0 * cy / (d * sum);
    let ell = mean;
    let mut grad = [[0.0; 3]; 3];
    for (i, t) in angles.iter().enumerate() {
        grad[0][i] = -2.0 * t.cos() / (d * sum) + 2.0 * cx / (d * sum * sum);
        grad[1][i] = -2.0 * t.sin() / (d * sum) + 2.0 * cy / (d * sum * sum);
        grad[2][i] = 1.0 / 3.0;
    }
    (Bend { kx, ky, ell }, grad)
}

fn segment_angles(geom: &RobotGeometry, segment: usize) -> [f64; 3] {
    std::array::from_fn(|k| geom.tendon_angle(segment * TENDONS_PER_SEGMENT + k))
}

/// Length a segment adds to a tendon at angle `theta` routed over it.
fn routed_length(bend: &Bend, theta: f64, d: f64) -> f64 {
    bend.ell * (1.0 - d * (bend.kx * theta.cos() + bend.ky * theta.sin()))
}

/// Decomposes the lengths into per-segment bends plus `∂(κx,κy,ℓ)/∂L`.
fn decompose(l: &TendonLengths, geom: &RobotGeometry) -> Result<([Bend; 2], [[f64; 6]; 6]), KinematicsError> {
    l.validate()?;
    let d = geom.pitch_radius;
    let a1 = segment_angles(geom, 0);
    let a2 = segment_angles(geom, 1);
    let (b1, g1) = solve_segment([l.0[0], l.0[1], l.0[2]], a1, d);
    check_bend(&b1, 0, d)?;

    // The proximal contribution to each distal tendon is linear in l1..l3:
    // ∂c_k/∂l_i = 1/3 + (2/3)·cos(θ_i − θ_k).
    let residual: [f64; 3] = std::array::from_fn(|k| l.0[3 + k] - routed_length(&b1, a2[k], d));
    let (b2, g2) = solve_segment(residual, a2, d);
    check_bend(&b2, 1, d)?;

    let mut dq = [[0.0; 6]; 6];
    for r in 0..3 {
        for i in 0..3 {
            dq[r][i] = g1[r][i];
            dq[3 + r][3 + i] = g2[r][i];
            let mut via_residual = 0.0;
            for k in 0..3 {
                let dc = 1.0 / 3.0 + 2.0 / 3.0 * (a1[i] - a2[k]).cos();
                via_residual -= g2[r][k] * dc;
            }
            dq[3 + r][i] = via_residual;
        }
    }
    Ok(([b1, b2], dq))
}

fn check_bend(b: &Bend, segment: usize, d: f64) -> Result<(), KinematicsError> {
    if !(b.ell > 0.0) {
        return Err(KinematicsError::InvalidArc { segment, reason: "arc length must be positive" });
    }
    let kappa_d = b.kx.hypot(b.ky) * d;
    if !(kappa_d < 1.0) {
        return Err(KinematicsError::InconsistentLengths { segment, kappa_d });
    }
    Ok(())
}

/// Recovers both segment arcs from the six tendon lengths.
pub fn lengths_to_arcs(l: &TendonLengths, geom: &RobotGeometry) -> Result<[SegmentArc; 2], KinematicsError> {
    let (bends, _) = decompose(l, geom)?;
    Ok(bends.map(|b| SegmentArc::from_curvature_vector(b.kx, b.ky, b.ell)))
}

/// Tendon lengths produced by the given arcs.
pub fn arcs_to_lengths(arcs: &[SegmentArc; 2], geom: &RobotGeometry) -> Result<TendonLengths, KinematicsError> {
    let d = geom.pitch_radius;
    for (j, arc) in arcs.iter().enumerate() {
        arc.check(j, d)?;
    }
    let mut out = Vec6::zeros();
    for i in 0..TENDONS {
        let theta = geom.tendon_angle(i);
        let last = i / TENDONS_PER_SEGMENT;
        out[i] = arcs[..=last].iter().map(|a| a.ell * (1.0 - a.kappa * d * (theta - a.phi).cos())).sum();
    }
    Ok(TendonLengths(out))
}

/// Arc shape functions `A = (1 − cos κℓ)/κ²`, `B = sin(κℓ)/κ` and their
/// derivatives with respect to `w = κ²` and `ℓ`.
#[derive(Debug, Clone, Copy)]
struct ArcTerms {
    a: f64,
    b: f64,
    cos_u: f64,
    da_dw: f64,
    db_dw: f64,
}

impl ArcTerms {
    fn new(w: f64, ell: f64) -> Self {
        let kappa = w.sqrt();
        let u = kappa * ell;
        if u < SERIES_SWITCH {
            let u2 = u * u;
            let l2 = ell * ell;
            // Alternating series truncated after the u⁸ term.
            let a = l2 * (0.5 - u2 * (1.0 / 24.0 - u2 * (1.0 / 720.0 - u2 * (1.0 / 40320.0 - u2 / 3628800.0))));
            let b = ell * (1.0 - u2 * (1.0 / 6.0 - u2 * (1.0 / 120.0 - u2 * (1.0 / 5040.0 - u2 / 362880.0))));
            let da_dw = l2 * l2 * (-1.0 / 24.0 + u2 * (1.0 / 360.0 - u2 * (1.0 / 13440.0 - u2 / 907200.0)));
            let db_dw = l2 * ell * (-1.0 / 6.0 + u2 * (1.0 / 60.0 - u2 * (1.0 / 1680.0 - u2 / 90720.0)));
            Self { a, b, cos_u: u.cos(), da_dw, db_dw }
        } else {
            let (s, c) = u.sin_cos();
            let half = (0.5 * u).sin();
            let a = 2.0 * half * half / w;
            let b = s / kappa;
            let da_dw = ell * s / (2.0 * w * kappa) - a / w;
            let db_dw = ell * c / (2.0 * w) - s / (2.0 * w * kappa);
            Self { a, b, cos_u: c, da_dw, db_dw }
        }
    }
}

/// Tip offset and rotation of one segment in its base frame.
fn segment_transform(b: &Bend) -> (Vec3, Mat3) {
    let w = b.kx * b.kx + b.ky * b.ky;
    let t = ArcTerms::new(w, b.ell);
    let (kx, ky) = (b.kx, b.ky);
    let p = Vec3::new(kx * t.a, ky * t.a, t.b);
    let r = Mat3::new(
        1.0 - kx * kx * t.a,
        -kx * ky * t.a,
        kx * t.b,
        -kx * ky * t.a,
        1.0 - ky * ky * t.a,
        ky * t.b,
        -kx * t.b,
        -ky * t.b,
        1.0 - w * t.a,
    );
    (p, r)
}

/// Derivatives of the segment transform with respect to `(κx, κy, ℓ)`.
fn segment_transform_derivatives(b: &Bend) -> ([Vec3; 3], [Mat3; 3]) {
    let w = b.kx * b.kx + b.ky * b.ky;
    let t = ArcTerms::new(w, b.ell);
    let (kx, ky) = (b.kx, b.ky);
    // (∂A, ∂B) along κx, κy, ℓ.
    let da = [2.0 * kx * t.da_dw, 2.0 * ky * t.da_dw, t.b];
    let db = [2.0 * kx * t.db_dw, 2.0 * ky * t.db_dw, t.cos_u];
    let dkx = [1.0, 0.0, 0.0];
    let dky = [0.0, 1.0, 0.0];
    let dw = [2.0 * kx, 2.0 * ky, 0.0];
    let mut dp = [Vec3::zeros(); 3];
    let mut dr = [Mat3::zeros(); 3];
    for m in 0..3 {
        dp[m] = Vec3::new(dkx[m] * t.a + kx * da[m], dky[m] * t.a + ky * da[m], db[m]);
        let xx = 2.0 * kx * dkx[m] * t.a + kx * kx * da[m];
        let xy = (dkx[m] * ky + kx * dky[m]) * t.a + kx * ky * da[m];
        let yy = 2.0 * ky * dky[m] * t.a + ky * ky * da[m];
        let xb = dkx[m] * t.b + kx * db[m];
        let yb = dky[m] * t.b + ky * db[m];
        let ww = dw[m] * t.a + w * da[m];
        dr[m] = Mat3::new(-xx, -xy, xb, -xy, -yy, yb, -xb, -yb, -ww);
    }
    (dp, dr)
}

fn tip_from_bends(bends: &[Bend; 2]) -> Vec3 {
    let (p1, r1) = segment_transform(&bends[0]);
    let (p2, _) = segment_transform(&bends[1]);
    p1 + r1 * p2
}

/// End-effector position of the given arcs.
pub fn tip_position(arcs: &[SegmentArc; 2]) -> Vec3 {
    let bends = arcs.map(|a| {
        let (kx, ky) = a.curvature_vector();
        Bend { kx, ky, ell: a.ell }
    });
    tip_from_bends(&bends)
}

/// End-effector position for the given tendon lengths.
pub fn forward_kinematics(l: &TendonLengths, geom: &RobotGeometry) -> Result<Vec3, KinematicsError> {
    let (bends, _) = decompose(l, geom)?;
    Ok(tip_from_bends(&bends))
}

/// Analytic Jacobian together with a flag for nearly straight segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianEval {
    /// `∂X/∂L`, 3 task axes × 6 tendons.
    pub matrix: Mat3x6,
    /// Set when some segment has `κℓ` below [`NEAR_STRAIGHT_BENDING`]; the
    /// arc terms are then evaluated from their power series.
    pub near_straight: bool,
}

/// `J = ∂X/∂L` assembled by the chain rule through the curvature vectors.
pub fn analytic_jacobian(l: &TendonLengths, geom: &RobotGeometry) -> Result<JacobianEval, KinematicsError> {
    let (bends, dq_dl) = decompose(l, geom)?;
    let (_, r1) = segment_transform(&bends[0]);
    let (p2, _) = segment_transform(&bends[1]);
    let (dp1, dr1) = segment_transform_derivatives(&bends[0]);
    let (dp2, _) = segment_transform_derivatives(&bends[1]);

    let mut dx_dq = [Vec3::zeros(); 6];
    for m in 0..3 {
        dx_dq[m] = dp1[m] + dr1[m] * p2;
        dx_dq[3 + m] = r1 * dp2[m];
    }
    let mut matrix = Mat3x6::zeros();
    for col in 0..TENDONS {
        let mut c = Vec3::zeros();
        for (q, dx) in dx_dq.iter().enumerate() {
            c += dx * dq_dl[q][col];
        }
        matrix.set_column(col, &c);
    }
    let near_straight = bends.iter().any(|b| b.kx.hypot(b.ky) * b.ell < NEAR_STRAIGHT_BENDING);
    Ok(JacobianEval { matrix, near_straight })
}

/// Jacobian of the tip position with respect to tendon shortening, `−∂X/∂L`.
///
/// A tendon in tension pulls its segment toward itself and gets shorter, so
/// this is the map whose transpose distributes a task-space force onto
/// tendon tensions.
pub fn actuation_jacobian(l: &TendonLengths, geom: &RobotGeometry) -> Result<JacobianEval, KinematicsError> {
    let mut eval = analytic_jacobian(l, geom)?;
    eval.matrix = -eval.matrix;
    Ok(eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_jacobian, NumericsError};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug)]
    struct E;
    impl From<NumericsError> for E {
        fn from(_: NumericsError) -> Self {
            E
        }
    }

    fn random_arcs(rng: &mut ChaCha8Rng, geom: &RobotGeometry) -> [SegmentArc; 2] {
        let kmax = 0.9 / geom.pitch_radius;
        std::array::from_fn(|j| SegmentArc {
            kappa: rng.gen_range(0.0..kmax.min(10.0)),
            phi: rng.gen_range(-PI..PI),
            ell: geom.segment_lengths[j] * rng.gen_range(0.8..1.2),
        })
    }

    /// Integrates the Cosserat frame ODE `p' = R e_z`, `R' = R [u]×` with RK4.
    fn integrate_tip(arcs: &[SegmentArc; 2], steps: usize) -> Vec3 {
        let mut p = Vec3::zeros();
        let mut r = Mat3::identity();
        for arc in arcs {
            let u = Vec3::new(-arc.kappa * arc.phi.sin(), arc.kappa * arc.phi.cos(), 0.0);
            let skew = u.cross_matrix();
            let h = arc.ell / steps as f64;
            let f = |rm: &Mat3| (rm * Vec3::z(), rm * skew);
            for _ in 0..steps {
                let (p1, r1) = f(&r);
                let (p2, r2) = f(&(r + r1 * (h / 2.0)));
                let (p3, r3) = f(&(r + r2 * (h / 2.0)));
                let (p4, r4) = f(&(r + r3 * h));
                p += (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (h / 6.0);
                r += (r1 + r2 * 2.0 + r3 * 2.0 + r4) * (h / 6.0);
            }
        }
        p
    }

    #[test]
    fn symmetric_lengths_are_straight() {
        let geom = RobotGeometry::default();
        let arcs = lengths_to_arcs(&geom.straight_lengths(), &geom).unwrap();
        let [l1, l2] = geom.segment_lengths;
        assert_eq!(arcs[0], SegmentArc::straight(l1));
        assert!(arcs[1].kappa.abs() < 1e-12 && (arcs[1].ell - l2).abs() < 1e-15);
    }

    #[test]
    fn single_segment_closed_forms() {
        let geom = RobotGeometry::default();
        let l = [0.28, 0.31, 0.31];
        let arcs =
            lengths_to_arcs(&TendonLengths(Vec6::new(l[0], l[1], l[2], l[0] + 0.3, l[1] + 0.3, l[2] + 0.3)), &geom)
                .unwrap();
        let sum: f64 = l.iter().sum();
        let q = l[0] * l[0] + l[1] * l[1] + l[2] * l[2] - l[0] * l[1] - l[0] * l[2] - l[1] * l[2];
        let kappa = 2.0 * q.sqrt() / (geom.pitch_radius * sum);
        let phi = (3f64.sqrt() * (l[2] - l[1])).atan2(l[1] + l[2] - 2.0 * l[0]);
        assert!((arcs[0].kappa - kappa).abs() < 1e-12);
        assert!((arcs[0].phi - phi).abs() < 1e-12);
        assert!((arcs[0].ell - sum / 3.0).abs() < 1e-15);
        let back = arcs_to_lengths(&arcs, &geom).unwrap();
        for i in 0..3 {
            assert!((back.0[i] - l[i]).abs() < 1e-10);
        }
        // Segment 2 is straight.
        assert!(arcs[1].kappa < 1e-10);
    }

    #[test]
    fn excessive_curvature_is_rejected() {
        let geom = RobotGeometry::default();
        let arc = SegmentArc { kappa: 1.2 / geom.pitch_radius, phi: 0.3, ell: 0.3 };
        // Build lengths directly; tendon 1 goes negative-ish but the decomposition sees κd = 1.2.
        let d = geom.pitch_radius;
        let l: [f64; 3] = std::array::from_fn(|k| 0.3 * (1.0 - arc.kappa * d * (geom.tendon_angle(k) - arc.phi).cos()));
        let lengths = TendonLengths(Vec6::new(l[0].abs() + 1e-3, l[1], l[2], 0.6, 0.6, 0.6));
        assert!(lengths_to_arcs(&lengths, &geom).is_err());
        assert!(matches!(
            arcs_to_lengths(&[arc, SegmentArc::straight(0.3)], &geom),
            Err(KinematicsError::InconsistentLengths { segment: 0, .. })
        ));
    }

    #[test]
    fn straight_arm_lengths_and_tip() {
        let geom = RobotGeometry::default();
        let arcs = [SegmentArc::straight(0.254), SegmentArc::straight(0.254)];
        let l = arcs_to_lengths(&arcs, &geom).unwrap();
        assert_eq!(l, geom.straight_lengths());
        let x = forward_kinematics(&l, &geom).unwrap();
        assert!((x - Vec3::new(0.0, 0.0, 0.508)).norm() < 1e-15);
    }

    #[test]
    fn shortest_tendon_faces_bending_plane() {
        let geom = RobotGeometry::default();
        let arc = SegmentArc { kappa: 5.0, phi: geom.tendon_angle(0), ell: 0.3 };
        let l = arcs_to_lengths(&[arc, SegmentArc::straight(0.3)], &geom).unwrap();
        assert!((l.0[0] - 0.3 * (1.0 - 5.0 * 0.035)).abs() < 1e-15);
        assert!(l.0[0] < l.0[1] && l.0[0] < l.0[2]);
    }

    #[test]
    fn quarter_circle_tip() {
        let ell = 0.3;
        let kappa = PI / 2.0 / ell;
        let tip = tip_position(&[SegmentArc { kappa, phi: 0.0, ell }, SegmentArc::straight(1e-300)]);
        let expected = ell * 2.0 / PI;
        assert!((tip.x - expected).abs() < 1e-14);
        assert!(tip.y.abs() < 1e-15);
        assert!((tip.z - expected).abs() < 1e-14);
    }

    #[test]
    fn round_trip_over_random_arcs() {
        let geom = RobotGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let arcs = random_arcs(&mut rng, &geom);
            let back = lengths_to_arcs(&arcs_to_lengths(&arcs, &geom).unwrap(), &geom).unwrap();
            for (a, b) in arcs.iter().zip(&back) {
                assert!((a.kappa - b.kappa).abs() < 1e-10, "{a:?} {b:?}");
                assert!((a.ell - b.ell).abs() < 1e-10);
                let dphi = (a.phi - b.phi).sin().abs();
                assert!(dphi < 1e-10 || a.kappa < 1e-9);
            }
        }
    }

    #[test]
    fn forward_kinematics_matches_frame_integration() {
        let geom = RobotGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let arcs = random_arcs(&mut rng, &geom);
            let l = arcs_to_lengths(&arcs, &geom).unwrap();
            let x = forward_kinematics(&l, &geom).unwrap();
            let oracle = integrate_tip(&arcs, 1000);
            assert!((x - oracle).norm() < 1e-6, "{x} vs {oracle}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let geom = RobotGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let arcs = random_arcs(&mut rng, &geom);
            let l = arcs_to_lengths(&arcs, &geom).unwrap();
            let analytic = analytic_jacobian(&l, &geom).unwrap().matrix;
            let fd = finite_difference_jacobian::<_, E>(
                |v| forward_kinematics(&TendonLengths(*v), &geom).map_err(|_| E),
                &l.0,
                1e-6,
            )
            .unwrap();
            let rel = (analytic - fd).abs().max() / fd.abs().max();
            assert!(rel < 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn straight_pose_jacobian_structure() {
        let geom = RobotGeometry::default();
        let eval = analytic_jacobian(&geom.straight_lengths(), &geom).unwrap();
        assert!(eval.near_straight);
        let j = eval.matrix;
        // Equal increments within a segment only extend the arm. Lengthening
        // tendons 1–3 alone extends segment 1 and shortens segment 2 by the
        // same amount, so the tip does not move at all.
        let seg1: Vec3 = (0..3).map(|i| j.column(i).clone_owned()).sum();
        let seg2: Vec3 = (3..6).map(|i| j.column(i).clone_owned()).sum();
        assert!(seg1.norm() < 1e-12, "{seg1}");
        assert!(seg2.x.abs() < 1e-12 && seg2.y.abs() < 1e-12 && (seg2.z - 1.0).abs() < 1e-12);
        let xdot = j * Vec6::repeat(1e-3);
        assert!(xdot.x.abs() < 1e-15 && xdot.y.abs() < 1e-15);

        let fd = finite_difference_jacobian::<_, E>(
            |v| forward_kinematics(&TendonLengths(*v), &geom).map_err(|_| E),
            &geom.straight_lengths().0,
            1e-6,
        )
        .unwrap();
        assert!((j - fd).abs().max() / fd.abs().max() < 1e-5);
    }

    #[test]
    fn mean_shift_changes_only_arc_length() {
        // An equal increment δ on a segment's tendons leaves its bending plane
        // and total bending angle κℓ unchanged and adds δ to ℓ.
        let geom = RobotGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..200 {
            let arcs = random_arcs(&mut rng, &geom);
            let l = arcs_to_lengths(&arcs, &geom).unwrap();
            let delta = rng.gen_range(-0.02..0.02);
            // Distal segment: shift l4..l6 only.
            let mut distal = l;
            for i in 3..6 {
                distal.0[i] += delta;
            }
            let after = lengths_to_arcs(&distal, &geom).unwrap();
            let before = lengths_to_arcs(&l, &geom).unwrap();
            assert!((after[0].kappa - before[0].kappa).abs() < 1e-9);
            assert!((after[1].ell - before[1].ell - delta).abs() < 1e-12);
            assert!((after[1].bending_angle() - before[1].bending_angle()).abs() < 1e-9);
            assert!((after[1].phi - before[1].phi).sin().abs() < 1e-9);
            // Proximal segment: shift all six, the distal arc is untouched.
            let mut all = l;
            for i in 0..6 {
                all.0[i] += delta;
            }
            let after = lengths_to_arcs(&all, &geom).unwrap();
            assert!((after[0].ell - before[0].ell - delta).abs() < 1e-12);
            assert!((after[0].bending_angle() - before[0].bending_angle()).abs() < 1e-9);
            assert!((after[0].phi - before[0].phi).sin().abs() < 1e-9);
            assert!((after[1].kappa - before[1].kappa).abs() < 1e-9);
            assert!((after[1].ell - before[1].ell).abs() < 1e-12);
        }
    }

    #[test]
    fn tip_stays_inside_reach() {
        let geom = RobotGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let arcs = random_arcs(&mut rng, &geom);
            let x = tip_position(&arcs);
            assert!(x.norm() <= arcs[0].ell + arcs[1].ell + 1e-12);
        }
    }

    #[test]
    fn geometry_validation() {
        let mut g = RobotGeometry::default();
        assert!(g.validate().is_ok());
        g.pitch_radius = 0.0;
        assert!(g.validate().is_err());
    }
}
