//! Geometry of the human pose space.
//!
//! A pose is a point on the product manifold `(R^3 x S^3)^J`: every joint
//! contributes a position and a unit orientation quaternion. Position
//! factors are flat; the quaternion factor carries the sphere metric, so
//! tangent norms of the orientation part are arc lengths on `S^3`
//! (`||Log_p(q)|| = arccos <p, q>`, at most `pi/2` after identifying
//! antipodal quaternions). Exp/log maps, geodesic distances, Karcher means
//! and tangent-space covariances built here are the primitives every other
//! module works with.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tangent norms below this are treated as zero in exp/log maps.
const EPS_NORM: f64 = 1e-14;

/// Quaternion norms below this are rejected as degenerate.
pub const MIN_QUAT_NORM: f64 = 1e-9;

/// Default convergence tolerance for Karcher mean iterations.
pub const KARCHER_TOL: f64 = 1e-9;

/// Default iteration cap for Karcher mean computations.
pub const KARCHER_MAX_ITER: usize = 100;

/// Default diagonal loading added to sample covariances.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

/// Unit quaternion, scalar part first. Stored normalized; construction
/// from raw components renormalizes and rejects near-zero norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    /// Builds a unit quaternion from raw components, renormalizing.
    /// Returns `None` when the norm is too close to zero or non-finite.
    /// Components already unit to machine precision are stored verbatim,
    /// keeping serialization round-trips byte-exact.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < MIN_QUAT_NORM {
            return None;
        }
        if (norm - 1.0).abs() <= 1e-12 {
            return Some(Self { w, x, y, z });
        }
        Some(Self {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Rotation of `angle` radians about `axis` (half-angle construction).
    /// A near-zero axis yields the identity.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < EPS_NORM {
            return Self::identity();
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let u = axis * (s / n);
        Self {
            w: c,
            x: u.x,
            y: u.y,
            z: u.z,
        }
    }

    /// Four-dimensional dot product with another quaternion.
    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    fn renormalized(self) -> Self {
        let norm = self.dot(&self).sqrt();
        Self {
            w: self.w / norm,
            x: self.x / norm,
            y: self.y / norm,
            z: self.z / norm,
        }
    }

    /// Rotates a 3-vector by this quaternion.
    pub fn rotate(&self, v: Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(&v);
        v + self.w * t + u.cross(&t)
    }
}

impl std::ops::Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
        .renormalized()
    }
}

impl std::ops::Neg for UnitQuaternion {
    type Output = UnitQuaternion;

    fn neg(self) -> UnitQuaternion {
        UnitQuaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = String;

    fn try_from(q: [f64; 4]) -> std::result::Result<Self, String> {
        UnitQuaternion::new(q[0], q[1], q[2], q[3])
            .ok_or_else(|| "quaternion norm too close to zero".to_string())
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> [f64; 4] {
        [q.w, q.x, q.y, q.z]
    }
}

/// Logarithmic map on S^3 at `base`, with antipodes identified: `q` is
/// sign-flipped into the hemisphere of `base` first, so the returned
/// tangent norm equals the arc length `arccos |<base, q>|`, at most pi/2.
pub fn quat_log(base: UnitQuaternion, q: UnitQuaternion) -> Vector3<f64> {
    let q = if base.dot(&q) < 0.0 { -q } else { q };
    let r = base.conjugate() * q;
    let vec = Vector3::new(r.x, r.y, r.z);
    let vnorm = vec.norm();
    if vnorm < EPS_NORM {
        return Vector3::zeros();
    }
    let theta = vnorm.atan2(r.w);
    vec * (theta / vnorm)
}

/// Exponential map on S^3 at `base`: follows the geodesic with initial
/// velocity `v` for arc length `||v||`. Inverse of [`quat_log`] for
/// `||v|| < pi/2`.
pub fn quat_exp(base: UnitQuaternion, v: Vector3<f64>) -> UnitQuaternion {
    let theta = v.norm();
    if theta < EPS_NORM {
        return base;
    }
    let (s, c) = theta.sin_cos();
    let u = v * (s / theta);
    base * UnitQuaternion {
        w: c,
        x: u.x,
        y: u.y,
        z: u.z,
    }
}

/// Geodesic distance between orientations: `arccos |<p, q>|`. Small
/// angles go through the chordal distance and `asin`, which stays
/// accurate where `acos` loses half the significant digits.
pub fn quat_distance(p: UnitQuaternion, q: UnitQuaternion) -> f64 {
    let dot = p.dot(&q);
    let adot = dot.abs().clamp(0.0, 1.0);
    if adot < 0.7 {
        return adot.acos();
    }
    let q = if dot < 0.0 { -q } else { q };
    let half_chord = ((p.w - q.w).powi(2)
        + (p.x - q.x).powi(2)
        + (p.y - q.y).powi(2)
        + (p.z - q.z).powi(2))
    .sqrt()
        / 2.0;
    2.0 * half_chord.clamp(0.0, 1.0).asin()
}

/// One joint of a pose: position in spine-normalized coordinates plus an
/// absolute orientation quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointPoseWire", into = "JointPoseWire")]
pub struct JointPose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion,
}

#[derive(Serialize, Deserialize)]
struct JointPoseWire {
    p: [f64; 3],
    q: [f64; 4],
}

impl TryFrom<JointPoseWire> for JointPose {
    type Error = String;

    fn try_from(w: JointPoseWire) -> std::result::Result<Self, String> {
        Ok(JointPose {
            position: Vector3::new(w.p[0], w.p[1], w.p[2]),
            orientation: UnitQuaternion::try_from(w.q)?,
        })
    }
}

impl From<JointPose> for JointPoseWire {
    fn from(j: JointPose) -> JointPoseWire {
        JointPoseWire {
            p: [j.position.x, j.position.y, j.position.z],
            q: j.orientation.into(),
        }
    }
}

/// A full-body pose: one `R^3 x S^3` factor per joint, in a fixed joint
/// order shared by every pose it is compared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanPose {
    pub joints: Vec<JointPose>,
}

impl HumanPose {
    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// Tangent space dimension: six per joint.
    pub fn tangent_dim(&self) -> usize {
        6 * self.joints.len()
    }

    /// New pose keeping only the joints at `indices`, in the given order.
    pub fn select_joints(&self, indices: &[usize]) -> HumanPose {
        HumanPose {
            joints: indices.iter().map(|&i| self.joints[i]).collect(),
        }
    }
}

/// A tangent vector of the pose manifold, laid out joint-major:
/// `[dp_0, dq_0, dp_1, dq_1, ...]` with three position and three
/// orientation components per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTangent {
    pub coords: DVector<f64>,
}

impl PoseTangent {
    pub fn zeros(joint_count: usize) -> Self {
        Self {
            coords: DVector::zeros(6 * joint_count),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

fn check_joint_match(base: &HumanPose, other: &HumanPose) -> Result<()> {
    if base.joints.len() != other.joints.len() {
        return Err(Error::JointCountMismatch {
            expected: base.joints.len(),
            found: other.joints.len(),
        });
    }
    Ok(())
}

/// Logarithmic map of the product manifold: position differences and
/// per-joint quaternion logs stacked joint-major.
pub fn pose_log(base: &HumanPose, pose: &HumanPose) -> Result<PoseTangent> {
    check_joint_match(base, pose)?;
    let mut coords = DVector::zeros(base.tangent_dim());
    for (j, (b, p)) in base.joints.iter().zip(&pose.joints).enumerate() {
        let dp = p.position - b.position;
        let dq = quat_log(b.orientation, p.orientation);
        coords.rows_mut(6 * j, 3).copy_from(&dp);
        coords.rows_mut(6 * j + 3, 3).copy_from(&dq);
    }
    Ok(PoseTangent { coords })
}

/// Exponential map of the product manifold; inverse of [`pose_log`] while
/// every orientation component stays below pi/2 in norm.
pub fn pose_exp(base: &HumanPose, tangent: &PoseTangent) -> Result<HumanPose> {
    if tangent.dim() != base.tangent_dim() {
        return Err(Error::TangentDimension {
            expected: base.tangent_dim(),
            found: tangent.dim(),
        });
    }
    let joints = base
        .joints
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let dp = Vector3::new(
                tangent.coords[6 * j],
                tangent.coords[6 * j + 1],
                tangent.coords[6 * j + 2],
            );
            let dq = Vector3::new(
                tangent.coords[6 * j + 3],
                tangent.coords[6 * j + 4],
                tangent.coords[6 * j + 5],
            );
            JointPose {
                position: b.position + dp,
                orientation: quat_exp(b.orientation, dq),
            }
        })
        .collect();
    Ok(HumanPose { joints })
}

/// Geodesic distance on the product manifold: Euclidean in the position
/// factors, arc length in the orientation factors.
pub fn geodesic_distance(a: &HumanPose, b: &HumanPose) -> Result<f64> {
    check_joint_match(a, b)?;
    let mut sq = 0.0;
    for (ja, jb) in a.joints.iter().zip(&b.joints) {
        sq += (ja.position - jb.position).norm_squared();
        let dq = quat_distance(ja.orientation, jb.orientation);
        sq += dq * dq;
    }
    Ok(sq.sqrt())
}

/// Result of a Karcher (Fréchet) mean iteration.
#[derive(Debug, Clone)]
pub struct KarcherMean {
    pub pose: HumanPose,
    pub converged: bool,
    pub iterations: usize,
}

/// Intrinsic mean of poses: fixed-point iteration that maps points into
/// the tangent space at the current estimate, averages, and follows the
/// exponential map. Initialized at the first point; stops when the update
/// norm drops below `tol` and reports non-convergence past `max_iter`
/// instead of erroring.
pub fn karcher_mean(points: &[HumanPose], tol: f64, max_iter: usize) -> Result<KarcherMean> {
    let weights = vec![1.0; points.len()];
    karcher_mean_weighted(points, &weights, tol, max_iter)
}

/// Weighted Karcher mean; weights must be non-negative with positive sum.
pub fn karcher_mean_weighted(
    points: &[HumanPose],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<KarcherMean> {
    if points.is_empty() {
        return Err(Error::NotEnoughData(
            "karcher mean of an empty point set".into(),
        ));
    }
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::NotEnoughData(
            "karcher mean weights must be non-negative with positive sum".into(),
        ));
    }
    let mut mean = points[0].clone();
    for iteration in 0..max_iter {
        let mut update = DVector::zeros(mean.tangent_dim());
        for (point, &w) in points.iter().zip(weights) {
            let v = pose_log(&mean, point)?;
            update += v.coords * w;
        }
        update /= total;
        if update.norm() < tol {
            return Ok(KarcherMean {
                pose: mean,
                converged: true,
                iterations: iteration,
            });
        }
        mean = pose_exp(&mean, &PoseTangent { coords: update })?;
    }
    Ok(KarcherMean {
        pose: mean,
        converged: false,
        iterations: max_iter,
    })
}

/// Covariance of pose samples in the tangent space at `mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentCovariance {
    pub matrix: DMatrix<f64>,
}

impl TangentCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let m = &self.matrix;
        for r in 0..m.nrows() {
            for c in (r + 1)..m.ncols() {
                if (m[(r, c)] - m[(c, r)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Sample covariance (1/(n-1) normalization) of the log-mapped points at
/// `mean`, plus `regularization * I` diagonal loading. With fewer than two
/// points the result is the regularization diagonal alone.
pub fn tangent_covariance(
    points: &[HumanPose],
    mean: &HumanPose,
    regularization: f64,
) -> Result<TangentCovariance> {
    let d = mean.tangent_dim();
    let mut m = DMatrix::zeros(d, d);
    if points.len() >= 2 {
        for point in points {
            let v = pose_log(mean, point)?;
            m.syger(1.0, &v.coords, &v.coords, 1.0);
        }
        m /= (points.len() - 1) as f64;
        // syger fills the lower triangle; mirror it.
        for r in 0..d {
            for c in (r + 1)..d {
                m[(r, c)] = m[(c, r)];
            }
        }
    }
    for i in 0..d {
        m[(i, i)] += regularization;
    }
    Ok(TangentCovariance { matrix: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quat_deg_z(deg: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle(Vector3::z(), deg.to_radians())
    }

    #[test]
    fn log_of_quarter_turn_has_arc_length_norm() {
        // 90 degrees about z is the quaternion (cos 45, 0, 0, sin 45);
        // its log at the identity must have norm pi/4 (half the rotation
        // angle, i.e. the arc length on S^3).
        let q = quat_deg_z(90.0);
        assert_relative_eq!(q.w, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        let v = quat_log(UnitQuaternion::identity(), q);
        assert_relative_eq!(v.norm(), std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        assert_relative_eq!(v.z, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn exp_of_z_tangent_gives_quarter_turn() {
        let q = quat_exp(
            UnitQuaternion::identity(),
            Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_4),
        );
        let expected = quat_deg_z(90.0);
        assert_relative_eq!(q.w, expected.w, epsilon = 1e-12);
        assert_relative_eq!(q.z, expected.z, epsilon = 1e-12);
    }

    #[test]
    fn log_norm_equals_arccos_dot() {
        let base = quat_deg_z(31.0);
        let q = UnitQuaternion::new(0.4, -0.3, 0.7, 0.2).unwrap();
        let v = quat_log(base, q);
        assert_relative_eq!(v.norm(), base.dot(&q).abs().acos(), epsilon = 1e-12);
    }

    #[test]
    fn antipodal_quaternions_have_zero_distance() {
        let q = UnitQuaternion::new(0.3, 0.5, -0.4, 0.2).unwrap();
        assert!(quat_distance(q, -q) < 1e-9);
        assert!(quat_log(q, -q).norm() < 1e-9);
    }

    #[test]
    fn quat_log_exp_roundtrip() {
        let base = UnitQuaternion::new(0.9, 0.1, -0.2, 0.3).unwrap();
        let v = Vector3::new(0.4, -0.2, 0.9);
        let back = quat_log(base, quat_exp(base, v));
        assert_relative_eq!(back.x, v.x, epsilon = 1e-12);
        assert_relative_eq!(back.y, v.y, epsilon = 1e-12);
        assert_relative_eq!(back.z, v.z, epsilon = 1e-12);
    }

    fn two_joint_pose(px: f64, deg: f64) -> HumanPose {
        HumanPose {
            joints: vec![
                JointPose {
                    position: Vector3::new(px, 0.0, 0.0),
                    orientation: quat_deg_z(deg),
                },
                JointPose {
                    position: Vector3::new(0.0, px, 1.0),
                    orientation: quat_deg_z(-deg),
                },
            ],
        }
    }

    #[test]
    fn karcher_mean_of_two_symmetric_points_is_midpoint() {
        // Positions (0,0,0)/(2,0,0) with identity orientations and
        // orientations 90 deg about z vs identity: the mean must land at
        // (1,0,0) with a 45 deg rotation (slerp midpoint).
        let a = HumanPose {
            joints: vec![JointPose {
                position: Vector3::new(0.0, 0.0, 0.0),
                orientation: UnitQuaternion::identity(),
            }],
        };
        let b = HumanPose {
            joints: vec![JointPose {
                position: Vector3::new(2.0, 0.0, 0.0),
                orientation: quat_deg_z(90.0),
            }],
        };
        let mean = karcher_mean(&[a, b], KARCHER_TOL, KARCHER_MAX_ITER).unwrap();
        assert!(mean.converged);
        let j = &mean.pose.joints[0];
        assert_relative_eq!(j.position.x, 1.0, epsilon = 1e-8);
        let expected = quat_deg_z(45.0);
        assert_relative_eq!(j.orientation.w, expected.w, epsilon = 1e-8);
        assert_relative_eq!(j.orientation.z, expected.z, epsilon = 1e-8);
    }

    #[test]
    fn karcher_mean_of_single_point_is_that_point() {
        let p = two_joint_pose(0.3, 25.0);
        let mean = karcher_mean(std::slice::from_ref(&p), KARCHER_TOL, KARCHER_MAX_ITER).unwrap();
        assert!(mean.converged);
        assert_eq!(mean.iterations, 0);
        assert!(geodesic_distance(&mean.pose, &p).unwrap() < 1e-12);
    }

    #[test]
    fn karcher_mean_weighted_skews_toward_heavier_point() {
        let a = two_joint_pose(0.0, 0.0);
        let b = two_joint_pose(1.0, 40.0);
        let mean =
            karcher_mean_weighted(&[a, b.clone()], &[1.0, 3.0], KARCHER_TOL, KARCHER_MAX_ITER)
                .unwrap();
        assert_relative_eq!(mean.pose.joints[0].position.x, 0.75, epsilon = 1e-7);
    }

    #[test]
    fn covariance_is_symmetric_regularized_and_matches_flat_computation() {
        let pts: Vec<HumanPose> = [0.0_f64, 0.4, 1.1, 1.7]
            .iter()
            .map(|&x| two_joint_pose(x, 0.0))
            .collect();
        let mean = karcher_mean(&pts, KARCHER_TOL, KARCHER_MAX_ITER).unwrap();
        let reg = 1e-6;
        let cov = tangent_covariance(&pts, &mean.pose, reg).unwrap();
        assert!(cov.is_symmetric(1e-12));
        assert!(cov.min_eigenvalue() >= reg * 0.999);
        // With identity orientations the x-x entry must match the plain
        // sample variance of the x coordinates.
        let xs = [0.0_f64, 0.4, 1.1, 1.7];
        let m = xs.iter().sum::<f64>() / 4.0;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0;
        assert_relative_eq!(cov.matrix[(0, 0)], var + reg, epsilon = 1e-9);
    }

    #[test]
    fn covariance_of_single_point_is_regularization_only() {
        let p = two_joint_pose(0.5, 10.0);
        let cov = tangent_covariance(std::slice::from_ref(&p), &p, 1e-6).unwrap();
        for r in 0..cov.dim() {
            for c in 0..cov.dim() {
                let expected = if r == c { 1e-6 } else { 0.0 };
                assert_relative_eq!(cov.matrix[(r, c)], expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn pose_log_rejects_mismatched_joint_counts() {
        let a = two_joint_pose(0.0, 0.0);
        let b = HumanPose {
            joints: vec![a.joints[0]],
        };
        assert!(matches!(
            pose_log(&a, &b),
            Err(Error::JointCountMismatch { .. })
        ));
    }

    #[test]
    fn zero_norm_quaternion_is_rejected() {
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_none());
        assert!(UnitQuaternion::new(1e-12, 0.0, 0.0, 0.0).is_none());
    }
}
