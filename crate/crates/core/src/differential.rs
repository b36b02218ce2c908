//! Serial and parallel Jacobians, velocity mapping and singularity
//! classification.
//!
//! Differentiating the three link-length constraints in time yields
//! A xdot + B udot = 0 with B diagonal. A is the parallel Jacobian (platform
//! side), B the serial Jacobian (actuator side). Row i of A and entry
//! u_ii of B are built from the chain-point differences of chain i; rows 1-2
//! carry cot(beta) terms from the swing link, so beta = 0 or pi is reported
//! as degenerate rather than evaluated.
//!
//! Singularities: det(B) = 0 means some actuator motion produces no platform
//! motion (a u_ii vanished, a proximal link parallel to Z or chain 3 level
//! with its rail); det(A) = 0 means the platform gains uncontrolled motion
//! (rows of A linearly dependent). Thresholds are applied to row-normalized
//! determinants so the report does not depend on the unit of length.

use crate::kinematics::angle_state;
use crate::model::{
    chain_points_from_fk, ActuatedJoints, AngleState, ChainPoints, PlatformPose, Sign,
    StructuralParams,
};
use crate::kinematics::{forward, FkBranch};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Default row-normalized determinant threshold below which a configuration
/// counts as singular.
pub const DEFAULT_SINGULARITY_TOL: f64 = 1e-8;

/// sin(beta) magnitude below which the cot(beta) entries are undefined.
pub const BETA_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DifferentialError {
    #[error("sin(beta) ~ 0: cot(beta) entries of the parallel Jacobian are undefined")]
    BetaDegenerate,
    #[error("parallel Jacobian nearly singular (normalized |det A| = {margin:.3e})")]
    NearParallelSingularity { margin: f64 },
    #[error("finite-difference stencil left the feasible branch")]
    BranchFlip,
}

/// The two Jacobians of A xdot + B udot = 0 at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPair {
    /// Parallel (platform-side) Jacobian.
    pub a: Matrix3<f64>,
    /// Serial (actuator-side) Jacobian, exactly diagonal.
    pub b: Matrix3<f64>,
    pub det_a: f64,
    pub det_b: f64,
    /// det(A) divided by the product of the row norms of A (Hadamard
    /// normalization, in [-1, 1]).
    pub norm_det_a: f64,
    /// det(B) with each diagonal entry divided by its geometric row scale
    /// (l2, l2, l9), so each factor is a direction cosine.
    pub norm_det_b: f64,
}

impl JacobianPair {
    /// Diagonal of B.
    pub fn u(&self) -> [f64; 3] {
        [self.b[(0, 0)], self.b[(1, 1)], self.b[(2, 2)]]
    }

    /// The input-output velocity map -A^-1 B, if A is invertible.
    pub fn forward_map(&self) -> Option<Matrix3<f64>> {
        self.a.try_inverse().map(|inv| -inv * self.b)
    }
}

fn row(m: &Matrix3<f64>, i: usize) -> Vector3<f64> {
    Vector3::new(m[(i, 0)], m[(i, 1)], m[(i, 2)])
}

/// Builds the Jacobian pair from a configuration's chain geometry.
///
/// The caller is responsible for supplying a consistent configuration (the
/// link-length residuals of `(joints, pose)` below 1e-6); `angles` is the
/// configuration's angle state, e.g. from a forward solve or from
/// [`crate::kinematics::angle_state`].
pub fn jacobians(
    joints: &ActuatedJoints,
    _pose: &PlatformPose,
    params: &StructuralParams,
    angles: &AngleState,
) -> Result<JacobianPair, DifferentialError> {
    if angles.sin_beta.abs() <= BETA_EPS {
        return Err(DifferentialError::BetaDegenerate);
    }
    let chain = chain_points_from_fk(joints, params, angles);
    Ok(jacobians_from_chain(&chain, params, angles))
}

fn jacobians_from_chain(
    chain: &ChainPoints,
    params: &StructuralParams,
    angles: &AngleState,
) -> JacobianPair {
    let cot_beta = angles.cos_beta / angles.sin_beta;
    let dz1 = chain.c[0].z - chain.b[0].z;
    let dz2 = chain.c[1].z - chain.b[1].z;
    let u11 = chain.c[0].y - chain.b[0].y;
    let u22 = chain.c[1].y - chain.b[1].y;
    let u33 = -(chain.c[2].y - chain.b[2].y);
    let e3 = chain.c[2] - chain.b[2];

    let a = Matrix3::new(
        cot_beta * dz1, -u11, -dz1,
        cot_beta * dz2, -u22, -dz2,
        e3.x, e3.y, e3.z,
    );
    let b = Matrix3::from_diagonal(&Vector3::new(u11, u22, u33));

    let det_a = a.determinant();
    let row_norms = row(&a, 0).norm() * row(&a, 1).norm() * row(&a, 2).norm();
    let norm_det_a = if row_norms > 0.0 { det_a / row_norms } else { 0.0 };
    let norm_det_b = (u11 / params.l2) * (u22 / params.l2) * (u33 / params.l9);

    JacobianPair {
        a,
        b,
        det_a,
        det_b: u11 * u22 * u33,
        norm_det_a,
        norm_det_b,
    }
}

/// Convenience: Jacobians of a consistent (pose, joints) pair on sin(beta)
/// branch `v`, reconstructing the angle state internally.
pub fn jacobians_at(
    joints: &ActuatedJoints,
    pose: &PlatformPose,
    params: &StructuralParams,
    v: Sign,
) -> Result<JacobianPair, DifferentialError> {
    let angles =
        angle_state(pose, joints, params, v).map_err(|_| DifferentialError::BetaDegenerate)?;
    jacobians(joints, pose, params, &angles)
}

/// Platform velocity for given joint rates: xdot = -A^-1 B udot.
pub fn velocity_forward(
    jp: &JacobianPair,
    joint_rates: Vector3<f64>,
) -> Result<Vector3<f64>, DifferentialError> {
    if jp.norm_det_a.abs() < DEFAULT_SINGULARITY_TOL {
        return Err(DifferentialError::NearParallelSingularity {
            margin: jp.norm_det_a.abs(),
        });
    }
    let map = jp
        .forward_map()
        .ok_or(DifferentialError::NearParallelSingularity { margin: 0.0 })?;
    Ok(map * joint_rates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityKind {
    Regular,
    Serial,
    Parallel,
    Mixed,
}

impl SingularityKind {
    pub fn is_serial(self) -> bool {
        matches!(self, SingularityKind::Serial | SingularityKind::Mixed)
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, SingularityKind::Parallel | SingularityKind::Mixed)
    }

    pub fn label(self) -> &'static str {
        match self {
            SingularityKind::Regular => "regular",
            SingularityKind::Serial => "serial",
            SingularityKind::Parallel => "parallel",
            SingularityKind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerialCase {
    /// y_C1 = y_B1: link B1C1 parallel to the Z axis.
    U11Zero,
    /// y_C2 = y_B2: link B2C2 parallel to the Z axis.
    U22Zero,
    /// y_C3 = y_B3: chain-3 projections on the Y-Z plane coincide.
    U33Zero,
}

impl SerialCase {
    pub fn label(self) -> &'static str {
        match self {
            SerialCase::U11Zero => "u11_zero",
            SerialCase::U22Zero => "u22_zero",
            SerialCase::U33Zero => "u33_zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParallelCase {
    /// Rows 1-2 of A dependent: Y-Z projections of B1C1 and B2C2 parallel.
    Rows12Dependent,
    /// Rows 1-3 dependent: chain-3 X-Z projection parallel to the swing link.
    Rows13Dependent,
    /// Rows 2-3 dependent; same geometric condition as rows 1-3.
    Rows23Dependent,
    /// det(A) ~ 0 with no pair of rows dependent.
    ThreeRowDependent,
}

impl ParallelCase {
    pub fn label(self) -> &'static str {
        match self {
            ParallelCase::Rows12Dependent => "rows12_dependent",
            ParallelCase::Rows13Dependent => "rows13_dependent",
            ParallelCase::Rows23Dependent => "rows23_dependent",
            ParallelCase::ThreeRowDependent => "three_row_dependent",
        }
    }
}

/// Determinant magnitudes and per-case residuals backing a classification.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityMargins {
    pub det_a_abs: f64,
    pub det_b_abs: f64,
    pub norm_det_a_abs: f64,
    pub norm_det_b_abs: f64,
    /// |u_ii| over its geometric row scale, i = 1..3.
    pub serial: [f64; 3],
    /// Cross-product norms of unit row pairs (1,2), (1,3), (2,3).
    pub parallel_pairs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityReport {
    pub kind: SingularityKind,
    pub serial_cases: Vec<SerialCase>,
    pub parallel_cases: Vec<ParallelCase>,
    pub margins: SingularityMargins,
}

/// Classifies a configuration from its Jacobian pair.
///
/// Serial cases test the normalized diagonal entries of B; parallel cases
/// test pairwise linear dependence of the rows of A (robust against the
/// vanishing denominators of the slope formulations) and fall back to a
/// three-row dependence when det(A) vanishes with all pairs independent.
pub fn classify(jp: &JacobianPair, params: &StructuralParams, tol: f64) -> SingularityReport {
    let u = jp.u();
    let serial_margins = [
        (u[0] / params.l2).abs(),
        (u[1] / params.l2).abs(),
        (u[2] / params.l9).abs(),
    ];
    let mut serial_cases = Vec::new();
    for (margin, case) in serial_margins
        .iter()
        .zip([SerialCase::U11Zero, SerialCase::U22Zero, SerialCase::U33Zero])
    {
        if *margin < tol {
            serial_cases.push(case);
        }
    }

    let unit_rows: Vec<Option<Vector3<f64>>> = (0..3)
        .map(|i| {
            let r = row(&jp.a, i);
            let n = r.norm();
            (n > 0.0).then(|| r / n)
        })
        .collect();
    let pair_margin = |i: usize, j: usize| match (unit_rows[i], unit_rows[j]) {
        (Some(ri), Some(rj)) => ri.cross(&rj).norm(),
        // A zero row makes the pair trivially dependent.
        _ => 0.0,
    };
    let parallel_pairs = [pair_margin(0, 1), pair_margin(0, 2), pair_margin(1, 2)];
    let mut parallel_cases = Vec::new();
    for (margin, case) in parallel_pairs.iter().zip([
        ParallelCase::Rows12Dependent,
        ParallelCase::Rows13Dependent,
        ParallelCase::Rows23Dependent,
    ]) {
        if *margin < tol {
            parallel_cases.push(case);
        }
    }

    let serial_singular = jp.norm_det_b.abs() < tol;
    let parallel_singular = jp.norm_det_a.abs() < tol;
    if parallel_singular && parallel_cases.is_empty() {
        parallel_cases.push(ParallelCase::ThreeRowDependent);
    }

    let kind = match (serial_singular, parallel_singular) {
        (false, false) => SingularityKind::Regular,
        (true, false) => SingularityKind::Serial,
        (false, true) => SingularityKind::Parallel,
        (true, true) => SingularityKind::Mixed,
    };

    SingularityReport {
        kind,
        serial_cases,
        parallel_cases,
        margins: SingularityMargins {
            det_a_abs: jp.det_a.abs(),
            det_b_abs: jp.det_b.abs(),
            norm_det_a_abs: jp.norm_det_a.abs(),
            norm_det_b_abs: jp.norm_det_b.abs(),
            serial: serial_margins,
            parallel_pairs,
        },
    }
}

/// Central-difference Jacobian of the forward map on a fixed branch,
/// d(pose)/d(joints).
///
/// Errors with `BranchFlip` if any stencil point leaves the feasible region
/// of the branch.
pub fn finite_difference_jacobian(
    joints: &ActuatedJoints,
    params: &StructuralParams,
    branch: FkBranch,
    step: f64,
) -> Result<Matrix3<f64>, DifferentialError> {
    let mut jac = Matrix3::zeros();
    for k in 0..3 {
        let mut plus = joints.as_vector();
        let mut minus = joints.as_vector();
        plus[k] += step;
        minus[k] -= step;
        let fp = forward(&ActuatedJoints::from_vector(plus), params, branch);
        let fm = forward(&ActuatedJoints::from_vector(minus), params, branch);
        let (pp, pm) = match (fp.pose, fm.pose) {
            (Some(pp), Some(pm)) => (pp, pm),
            _ => return Err(DifferentialError::BranchFlip),
        };
        let col = (pp.as_vector() - pm.as_vector()) / (2.0 * step);
        jac.set_column(k, &col);
    }
    Ok(jac)
}
