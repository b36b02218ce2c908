//! Closed-form forward and inverse position kinematics.
//!
//! Forward: given the rail positions (y_A1, y_A2, y_A3), the coupler
//! constraint of the planar loop yields cos(alpha) = B / (2 l2) with
//! B = y_A2 - y_A1 - l3, and the long-link constraint |C3 - B3| = l9 reduces
//! to G1 sin(beta) + G2 cos(beta) + G3 = 0, solved in closed form. Two sign
//! choices (m for sin(alpha), n for the beta root) give four branches.
//!
//! Inverse: given the tool point (x, y, z), cos(beta) = (b - d - x) / l6
//! directly, and each rail position follows from its link-length constraint
//! as y_Ai = M_i + w_i sqrt(-L_i - N_i). Sign choices (v, w1, w2, w3) give
//! sixteen branches.
//!
//! A note on the chain-3 offset term: expanding |C3 - B3|^2 = l9^2 with
//! C3 = (x - d, y, z - l8) and B3 = (-b, y_A3, l1) gives the x-difference
//! x_C3 - x_B3 = x + b - d, hence L3 = (x + b - d)^2. This is the form used
//! here; it is the one under which the forward and inverse solutions are
//! mutually consistent (verified by the residual oracle and round-trip
//! tests).

use crate::model::{
    chain_points_from_fk, ActuatedJoints, AngleState, PlatformPose, Sign, StructuralParams,
};
use nalgebra::Vector3;
use std::fmt;
use thiserror::Error;

/// Relative half-width of the clamp band around cos = +-1 and around zero
/// discriminants. Values inside the band are snapped to the boundary;
/// values beyond it are infeasible.
pub const CLAMP_EPS: f64 = 1e-12;

/// Relative tolerance (against squared-length scale) under which a
/// discriminant is clamped to zero instead of being declared negative.
pub const DISC_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum KinematicsError {
    /// |cos| would exceed 1 beyond the clamp band; the loop cannot close.
    #[error("cosine out of range: configuration out of reach")]
    CosOutOfRange,
    /// The beta quadratic has no real root; chain B cannot reach.
    #[error("negative discriminant: chain B cannot close")]
    DiscriminantNegative,
    /// The beta constraint degenerates (all G coefficients vanish), so beta
    /// is indeterminate.
    #[error("degenerate beta constraint: angle indeterminate")]
    DegenerateDenominator,
}

/// Forward branch selector: `m` signs sin(alpha), `n` picks the beta root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FkBranch {
    pub m: Sign,
    pub n: Sign,
}

impl FkBranch {
    /// The assembled branch of the physical prototype.
    pub const PP: FkBranch = FkBranch {
        m: Sign::Plus,
        n: Sign::Plus,
    };

    /// All four branches in enumeration order: (+,+), (+,-), (-,+), (-,-).
    pub const ALL: [FkBranch; 4] = [
        FkBranch { m: Sign::Plus, n: Sign::Plus },
        FkBranch { m: Sign::Plus, n: Sign::Minus },
        FkBranch { m: Sign::Minus, n: Sign::Plus },
        FkBranch { m: Sign::Minus, n: Sign::Minus },
    ];
}

impl fmt::Display for FkBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(m={}, n={})", self.m, self.n)
    }
}

/// Inverse branch selector: `v` signs sin(beta), `w[i]` picks the root for
/// rail i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IkBranch {
    pub v: Sign,
    pub w: [Sign; 3],
}

impl IkBranch {
    /// The branch matching the prototype's assembly: sin(beta) > 0 and the
    /// rails straddling the platform (y_A1 below, y_A2 above).
    pub const PHYSICAL: IkBranch = IkBranch {
        v: Sign::Plus,
        w: [Sign::Minus, Sign::Plus, Sign::Plus],
    };

    /// All sixteen branches, `v` outermost then w1, w2, w3, each +1 before -1.
    pub fn all() -> impl Iterator<Item = IkBranch> {
        Sign::BOTH.into_iter().flat_map(|v| {
            Sign::BOTH.into_iter().flat_map(move |w1| {
                Sign::BOTH.into_iter().flat_map(move |w2| {
                    Sign::BOTH
                        .into_iter()
                        .map(move |w3| IkBranch { v, w: [w1, w2, w3] })
                })
            })
        })
    }
}

impl fmt::Display for IkBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(v={}, w=({}, {}, {}))",
            self.v, self.w[0], self.w[1], self.w[2]
        )
    }
}

/// Feasibility of one forward branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FkStatus {
    Ok,
    /// |cos(alpha)| > 1: rails too far apart (or too close) for the loop.
    CosOutOfRange,
    /// The beta quadratic has no real root.
    DiscriminantNegative,
    /// The beta constraint vanished identically; angle indeterminate.
    BetaDegenerate,
}

impl FkStatus {
    pub fn label(&self) -> &'static str {
        match self {
            FkStatus::Ok => "ok",
            FkStatus::CosOutOfRange => "cos_out_of_range",
            FkStatus::DiscriminantNegative => "discriminant_negative",
            FkStatus::BetaDegenerate => "beta_degenerate",
        }
    }
}

/// One forward solution branch. `pose` and `angles` are present exactly when
/// `status` is `Ok`.
#[derive(Debug, Clone, PartialEq)]
pub struct FkSolution {
    pub branch: FkBranch,
    pub status: FkStatus,
    pub pose: Option<PlatformPose>,
    pub angles: Option<AngleState>,
}

impl FkSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == FkStatus::Ok
    }

    fn infeasible(branch: FkBranch, status: FkStatus) -> Self {
        FkSolution {
            branch,
            status,
            pose: None,
            angles: None,
        }
    }
}

/// Feasibility of one inverse branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkStatus {
    Ok,
    /// |b - d - x| > l6: no real beta.
    BetaCosOutOfRange,
    /// A rail discriminant -L - N is negative; the input would be complex.
    ComplexDiscriminant,
    /// Real joints but y_A2 <= y_A1, impossible on the shared rail side.
    OrderingViolation,
}

impl IkStatus {
    pub fn label(&self) -> &'static str {
        match self {
            IkStatus::Ok => "ok",
            IkStatus::BetaCosOutOfRange => "beta_cos_out_of_range",
            IkStatus::ComplexDiscriminant => "complex_discriminant",
            IkStatus::OrderingViolation => "ordering_violation",
        }
    }
}

/// One inverse solution branch. `joints` is present for `Ok` and for
/// `OrderingViolation` (the values are real, just not assemblable).
#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub branch: IkBranch,
    pub status: IkStatus,
    pub joints: Option<ActuatedJoints>,
}

impl IkSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == IkStatus::Ok
    }
}

/// Error-free transforms for the fold-sensitive expressions.
///
/// Near the square-root boundaries of the inverse solution the joint values
/// depend on quantities like l^2 - q^2 with q close to l; evaluating them
/// in plain f64 loses half the digits of the result. The helpers below keep
/// the rounding error at the scale of the result, so that the remaining
/// round-trip error is dominated by the f64 quantization of the pose
/// itself.
mod exact {
    /// a + b = s + err with err exact (Knuth two-sum).
    #[inline]
    pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    /// a * b = p + err with err exact (via fused multiply-add).
    #[inline]
    pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        (p, a.mul_add(b, -p))
    }

    /// Compensated sum of the terms: hi + lo representation.
    pub fn sum_dd(terms: &[f64]) -> (f64, f64) {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for &t in terms {
            let (s, e) = two_sum(hi, t);
            hi = s;
            lo += e;
        }
        (hi, lo)
    }

    /// l^2 - a^2 - b^2 with the error at the scale of the result, where
    /// a and b are given as hi + lo pairs.
    pub fn diff_of_squares(l: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (l2, le) = two_prod(l, l);
        let (a2, ae) = two_prod(a.0, a.0);
        let (b2, be) = two_prod(b.0, b.0);
        let (s1, c1) = two_sum(l2, -a2);
        let (s2, c2) = two_sum(s1, -b2);
        // First-order cross terms of the lo parts.
        s2 + (c1 + c2 + le - ae - be) - 2.0 * (a.0 * a.1 + b.0 * b.1)
    }
}

/// Clamps `c` into [-1, 1] if it lies within the relative band, else errors.
fn clamp_cos(c: f64) -> Result<f64, KinematicsError> {
    if c.abs() <= 1.0 {
        Ok(c)
    } else if c.abs() <= 1.0 + CLAMP_EPS {
        Ok(c.signum())
    } else {
        Err(KinematicsError::CosOutOfRange)
    }
}

/// Clamps a slightly negative discriminant to zero. `scale` is the squared
/// length scale of the expression.
fn clamp_disc(disc: f64, scale: f64) -> Option<f64> {
    if disc >= 0.0 {
        Some(disc)
    } else if disc >= -DISC_EPS * scale.max(1.0) {
        Some(0.0)
    } else {
        None
    }
}

/// Solves the planar-loop angle: cos(alpha) = (y_A2 - y_A1 - l3) / (2 l2),
/// sin(alpha) = m sqrt(1 - cos^2).
pub fn solve_alpha(
    joints: &ActuatedJoints,
    params: &StructuralParams,
    m: Sign,
) -> Result<(f64, f64), KinematicsError> {
    let b_term = joints.y_a2 - joints.y_a1 - params.l3;
    let cos_alpha = clamp_cos(b_term / (2.0 * params.l2))?;
    let disc = clamp_disc(1.0 - cos_alpha * cos_alpha, 1.0)
        .ok_or(KinematicsError::CosOutOfRange)?;
    Ok((cos_alpha, m.factor() * disc.sqrt()))
}

/// Coefficients of the chain-B closure G1 sin(beta) + G2 cos(beta) + G3 = 0.
fn beta_coefficients(
    joints: &ActuatedJoints,
    params: &StructuralParams,
    alpha: (f64, f64),
) -> (f64, f64, f64) {
    let p = params;
    let f1 = 2.0 * p.b - 2.0 * p.d;
    let f2 = joints.y_a1 - joints.y_a3 + p.l2 * alpha.0 + p.l3 / 2.0;
    let f3 = p.l4 + p.l7 - p.l8 + p.l2 * alpha.1;
    let g1 = 2.0 * f3 * p.l6;
    let g2 = -2.0 * f1 * p.l6;
    let g3 = f1 * f1 + f2 * f2 + f3 * f3 + p.l6 * p.l6 - p.l9 * p.l9;
    (g1, g2, g3)
}

/// Solves the chain-B closure for beta on root branch `n`.
///
/// The half-angle substitution t = tan(beta/2) turns the closure into
/// (G3 - G2) t^2 + 2 G1 t + (G3 + G2) = 0 with roots
/// t = (-G1 + n sqrt(G1^2 + G2^2 - G3^2)) / (G3 - G2). The root on the
/// -sign(G1) side is evaluated directly; the opposite root would cancel
/// half its digits, so it is taken from the root product
/// t+ t- = (G3 + G2) / (G3 - G2) instead. atan2 keeps the beta = pi root
/// reachable when the denominator vanishes.
pub fn solve_beta_fk(
    joints: &ActuatedJoints,
    params: &StructuralParams,
    alpha: (f64, f64),
    n: Sign,
) -> Result<f64, KinematicsError> {
    let (g1, g2, g3) = beta_coefficients(joints, params, alpha);
    let scale = (g1 * g1 + g2 * g2).max(g3 * g3);
    if scale == 0.0 {
        return Err(KinematicsError::DegenerateDenominator);
    }
    let disc = clamp_disc(g1 * g1 + g2 * g2 - g3 * g3, scale)
        .ok_or(KinematicsError::DiscriminantNegative)?;
    let root = disc.sqrt();

    let (num, den) = if g1 == 0.0 || n.factor() * g1 < 0.0 {
        // Additive side: no cancellation in -G1 + n sqrt.
        (-g1 + n.factor() * root, g3 - g2)
    } else {
        // Cancelling side: use (G3 + G2) / (-G1 - sign(G1) sqrt).
        (g3 + g2, -g1 - g1.signum() * root)
    };
    if num == 0.0 && den == 0.0 {
        // Quadratic fully degenerate: the half-angle substitution excludes
        // its own solution, which is beta = pi.
        return Ok(std::f64::consts::PI);
    }
    let beta = 2.0 * num.atan2(den);
    // 2 atan2 ranges over (-2 pi, 2 pi]; report the principal angle.
    if beta > std::f64::consts::PI {
        Ok(beta - 2.0 * std::f64::consts::PI)
    } else if beta <= -std::f64::consts::PI {
        Ok(beta + 2.0 * std::f64::consts::PI)
    } else {
        Ok(beta)
    }
}

/// One forward branch. Infeasibility is recorded in the result, not thrown.
pub fn forward(joints: &ActuatedJoints, params: &StructuralParams, branch: FkBranch) -> FkSolution {
    let alpha = match solve_alpha(joints, params, branch.m) {
        Ok(a) => a,
        Err(_) => return FkSolution::infeasible(branch, FkStatus::CosOutOfRange),
    };
    let beta = match solve_beta_fk(joints, params, alpha, branch.n) {
        Ok(beta) => beta,
        Err(KinematicsError::DiscriminantNegative) => {
            return FkSolution::infeasible(branch, FkStatus::DiscriminantNegative)
        }
        Err(_) => return FkSolution::infeasible(branch, FkStatus::BetaDegenerate),
    };
    let angles = AngleState::from_pairs(alpha, (beta.cos(), beta.sin()));
    let chain = chain_points_from_fk(joints, params, &angles);
    FkSolution {
        branch,
        status: FkStatus::Ok,
        pose: Some(PlatformPose::from_vector(chain.oprime)),
        angles: Some(angles),
    }
}

/// All four forward branches in the fixed order (+,+), (+,-), (-,+), (-,-).
pub fn forward_all(joints: &ActuatedJoints, params: &StructuralParams) -> Vec<FkSolution> {
    FkBranch::ALL
        .iter()
        .map(|&branch| forward(joints, params, branch))
        .collect()
}

/// Solves cos(beta) = (b - d - x) / l6, sin(beta) = v sqrt(1 - cos^2).
pub fn inverse_beta(
    pose: &PlatformPose,
    params: &StructuralParams,
    v: Sign,
) -> Result<(f64, f64), KinematicsError> {
    let cos_beta = clamp_cos((params.b - params.d - pose.x) / params.l6)?;
    let disc =
        clamp_disc(1.0 - cos_beta * cos_beta, 1.0).ok_or(KinematicsError::CosOutOfRange)?;
    Ok((cos_beta, v.factor() * disc.sqrt()))
}

/// Per-rail pieces of the inverse solution y_Ai = M_i + w_i sqrt(-L_i - N_i).
///
/// Returns (M, -L - N) for the three rails, with the discriminants already
/// clamped against rounding but possibly negative. The discriminants are
/// evaluated in difference-of-squares form, which keeps the rounding error
/// at the scale of the (possibly tiny) result instead of the squared link
/// lengths; near the fold loci the dominant error is then the f64
/// quantization of the pose itself.
fn inverse_terms(
    pose: &PlatformPose,
    params: &StructuralParams,
    beta: (f64, f64),
) -> ([f64; 3], [f64; 3]) {
    let p = params;
    let (cb, sb) = beta;
    // q is the proximal-link height l2 sin(alpha) recovered from the pose;
    // e = x_C1 - b vanishes identically when cos(beta) solves the chain and
    // is kept for perturbed inputs.
    let (sb_prod, sb_err) = exact::two_prod(p.l6, sb);
    let q = {
        let (hi, lo) = exact::sum_dd(&[pose.z, -p.l7, -sb_prod, -p.l4, -p.l1]);
        (hi, lo - sb_err)
    };
    let e = pose.x + p.d + p.l6 * cb - p.b;
    let disc12 = exact::diff_of_squares(p.l2, q, (e, 0.0));
    // Rail 3 sees the platform point at radial offset (dx, dz) from its
    // pivot line.
    let dx = exact::sum_dd(&[pose.x, p.b, -p.d]);
    let dz = exact::sum_dd(&[pose.z, -p.l8, -p.l1]);
    let disc3 = exact::diff_of_squares(p.l9, dx, dz);
    let m = [
        pose.y - p.l3 / 2.0,
        pose.y + p.l3 / 2.0,
        pose.y,
    ];
    (m, [
        clamp_disc(disc12, p.l2 * p.l2).unwrap_or(disc12),
        clamp_disc(disc12, p.l2 * p.l2).unwrap_or(disc12),
        clamp_disc(disc3, p.l9 * p.l9).unwrap_or(disc3),
    ])
}

/// Squared reach slack of each rail at a pose (mm^2): the quantity under
/// the square root of the inverse solution, -L_i - N_i. Negative slack
/// means rail i cannot close its chain; a zero is the reach boundary. The
/// slacks are smooth in the pose, so they are usable as implicit-surface
/// fields even outside the reachable region.
pub fn reach_discriminants(
    pose: &PlatformPose,
    params: &StructuralParams,
    v: Sign,
) -> Result<[f64; 3], KinematicsError> {
    let beta = inverse_beta(pose, params, v)?;
    let (_, disc) = inverse_terms(pose, params, beta);
    Ok(disc)
}

/// One inverse branch. Infeasibility is recorded in the result, not thrown.
pub fn inverse(pose: &PlatformPose, params: &StructuralParams, branch: IkBranch) -> IkSolution {
    let beta = match inverse_beta(pose, params, branch.v) {
        Ok(beta) => beta,
        Err(_) => {
            return IkSolution {
                branch,
                status: IkStatus::BetaCosOutOfRange,
                joints: None,
            }
        }
    };
    let (m, disc) = inverse_terms(pose, params, beta);
    if disc.iter().any(|&d| d < 0.0) {
        return IkSolution {
            branch,
            status: IkStatus::ComplexDiscriminant,
            joints: None,
        };
    }
    let joints = ActuatedJoints::new(
        m[0] + branch.w[0].factor() * disc[0].sqrt(),
        m[1] + branch.w[1].factor() * disc[1].sqrt(),
        m[2] + branch.w[2].factor() * disc[2].sqrt(),
    );
    let status = if joints.rail_order_ok() {
        IkStatus::Ok
    } else {
        IkStatus::OrderingViolation
    };
    IkSolution {
        branch,
        status,
        joints: Some(joints),
    }
}

/// All sixteen inverse branches in the fixed enumeration order.
pub fn inverse_all(pose: &PlatformPose, params: &StructuralParams) -> Vec<IkSolution> {
    IkBranch::all()
        .map(|branch| inverse(pose, params, branch))
        .collect()
}

/// Left-minus-right of the three squared link-length constraint equations
/// (mm^2): |C1 - B1|^2 - l2^2, |C2 - B2|^2 - l2^2, |C3 - B3|^2 - l9^2, with
/// the C points rebuilt from the pose on the sin(beta) branch `v`.
///
/// This is the module's ground-truth oracle: any (pose, joints) pair claimed
/// consistent must drive all three components to zero.
pub fn residuals(
    pose: &PlatformPose,
    joints: &ActuatedJoints,
    params: &StructuralParams,
    v: Sign,
) -> Result<Vector3<f64>, KinematicsError> {
    let p = params;
    let (cb, sb) = inverse_beta(pose, params, v)?;
    let c1 = Vector3::new(
        pose.x + p.d + p.l6 * cb,
        pose.y - p.l3 / 2.0,
        pose.z - p.l7 - p.l6 * sb - p.l4,
    );
    let c2 = Vector3::new(c1.x, pose.y + p.l3 / 2.0, c1.z);
    let c3 = Vector3::new(pose.x - p.d, pose.y, pose.z - p.l8);
    let b1 = Vector3::new(p.b, joints.y_a1, p.l1);
    let b2 = Vector3::new(p.b, joints.y_a2, p.l1);
    let b3 = Vector3::new(-p.b, joints.y_a3, p.l1);
    Ok(Vector3::new(
        (c1 - b1).norm_squared() - p.l2 * p.l2,
        (c2 - b2).norm_squared() - p.l2 * p.l2,
        (c3 - b3).norm_squared() - p.l9 * p.l9,
    ))
}

/// Reconstructs the full angle state of a consistent (pose, joints) pair on
/// sin(beta) branch `v`.
///
/// Unlike the forward solve, this does not assume the planar-loop relation
/// cos(alpha) = B / (2 l2); it reads alpha straight off the chain geometry,
/// so it also covers the coupler-singular assemblies (y_A2 - y_A1 = l3 with
/// alpha free) that the inverse enumeration can produce.
pub fn angle_state(
    pose: &PlatformPose,
    joints: &ActuatedJoints,
    params: &StructuralParams,
    v: Sign,
) -> Result<AngleState, KinematicsError> {
    let p = params;
    let (cb, sb) = inverse_beta(pose, params, v)?;
    let cos_alpha = (pose.y - p.l3 / 2.0 - joints.y_a1) / p.l2;
    let sin_alpha = (pose.z - p.l7 - p.l6 * sb - p.l4 - p.l1) / p.l2;
    Ok(AngleState::from_pairs((cos_alpha, sin_alpha), (cb, sb)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StructuralParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const GOLDEN_JOINTS: (f64, f64, f64) = (-111.24, 244.70, 246.92);

    /// Four-branch forward poses for the golden joints, frozen from direct
    /// evaluation of the closed form (independently cross-checked against
    /// the constraint residuals below).
    const GOLDEN_POSES: [(f64, f64, f64); 4] = [
        (-80.386239672061, 66.73, 307.232750567605),
        (194.718328199170, 66.73, 78.166212426513),
        (194.718328199170, 66.73, 61.833787573487),
        (-80.386239672061, 66.73, -167.232750567605),
    ];

    fn golden_joints() -> ActuatedJoints {
        ActuatedJoints::new(GOLDEN_JOINTS.0, GOLDEN_JOINTS.1, GOLDEN_JOINTS.2)
    }

    #[test]
    fn alpha_reference_value() {
        let params = StructuralParams::default();
        let (ca, sa) = solve_alpha(&golden_joints(), &params, Sign::Plus).unwrap();
        // cos(alpha) = (244.70 + 111.24 - 120) / 320 = 235.94 / 320
        assert_relative_eq!(ca, 0.7373125, epsilon = 1e-12);
        assert!(sa > 0.0);
        assert_relative_eq!(ca * ca + sa * sa, 1.0, epsilon = 1e-12);
        let (_, sa_minus) = solve_alpha(&golden_joints(), &params, Sign::Minus).unwrap();
        assert_relative_eq!(sa_minus, -sa, epsilon = 1e-15);
    }

    #[test]
    fn alpha_boundary_and_out_of_reach() {
        let params = StructuralParams::default();
        let at_reach = ActuatedJoints::new(0.0, params.l3 + 2.0 * params.l2, 0.0);
        for m in Sign::BOTH {
            let (ca, sa) = solve_alpha(&at_reach, &params, m).unwrap();
            assert_eq!(ca, 1.0);
            assert_eq!(sa, 0.0);
        }
        let beyond = ActuatedJoints::new(0.0, params.l3 + 2.0 * params.l2 + 1.0, 0.0);
        assert_eq!(
            solve_alpha(&beyond, &params, Sign::Plus),
            Err(KinematicsError::CosOutOfRange)
        );
    }

    #[test]
    fn beta_reference_value() {
        let params = StructuralParams::default();
        let joints = golden_joints();
        let alpha = solve_alpha(&joints, &params, Sign::Plus).unwrap();
        let beta = solve_beta_fk(&joints, &params, alpha, Sign::Plus).unwrap();
        assert_relative_eq!(beta, 0.800162373700318, epsilon = 1e-12);
        // The root must satisfy the closure it was solved from.
        let (g1, g2, g3) = super::beta_coefficients(&joints, &params, alpha);
        let closure = g1 * beta.sin() + g2 * beta.cos() + g3;
        let scale = (g1 * g1 + g2 * g2).sqrt();
        assert!(closure.abs() / scale < 1e-9, "closure residual {closure}");
    }

    #[test]
    fn beta_discriminant_negative_when_chain_b_out_of_reach() {
        // Large rail-3 offset found by scanning y_a3: chain B cannot close.
        let params = StructuralParams::default();
        let joints = ActuatedJoints::new(-111.24, 244.70, 500.0);
        let alpha = solve_alpha(&joints, &params, Sign::Plus).unwrap();
        assert_eq!(
            solve_beta_fk(&joints, &params, alpha, Sign::Plus),
            Err(KinematicsError::DiscriminantNegative)
        );
    }

    #[test]
    fn beta_right_angle_identity() {
        // Constructed so G2 = 0 (b = d) and G3 = -G1: the closure collapses
        // to sin(beta) = 1, so one root branch must return beta = pi/2.
        // With sin(alpha) = 0.5 this needs F2^2 + (F3 + l6)^2 = l9^2.
        let mut params = StructuralParams::default();
        params.d = params.b;
        let cos_alpha: f64 = 0.75_f64.sqrt();
        let f3 = params.l2 * 0.5;
        let f2 = (params.l9 * params.l9 - (f3 + params.l6) * (f3 + params.l6)).sqrt();
        let y_a1 = 0.0;
        let y_a2 = y_a1 + params.l3 + 2.0 * params.l2 * cos_alpha;
        let y_a3 = y_a1 + params.l2 * cos_alpha + params.l3 / 2.0 - f2;
        let joints = ActuatedJoints::new(y_a1, y_a2, y_a3);
        let alpha = solve_alpha(&joints, &params, Sign::Plus).unwrap();
        let (g1, g2, g3) = super::beta_coefficients(&joints, &params, alpha);
        assert_eq!(g2, 0.0);
        assert_relative_eq!(g3, -g1, epsilon = 1e-6);
        let hit = Sign::BOTH.iter().any(|&n| {
            solve_beta_fk(&joints, &params, alpha, n)
                .map(|beta| (beta - std::f64::consts::FRAC_PI_2).abs() < 1e-7)
                .unwrap_or(false)
        });
        assert!(hit, "no branch returned beta = pi/2");
    }

    #[test]
    fn beta_root_at_pi_when_denominator_degenerates() {
        // Constructed coefficients with G3 = -G1, G2 = 0 admit beta = pi/2;
        // the atan2 half-angle form must also survive G3 == G2 exactly.
        // b = d makes G2 = 0; choose joints so that the quadratic's
        // excluded point is not the root being asked for.
        let mut params = StructuralParams::default();
        params.d = params.b;
        let joints = ActuatedJoints::new(0.0, 160.0, 30.0);
        let alpha = solve_alpha(&joints, &params, Sign::Plus).unwrap();
        let (g1, g2, g3) = super::beta_coefficients(&joints, &params, alpha);
        assert_eq!(g2, 0.0);
        for n in Sign::BOTH {
            let beta = solve_beta_fk(&joints, &params, alpha, n).unwrap();
            let closure = g1 * beta.sin() + g2 * beta.cos() + g3;
            assert!(closure.abs() / g1.abs().max(g3.abs()) < 1e-12);
        }
    }

    #[test]
    fn forward_reference_table() {
        let params = StructuralParams::default();
        let sols = forward_all(&golden_joints(), &params);
        assert_eq!(sols.len(), 4);
        for (sol, expected) in sols.iter().zip(GOLDEN_POSES) {
            assert!(sol.is_feasible());
            let pose = sol.pose.unwrap();
            assert_relative_eq!(pose.x, expected.0, epsilon = 1e-9);
            assert_relative_eq!(pose.y, expected.1, epsilon = 1e-9);
            assert_relative_eq!(pose.z, expected.2, epsilon = 1e-9);
        }
        // x pairs up across the two sin(alpha) branches with flipped beta
        // root (the mirrored beta has the same cosine); y never depends on
        // the branch at all.
        assert_relative_eq!(
            sols[0].pose.unwrap().x,
            sols[3].pose.unwrap().x,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            sols[1].pose.unwrap().x,
            sols[2].pose.unwrap().x,
            epsilon = 1e-12
        );
        for sol in &sols {
            assert_eq!(sol.pose.unwrap().y, 66.73);
        }
    }

    #[test]
    fn forward_all_flags_out_of_reach() {
        let params = StructuralParams::default();
        let sols = forward_all(&ActuatedJoints::new(0.0, 600.0, 0.0), &params);
        assert_eq!(sols.len(), 4);
        assert!(sols.iter().all(|s| s.status == FkStatus::CosOutOfRange));
    }

    #[test]
    fn inverse_beta_reference_and_boundaries() {
        let params = StructuralParams::default();
        let pose = PlatformPose::new(-80.3862, 66.73, 307.2328);
        let (cb, sb) = inverse_beta(&pose, &params, Sign::Plus).unwrap();
        assert_relative_eq!(cb, 125.3862 / 180.0, epsilon = 1e-12);
        assert!(sb > 0.0);

        let on_axis = PlatformPose::new(params.b - params.d, 0.0, 300.0);
        assert_eq!(inverse_beta(&on_axis, &params, Sign::Plus).unwrap().0, 0.0);

        let at_reach = PlatformPose::new(params.b - params.d - params.l6, 0.0, 300.0);
        for v in Sign::BOTH {
            let (cb, sb) = inverse_beta(&at_reach, &params, v).unwrap();
            assert_eq!((cb, sb), (1.0, 0.0));
        }

        let beyond = PlatformPose::new(params.b - params.d - params.l6 - 1.0, 0.0, 300.0);
        assert_eq!(
            inverse_beta(&beyond, &params, Sign::Plus),
            Err(KinematicsError::CosOutOfRange)
        );
    }

    #[test]
    fn inverse_reference_columns() {
        // Eight real solutions of the rounded reference pose, as tabulated
        // for the prototype (4-decimal values).
        let params = StructuralParams::default();
        let pose = PlatformPose::new(-80.3862, 66.7300, 307.2328);

        // 5e-2 tolerance: both the pose and the tabulated joints are
        // 4-decimal roundings of values computed at full precision, and the
        // pose rounding alone moves the recomputed joints by ~1e-3.
        let col5 = inverse(
            &pose,
            &params,
            IkBranch { v: Sign::Plus, w: [Sign::Minus, Sign::Plus, Sign::Plus] },
        );
        assert_eq!(col5.status, IkStatus::Ok);
        let j = col5.joints.unwrap();
        assert_relative_eq!(j.y_a1, -111.2392, epsilon = 5e-2);
        assert_relative_eq!(j.y_a2, 244.6992, epsilon = 5e-2);
        assert_relative_eq!(j.y_a3, 246.9229, epsilon = 5e-2);

        let col1 = inverse(
            &pose,
            &params,
            IkBranch { v: Sign::Plus, w: [Sign::Plus, Sign::Plus, Sign::Plus] },
        );
        assert_relative_eq!(col1.joints.unwrap().y_a1, 124.6992, epsilon = 5e-2);

        // Negative sin(beta) never yields a real rail position for this pose.
        for sol in inverse_all(&pose, &params) {
            if sol.branch.v == Sign::Minus {
                assert_eq!(sol.status, IkStatus::ComplexDiscriminant);
            }
        }
    }

    #[test]
    fn inverse_all_counts_real_and_ordered() {
        let params = StructuralParams::default();
        let pose = PlatformPose::new(-80.3862, 66.7300, 307.2328);
        let sols = inverse_all(&pose, &params);
        assert_eq!(sols.len(), 16);
        let real = sols.iter().filter(|s| s.joints.is_some()).count();
        let feasible = sols.iter().filter(|s| s.is_feasible()).count();
        assert_eq!(real, 8);
        assert_eq!(feasible, 6);
    }

    #[test]
    fn inverse_all_unreachable_pose() {
        let params = StructuralParams::default();
        let pose = PlatformPose::new(500.0, 0.0, 300.0);
        let sols = inverse_all(&pose, &params);
        assert!(sols
            .iter()
            .all(|s| s.status == IkStatus::BetaCosOutOfRange && s.joints.is_none()));
    }

    #[test]
    fn residual_oracle_on_reference_data() {
        let params = StructuralParams::default();
        // Exact forward pose against its own joints: machine-precision zero.
        let sol = forward(&golden_joints(), &params, FkBranch::PP);
        let res = residuals(&sol.pose.unwrap(), &golden_joints(), &params, Sign::Plus).unwrap();
        assert!(res.amax() < 1e-9, "residuals {res:?}");

        // Rounded pose against rounded tabulated joints: the 4-decimal
        // rounding of both sides propagates to ~1 mm^2 in the squared
        // constraint equations.
        let pose = PlatformPose::new(-80.3862, 66.7300, 307.2328);
        let tabulated = ActuatedJoints::new(-111.2392, 244.6992, 246.9229);
        let res = residuals(&pose, &tabulated, &params, Sign::Plus).unwrap();
        assert!(res.amax() < 2.0, "residuals {res:?}");

        // Perturbing one rail breaks exactly its own constraint.
        let sol_pose = sol.pose.unwrap();
        let mut perturbed = golden_joints();
        perturbed.y_a1 += 1.0;
        let res = residuals(&sol_pose, &perturbed, &params, Sign::Plus).unwrap();
        assert!(res.x.abs() > 1.0);
        assert!(res.y.abs() < 1e-9);
        assert!(res.z.abs() < 1e-9);
    }

    #[test]
    fn angle_state_matches_forward_branch() {
        let params = StructuralParams::default();
        let sol = forward(&golden_joints(), &params, FkBranch::PP);
        let st = angle_state(
            &sol.pose.unwrap(),
            &golden_joints(),
            &params,
            Sign::Plus,
        )
        .unwrap();
        let fw = sol.angles.unwrap();
        assert_relative_eq!(st.cos_alpha, fw.cos_alpha, epsilon = 1e-12);
        assert_relative_eq!(st.sin_alpha, fw.sin_alpha, epsilon = 1e-12);
        assert_relative_eq!(st.cos_beta, fw.cos_beta, epsilon = 1e-12);
        assert_relative_eq!(st.sin_beta, fw.sin_beta, epsilon = 1e-12);
        assert!(st.is_normalized(1e-12));
    }

    proptest! {
        /// Round trip: any feasible forward solve is recovered by the
        /// inverse enumeration, and the chain points satisfy every length
        /// invariant.
        #[test]
        fn forward_inverse_round_trip(
            y1 in -180.0f64..180.0,
            dy in 0.1f64..300.0,
            y3 in -180.0f64..180.0,
        ) {
            let params = StructuralParams::default();
            let joints = ActuatedJoints::new(y1, y1 + dy, y3);
            let sol = forward(&joints, &params, FkBranch::PP);
            prop_assume!(sol.is_feasible());
            let pose = sol.pose.unwrap();
            let angles = sol.angles.unwrap();
            // Stay off the fold loci (vanishing square-root arguments),
            // where the pose -> joints map has condition ~ l/s and the f64
            // quantization of the pose alone exceeds the 1e-9 bound.
            prop_assume!(angles.cos_alpha.abs() > 1e-3);
            prop_assume!(angles.sin_beta.abs() > 1e-3);
            prop_assume!((pose.y - joints.y_a3).abs() > 1e-3);

            let chain = crate::model::chain_points_from_fk(&joints, &params, &angles);
            prop_assert!(chain.max_invariant_violation(&params) < 1e-9);

            let recovered = inverse_all(&pose, &params)
                .into_iter()
                .filter_map(|s| s.joints.map(|j| (s.status, j)))
                .find(|(_, j)| {
                    (j.as_vector() - joints.as_vector()).amax() < 1e-9
                });
            prop_assert!(recovered.is_some(), "joints not recovered");
        }

        /// Output y depends on rails 1 and 2 only (partial decoupling).
        #[test]
        fn y_output_ignores_rail_3(
            y1 in -180.0f64..180.0,
            dy in -300.0f64..300.0,
            y3a in -180.0f64..180.0,
            y3b in -180.0f64..180.0,
        ) {
            let params = StructuralParams::default();
            let ja = ActuatedJoints::new(y1, y1 + dy, y3a);
            let jb = ActuatedJoints::new(y1, y1 + dy, y3b);
            let (sa, sb) = (
                forward(&ja, &params, FkBranch::PP),
                forward(&jb, &params, FkBranch::PP),
            );
            prop_assume!(sa.is_feasible() && sb.is_feasible());
            // Exact equality: y = y_a1 + l2 cos(alpha) + l3/2 never reads y_a3.
            prop_assert_eq!(sa.pose.unwrap().y, sb.pose.unwrap().y);
        }

        /// Branch enumeration sizes are fixed.
        #[test]
        fn enumeration_sizes(
            y1 in -400.0f64..400.0,
            y2 in -400.0f64..400.0,
            y3 in -400.0f64..400.0,
            px in -400.0f64..400.0,
            py in -400.0f64..400.0,
            pz in -400.0f64..400.0,
        ) {
            let params = StructuralParams::default();
            prop_assert_eq!(
                forward_all(&ActuatedJoints::new(y1, y2, y3), &params).len(), 4);
            prop_assert_eq!(
                inverse_all(&PlatformPose::new(px, py, pz), &params).len(), 16);
        }

        /// Every feasible inverse branch drives the residual oracle to zero
        /// and respects the rail ordering.
        #[test]
        fn inverse_solutions_satisfy_constraints(
            px in -150.0f64..150.0,
            py in -200.0f64..200.0,
            pz in 150.0f64..370.0,
        ) {
            let params = StructuralParams::default();
            let pose = PlatformPose::new(px, py, pz);
            for sol in inverse_all(&pose, &params) {
                if let (IkStatus::Ok, Some(j)) = (sol.status, sol.joints) {
                    prop_assert!(j.rail_order_ok());
                    let res = residuals(&pose, &j, &params, sol.branch.v).unwrap();
                    prop_assert!(res.amax() < 1e-9, "residuals {:?}", res);
                }
            }
        }
    }
}
