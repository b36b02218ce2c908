//! Discrete workspace determination and numerical singular-surface sampling.
//!
//! The workspace scan evaluates the full inverse enumeration on a pose grid
//! and filters by real-valuedness, rail ordering, actuated-joint travel and
//! passive-angle ranges. Singular surfaces are sampled by detecting sign
//! changes of a smooth determinant (or determinant-factor) field along grid
//! edges and refining each crossing by bisection; no symbolic elimination is
//! involved, so the result is a verified point cloud rather than an
//! algebraic surface.
//!
//! Field choices per surface family:
//! - joint space: the forward branch (+1, +1) supplies the configuration;
//!   serial surfaces use the diagonal factors of B (u11 and u33 — u22
//!   shares u11's zero set on this branch), since det(B) itself touches
//!   zero without crossing at the double root u11 = u22 = 0;
//! - pose space: the physical inverse branch supplies the configuration;
//!   serial loci coincide with the chain reach boundaries, so the smooth
//!   reach slacks stand in as the sign-change fields, while the parallel
//!   field is the row-normalized det(A) directly.

use crate::differential::{jacobians, BETA_EPS};
use crate::kinematics::{
    angle_state, forward, inverse, inverse_all, reach_discriminants, FkBranch, IkBranch, IkStatus,
};
use crate::model::{ActuatedJoints, PlatformPose, Sign, StructuralParams};
use nalgebra::Vector3;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Row-normalized determinant bound that every refined surface point must
/// satisfy.
pub const SURFACE_DET_TOL: f64 = 1e-6;

const BISECTION_STEPS: usize = 80;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// One grid axis: `count` samples spanning [min, max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        AxisSpec { min, max, count }
    }

    fn coord(&self, i: usize) -> f64 {
        if self.count <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * (i as f64) / ((self.count - 1) as f64)
        }
    }

    fn pitch(&self) -> f64 {
        if self.count <= 1 {
            0.0
        } else {
            (self.max - self.min) / ((self.count - 1) as f64)
        }
    }
}

/// Axis-aligned sampling grid over pose space (x, y, z) or joint space
/// (y_A1, y_A2, y_A3).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: [AxisSpec; 3],
}

impl GridSpec {
    /// Validates the axes: at least one sample each, min <= max, and
    /// min < max whenever an axis has more than one sample.
    pub fn new(axes: [AxisSpec; 3]) -> Result<Self, WorkspaceError> {
        for (i, ax) in axes.iter().enumerate() {
            if ax.count == 0 {
                return Err(WorkspaceError::InvalidGrid(format!(
                    "axis {i} has zero samples"
                )));
            }
            if !(ax.min.is_finite() && ax.max.is_finite()) || ax.min > ax.max {
                return Err(WorkspaceError::InvalidGrid(format!(
                    "axis {i} range [{}, {}] is not ordered",
                    ax.min, ax.max
                )));
            }
            if ax.count > 1 && ax.min >= ax.max {
                return Err(WorkspaceError::InvalidGrid(format!(
                    "axis {i} needs min < max for {} samples",
                    ax.count
                )));
            }
        }
        Ok(GridSpec { axes })
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.axes[0].count, self.axes[1].count, self.axes[2].count]
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn node(&self, idx: [usize; 3]) -> Vector3<f64> {
        Vector3::new(
            self.axes[0].coord(idx[0]),
            self.axes[1].coord(idx[1]),
            self.axes[2].coord(idx[2]),
        )
    }

    /// Largest per-axis sample spacing.
    pub fn max_pitch(&self) -> f64 {
        self.axes
            .iter()
            .map(AxisSpec::pitch)
            .fold(0.0_f64, f64::max)
    }

    fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.axes[1].count + idx[1]) * self.axes[2].count + idx[2]
    }
}

/// Constraint windows applied by the workspace scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanLimits {
    /// Travel window shared by the three rails (mm).
    pub joint_range: (f64, f64),
    /// Admissible window for the proximal-link angle alpha (rad).
    pub alpha_range: (f64, f64),
    /// Admissible window for the swing-link angle beta (rad).
    pub beta_range: (f64, f64),
}

impl ScanLimits {
    /// Defaults: rails confined to [-a/2, a/2] (the recorded rail length),
    /// both passive angles on the upper branch (0, pi).
    pub fn for_params(params: &StructuralParams) -> Self {
        ScanLimits {
            joint_range: (-params.a / 2.0, params.a / 2.0),
            alpha_range: (0.0, std::f64::consts::PI),
            beta_range: (0.0, std::f64::consts::PI),
        }
    }

    fn admits(&self, joints: &ActuatedJoints, alpha: f64, beta: f64) -> bool {
        let (lo, hi) = self.joint_range;
        [joints.y_a1, joints.y_a2, joints.y_a3]
            .iter()
            .all(|&y| lo <= y && y <= hi)
            && self.alpha_range.0 < alpha
            && alpha < self.alpha_range.1
            && self.beta_range.0 < beta
            && beta < self.beta_range.1
    }
}

/// Scan verdict for one grid pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspacePoint {
    pub pose: PlatformPose,
    /// Inverse branches that are real and rail-ordered (0..=16), before the
    /// travel and passive-angle windows are applied.
    pub feasible_ik_count: u8,
    /// Smallest |det A| over the feasible branches, when any admits a
    /// Jacobian.
    pub min_abs_det_a: Option<f64>,
    /// Smallest |det B| over the feasible branches.
    pub min_abs_det_b: Option<f64>,
    /// Whether at least one feasible branch also satisfies every scan limit.
    pub inside: bool,
}

/// Evaluates the inverse enumeration and the scan limits on every grid node,
/// in grid order (x outermost, z innermost). An all-outside result is valid.
pub fn scan_workspace(
    params: &StructuralParams,
    grid: &GridSpec,
    limits: &ScanLimits,
) -> Vec<WorkspacePoint> {
    let [nx, ny, nz] = grid.counts();
    let mut points = Vec::with_capacity(grid.node_count());
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let pose = PlatformPose::from_vector(grid.node([i, j, k]));
                points.push(evaluate_pose(params, &pose, limits));
            }
        }
    }
    points
}

fn evaluate_pose(
    params: &StructuralParams,
    pose: &PlatformPose,
    limits: &ScanLimits,
) -> WorkspacePoint {
    let mut count = 0u8;
    let mut inside = false;
    let mut min_a: Option<f64> = None;
    let mut min_b: Option<f64> = None;
    for sol in inverse_all(pose, params) {
        if sol.status != IkStatus::Ok {
            continue;
        }
        count += 1;
        let joints = sol.joints.expect("feasible branch carries joints");
        let Ok(angles) = angle_state(pose, &joints, params, sol.branch.v) else {
            continue;
        };
        if limits.admits(&joints, angles.alpha(), angles.beta()) {
            inside = true;
        }
        if let Ok(jp) = jacobians(&joints, pose, params, &angles) {
            min_a = Some(min_a.map_or(jp.det_a.abs(), |m: f64| m.min(jp.det_a.abs())));
            min_b = Some(min_b.map_or(jp.det_b.abs(), |m: f64| m.min(jp.det_b.abs())));
        }
    }
    WorkspacePoint {
        pose: *pose,
        feasible_ik_count: count,
        min_abs_det_a: min_a,
        min_abs_det_b: min_b,
        inside,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Serial,
    Parallel,
}

impl SurfaceKind {
    pub fn label(self) -> &'static str {
        match self {
            SurfaceKind::Serial => "serial",
            SurfaceKind::Parallel => "parallel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSpace {
    /// Pose coordinates (x, y, z).
    Workspace,
    /// Rail coordinates (y_A1, y_A2, y_A3).
    JointSpace,
}

impl SampleSpace {
    pub fn label(self) -> &'static str {
        match self {
            SampleSpace::Workspace => "workspace",
            SampleSpace::JointSpace => "jointspace",
        }
    }
}

/// Refined point cloud on a singular locus.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    pub kind: SurfaceKind,
    pub space: SampleSpace,
    pub points: Vec<Vector3<f64>>,
    /// Grid nodes where the field could not be evaluated (infeasible
    /// kinematics).
    pub skipped_nodes: usize,
}

type Field<'a> = Box<dyn Fn(Vector3<f64>) -> Option<f64> + 'a>;

fn fk_chain_eval(
    params: &StructuralParams,
    branch: FkBranch,
    p: Vector3<f64>,
) -> Option<(ActuatedJoints, crate::model::AngleState)> {
    let joints = ActuatedJoints::from_vector(p);
    let sol = forward(&joints, params, branch);
    sol.angles.map(|angles| (joints, angles))
}

fn ik_physical_eval(
    params: &StructuralParams,
    p: Vector3<f64>,
) -> Option<(ActuatedJoints, PlatformPose)> {
    let pose = PlatformPose::from_vector(p);
    let sol = inverse(&pose, params, IkBranch::PHYSICAL);
    match (sol.status, sol.joints) {
        (IkStatus::Ok | IkStatus::OrderingViolation, Some(joints)) => Some((joints, pose)),
        _ => None,
    }
}

/// Sign-change fields whose zero sets together cover the requested locus.
fn component_fields<'a>(
    params: &'a StructuralParams,
    kind: SurfaceKind,
    space: SampleSpace,
    branch: FkBranch,
) -> Vec<Field<'a>> {
    match (space, kind) {
        (SampleSpace::JointSpace, SurfaceKind::Serial) => vec![
            Box::new(move |p| {
                let (_, angles) = fk_chain_eval(params, branch, p)?;
                // u11 / l2; u22 shares this zero set on the forward branch.
                Some(angles.cos_alpha)
            }),
            Box::new(move |p| {
                let (joints, angles) = fk_chain_eval(params, branch, p)?;
                let chain = crate::model::chain_points_from_fk(&joints, params, &angles);
                Some(-(chain.c[2].y - chain.b[2].y) / params.l9)
            }),
        ],
        (SampleSpace::JointSpace, SurfaceKind::Parallel) => vec![Box::new(move |p| {
            let (joints, angles) = fk_chain_eval(params, branch, p)?;
            if angles.sin_beta.abs() <= BETA_EPS {
                return None;
            }
            let pose = PlatformPose::from_vector(
                crate::model::chain_points_from_fk(&joints, params, &angles).oprime,
            );
            jacobians(&joints, &pose, params, &angles)
                .ok()
                .map(|jp| jp.norm_det_a)
        })],
        (SampleSpace::Workspace, SurfaceKind::Serial) => vec![
            Box::new(move |p| {
                let pose = PlatformPose::from_vector(p);
                let disc = reach_discriminants(&pose, params, Sign::Plus).ok()?;
                Some(disc[0] / (params.l2 * params.l2))
            }),
            Box::new(move |p| {
                let pose = PlatformPose::from_vector(p);
                let disc = reach_discriminants(&pose, params, Sign::Plus).ok()?;
                Some(disc[2] / (params.l9 * params.l9))
            }),
        ],
        (SampleSpace::Workspace, SurfaceKind::Parallel) => vec![Box::new(move |p| {
            let (joints, pose) = ik_physical_eval(params, p)?;
            let angles = angle_state(&pose, &joints, params, Sign::Plus).ok()?;
            jacobians(&joints, &pose, params, &angles)
                .ok()
                .map(|jp| jp.norm_det_a)
        })],
    }
}

/// Row-normalized |det| of the matrix the surface claims to annihilate,
/// evaluated independently of the sign-change field.
fn verification_margin(
    params: &StructuralParams,
    kind: SurfaceKind,
    space: SampleSpace,
    branch: FkBranch,
    p: Vector3<f64>,
) -> Option<f64> {
    let (joints, angles) = match space {
        SampleSpace::JointSpace => fk_chain_eval(params, branch, p)?,
        SampleSpace::Workspace => {
            let (joints, pose) = ik_physical_eval(params, p)?;
            let angles = angle_state(&pose, &joints, params, Sign::Plus).ok()?;
            (joints, angles)
        }
    };
    match kind {
        SurfaceKind::Serial => {
            // Normalized diagonal product; no cot(beta) needed.
            let chain = crate::model::chain_points_from_fk(&joints, params, &angles);
            let u11 = (chain.c[0].y - chain.b[0].y) / params.l2;
            let u22 = (chain.c[1].y - chain.b[1].y) / params.l2;
            let u33 = -(chain.c[2].y - chain.b[2].y) / params.l9;
            Some((u11 * u22 * u33).abs())
        }
        SurfaceKind::Parallel => {
            let pose = PlatformPose::from_vector(
                crate::model::chain_points_from_fk(&joints, params, &angles).oprime,
            );
            jacobians(&joints, &pose, params, &angles)
                .ok()
                .map(|jp| jp.norm_det_a.abs())
        }
    }
}

fn bisect(field: &Field, mut a: Vector3<f64>, mut b: Vector3<f64>, fa: f64) -> Option<Vector3<f64>> {
    let mut sign_a = fa > 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = (a + b) * 0.5;
        let fm = field(mid)?;
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm > 0.0) == sign_a {
            a = mid;
            sign_a = fm > 0.0;
        } else {
            b = mid;
        }
    }
    Some((a + b) * 0.5)
}

/// Samples one singular-surface family on a grid, on the assembled forward
/// branch for joint-space grids.
pub fn singular_surface(
    params: &StructuralParams,
    grid: &GridSpec,
    kind: SurfaceKind,
    space: SampleSpace,
) -> SurfacePatch {
    singular_surface_on_branch(params, grid, kind, space, FkBranch::PP)
}

/// Samples one singular-surface family on a grid.
///
/// Every axis-aligned grid edge whose endpoint field values have opposite
/// sign is refined by bisection; refined points are kept only if the
/// row-normalized determinant they claim to annihilate is below
/// [`SURFACE_DET_TOL`]. The result is sorted and deduplicated for
/// reproducibility. `branch` selects the forward branch used for
/// joint-space grids (pose-space grids always use the physical inverse
/// branch).
pub fn singular_surface_on_branch(
    params: &StructuralParams,
    grid: &GridSpec,
    kind: SurfaceKind,
    space: SampleSpace,
    branch: FkBranch,
) -> SurfacePatch {
    let fields = component_fields(params, kind, space, branch);
    let [nx, ny, nz] = grid.counts();
    let mut skipped = vec![false; grid.node_count()];
    let mut points: Vec<Vector3<f64>> = Vec::new();

    for field in &fields {
        let mut values = vec![None; grid.node_count()];
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let idx = [i, j, k];
                    let value = field(grid.node(idx));
                    if value.is_none() {
                        skipped[grid.linear(idx)] = true;
                    }
                    values[grid.linear(idx)] = value;
                }
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let idx = [i, j, k];
                    let Some(v0) = values[grid.linear(idx)] else {
                        continue;
                    };
                    if v0 == 0.0 {
                        points.push(grid.node(idx));
                        continue;
                    }
                    for axis in 0..3 {
                        let mut nb = idx;
                        nb[axis] += 1;
                        if nb[axis] >= grid.counts()[axis] {
                            continue;
                        }
                        let Some(v1) = values[grid.linear(nb)] else {
                            continue;
                        };
                        if v0 * v1 < 0.0 {
                            if let Some(root) = bisect(field, grid.node(idx), grid.node(nb), v0) {
                                points.push(root);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut verified: Vec<Vector3<f64>> = points
        .into_iter()
        .filter(|&p| {
            verification_margin(params, kind, space, branch, p)
                .map(|m| m < SURFACE_DET_TOL)
                .unwrap_or(false)
        })
        .collect();
    verified.sort_by(|p, q| {
        p.x.total_cmp(&q.x)
            .then(p.y.total_cmp(&q.y))
            .then(p.z.total_cmp(&q.z))
    });
    verified.dedup();

    SurfacePatch {
        kind,
        space,
        points: verified,
        skipped_nodes: skipped.iter().filter(|&&s| s).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionPlane {
    XZ,
    YZ,
    XY,
}

/// Coordinate-dropping projection, sorted and deduplicated.
pub fn project(points: &[Vector3<f64>], plane: ProjectionPlane) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = points
        .iter()
        .map(|p| match plane {
            ProjectionPlane::XZ => [p.x, p.z],
            ProjectionPlane::YZ => [p.y, p.z],
            ProjectionPlane::XY => [p.x, p.y],
        })
        .collect();
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out.dedup();
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "nan".to_string(),
    }
}

/// Writes the scan as CSV with full round-trip precision.
pub fn write_workspace_csv<W: Write>(
    points: &[WorkspacePoint],
    w: &mut W,
) -> Result<(), WorkspaceError> {
    writeln!(w, "x,y,z,inside,ik_count,min_abs_detA,min_abs_detB")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            p.pose.x,
            p.pose.y,
            p.pose.z,
            u8::from(p.inside),
            p.feasible_ik_count,
            fmt_opt(p.min_abs_det_a),
            fmt_opt(p.min_abs_det_b),
        )?;
    }
    Ok(())
}

/// Reads back a workspace CSV produced by [`write_workspace_csv`].
pub fn read_workspace_csv<R: BufRead>(r: R) -> Result<Vec<WorkspacePoint>, WorkspaceError> {
    let mut points = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(WorkspaceError::Csv {
                line: lineno + 1,
                reason: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64, WorkspaceError> {
            s.parse::<f64>().map_err(|e| WorkspaceError::Csv {
                line: lineno + 1,
                reason: format!("bad number `{s}`: {e}"),
            })
        };
        let opt = |s: &str| -> Result<Option<f64>, WorkspaceError> {
            let v = num(s)?;
            Ok(if v.is_nan() { None } else { Some(v) })
        };
        points.push(WorkspacePoint {
            pose: PlatformPose::new(num(fields[0])?, num(fields[1])?, num(fields[2])?),
            inside: fields[3] == "1",
            feasible_ik_count: fields[4].parse().map_err(|e| WorkspaceError::Csv {
                line: lineno + 1,
                reason: format!("bad count: {e}"),
            })?,
            min_abs_det_a: opt(fields[5])?,
            min_abs_det_b: opt(fields[6])?,
        });
    }
    Ok(points)
}

/// Writes the scan as JSON lines, one record per node.
pub fn write_workspace_jsonl<W: Write>(
    points: &[WorkspacePoint],
    w: &mut W,
) -> Result<(), WorkspaceError> {
    #[derive(serde::Serialize)]
    struct Record {
        x: f64,
        y: f64,
        z: f64,
        inside: bool,
        ik_count: u8,
        min_abs_det_a: Option<f64>,
        min_abs_det_b: Option<f64>,
    }
    for p in points {
        let rec = Record {
            x: p.pose.x,
            y: p.pose.y,
            z: p.pose.z,
            inside: p.inside,
            ik_count: p.feasible_ik_count,
            min_abs_det_a: p.min_abs_det_a,
            min_abs_det_b: p.min_abs_det_b,
        };
        let line = serde_json::to_string(&rec).map_err(|e| WorkspaceError::Csv {
            line: 0,
            reason: e.to_string(),
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes bare 3-D points as an ASCII PLY point cloud.
pub fn write_ply<W: Write>(points: &[Vector3<f64>], w: &mut W) -> Result<(), WorkspaceError> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", points.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "end_header")?;
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// The inside sub-cloud of a scan, in grid order.
pub fn inside_points(points: &[WorkspacePoint]) -> Vec<Vector3<f64>> {
    points
        .iter()
        .filter(|p| p.inside)
        .map(|p| p.pose.as_vector())
        .collect()
}
