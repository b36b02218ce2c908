//! The `tpm` command line: forward/inverse kinematics, Jacobians,
//! singularity reports, workspace scans and singular-surface sampling.
//!
//! Exit codes: 0 on success, 1 when the requested computation is infeasible
//! for the given numbers, 2 on usage errors. Output is deterministic for a
//! fixed argv and parameter file.

use crate::differential::{classify, jacobians, DEFAULT_SINGULARITY_TOL};
use crate::kinematics::{
    angle_state, forward, forward_all, inverse_all, residuals, FkBranch, IkSolution,
};
use crate::model::{ActuatedJoints, PlatformPose, Sign, StructuralParams};
use crate::topology::builtin_report;
use crate::workspace::{
    inside_points, project, scan_workspace, singular_surface_on_branch, write_ply,
    write_workspace_csv, write_workspace_jsonl, AxisSpec, GridSpec, ProjectionPlane, SampleSpace,
    ScanLimits, SurfaceKind, SurfacePatch, WorkspacePoint,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
    Ply,
}

#[derive(Parser, Debug)]
#[command(
    name = "tpm",
    version,
    about = "Kinematics toolkit for a rail-driven 3-DOF translational parallel manipulator",
    max_term_width = 100
)]
struct Cli {
    /// Structural-parameter file (flat `key = value`); built-in prototype
    /// dimensions when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    params: Option<PathBuf>,

    /// Output format. `ply` is valid for point-cloud subcommands only.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the payload to a file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Interpret angle-range inputs in degrees instead of radians.
    #[arg(long, global = true)]
    degrees: bool,

    /// Decimal places in text tables.
    #[arg(long, global = true, default_value_t = 4, value_name = "N")]
    decimals: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Per-axis bounds, e.g. `--bounds x:-150:150 y:-200:200 z:380:550`
    /// (joint-space axes may be written ya1/ya2/ya3).
    #[arg(long, value_name = "AXIS:MIN:MAX", num_args = 1..=3)]
    bounds: Vec<String>,

    /// Samples per axis, e.g. `--res 61,81,35`.
    #[arg(long, value_name = "NX,NY,NZ")]
    res: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward kinematics from the three rail positions.
    Fk {
        /// Rail positions y_A1,y_A2,y_A3 (mm).
        #[arg(long, value_name = "Y1,Y2,Y3", allow_hyphen_values = true)]
        joints: String,
        /// Branch signs m,n (default +1,+1).
        #[arg(long, value_name = "M,N", conflicts_with = "all", allow_hyphen_values = true)]
        branch: Option<String>,
        /// Enumerate all four branches.
        #[arg(long)]
        all: bool,
    },
    /// Inverse kinematics from the tool point.
    Ik {
        /// Tool point x,y,z (mm).
        #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
        pose: String,
        /// Show all sixteen branches, not just the assemblable ones.
        #[arg(long)]
        all: bool,
    },
    /// Jacobian pair and determinants at a configuration.
    Jac {
        #[arg(long, value_name = "Y1,Y2,Y3", allow_hyphen_values = true)]
        joints: String,
        /// Tool point; computed from the (+1, +1) forward branch if omitted.
        #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
        pose: Option<String>,
    },
    /// Singularity classification at a configuration.
    Singularity {
        #[arg(long, value_name = "Y1,Y2,Y3", allow_hyphen_values = true)]
        joints: String,
        #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
        pose: Option<String>,
        /// Row-normalized determinant threshold.
        #[arg(long, default_value_t = DEFAULT_SINGULARITY_TOL)]
        tol: f64,
    },
    /// Discrete workspace scan over a pose grid.
    Workspace {
        #[command(flatten)]
        grid: GridArgs,
        /// Rail travel window, e.g. `--joint-range -180:180`.
        #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
        joint_range: Option<String>,
        /// Passive-angle window for alpha (radians, or degrees with
        /// --degrees).
        #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
        alpha_range: Option<String>,
        /// Passive-angle window for beta.
        #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
        beta_range: Option<String>,
    },
    /// Singular-surface sampling by sign-change detection and bisection.
    Surface {
        /// serial (det B = 0) or parallel (det A = 0).
        #[arg(long, value_enum)]
        kind: SurfaceKindArg,
        /// workspace (pose grid) or jointspace (rail grid).
        #[arg(long, value_enum)]
        space: SampleSpaceArg,
        /// Forward branch signs m,n for joint-space grids (default +1,+1).
        #[arg(long, value_name = "M,N", allow_hyphen_values = true)]
        fk_branch: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Mobility report of the built-in mechanism.
    Topology,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SurfaceKindArg {
    Serial,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleSpaceArg {
    Workspace,
    Jointspace,
}

/// Usage-level failure (exit 2) or numeric infeasibility (exit 1).
enum CliError {
    Usage(String),
    Infeasible(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = Result<(), CliError>;

/// Entry point used by `main`: parses argv, runs, prints to stdout/stderr.
pub fn run(args: &[String]) -> i32 {
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    run_with_writers(args, &mut out, &mut err)
}

/// Testable entry point with injectable output streams.
pub fn run_with_writers<O: Write, E: Write>(args: &[String], out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful terminations.
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(CliError::Infeasible(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(CliError::Io(e)) => {
            let _ = writeln!(err, "error: i/o failure: {e}");
            1
        }
    }
}

fn dispatch<O: Write>(cli: &Cli, out: &mut O) -> CliResult {
    let params = match &cli.params {
        Some(path) => StructuralParams::load(path)
            .map_err(|e| CliError::Usage(format!("parameter file {}: {e}", path.display())))?,
        None => StructuralParams::default(),
    };

    // Point-cloud formats only make sense for point-cloud payloads.
    if cli.format == Format::Ply
        && !matches!(cli.command, Command::Workspace { .. } | Command::Surface { .. })
    {
        return Err(CliError::Usage(
            "--format ply is only valid for `workspace` and `surface`".into(),
        ));
    }

    let mut sink = OutputSink::open(cli.out.as_deref())?;
    let result = match &cli.command {
        Command::Fk { joints, branch, all } => {
            cmd_fk(cli, &params, joints, branch.as_deref(), *all, sink.writer())
        }
        Command::Ik { pose, all } => cmd_ik(cli, &params, pose, *all, sink.writer()),
        Command::Jac { joints, pose } => {
            cmd_jac(cli, &params, joints, pose.as_deref(), sink.writer())
        }
        Command::Singularity { joints, pose, tol } => {
            cmd_singularity(cli, &params, joints, pose.as_deref(), *tol, sink.writer())
        }
        Command::Workspace { grid, joint_range, alpha_range, beta_range } => cmd_workspace(
            cli,
            &params,
            grid,
            joint_range.as_deref(),
            alpha_range.as_deref(),
            beta_range.as_deref(),
            sink.writer(),
        ),
        Command::Surface { kind, space, fk_branch, grid } => cmd_surface(
            cli,
            &params,
            *kind,
            *space,
            fk_branch.as_deref(),
            grid,
            sink.writer(),
        ),
        Command::Topology => cmd_topology(cli, sink.writer()),
    };
    result?;
    sink.finish(out)?;
    Ok(())
}

/// Buffers the payload and flushes it to a file or to the caller's stream.
struct OutputSink {
    buffer: Vec<u8>,
    path: Option<PathBuf>,
}

impl OutputSink {
    fn open(path: Option<&std::path::Path>) -> Result<Self, CliError> {
        Ok(OutputSink {
            buffer: Vec::new(),
            path: path.map(PathBuf::from),
        })
    }

    fn writer(&mut self) -> &mut Vec<u8> {
        &mut self.buffer
    }

    fn finish<O: Write>(self, out: &mut O) -> Result<(), CliError> {
        match self.path {
            Some(path) => {
                std::fs::write(&path, &self.buffer)?;
                writeln!(out, "wrote {} bytes to {}", self.buffer.len(), path.display())?;
            }
            None => out.write_all(&self.buffer)?,
        }
        Ok(())
    }
}

fn parse_triple(text: &str, what: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "{what} must be three comma-separated numbers, got `{text}`"
        )));
    }
    let mut vals = [0.0; 3];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| CliError::Usage(format!("{what}: bad number `{part}`: {e}")))?;
    }
    Ok(vals)
}

fn parse_sign(text: &str, what: &str) -> Result<Sign, CliError> {
    match text.trim() {
        "+1" | "1" | "+" => Ok(Sign::Plus),
        "-1" | "-" => Ok(Sign::Minus),
        other => Err(CliError::Usage(format!("{what} must be +1 or -1, got `{other}`"))),
    }
}

fn parse_branch(text: &str) -> Result<FkBranch, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!(
            "--branch must be two signs `m,n`, got `{text}`"
        )));
    }
    Ok(FkBranch {
        m: parse_sign(parts[0], "branch sign m")?,
        n: parse_sign(parts[1], "branch sign n")?,
    })
}

fn parse_range(text: &str, what: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("{what} must be `lo:hi`, got `{text}`")));
    }
    let lo = parts[0]
        .parse::<f64>()
        .map_err(|e| CliError::Usage(format!("{what}: bad number `{}`: {e}", parts[0])))?;
    let hi = parts[1]
        .parse::<f64>()
        .map_err(|e| CliError::Usage(format!("{what}: bad number `{}`: {e}", parts[1])))?;
    if lo >= hi {
        return Err(CliError::Usage(format!("{what}: need lo < hi, got `{text}`")));
    }
    Ok((lo, hi))
}

fn parse_grid(grid: &GridArgs, space: SampleSpace, params: &StructuralParams) -> Result<GridSpec, CliError> {
    let default_axes = match space {
        SampleSpace::Workspace => [
            AxisSpec::new(-150.0, 150.0, 61),
            AxisSpec::new(-200.0, 200.0, 81),
            AxisSpec::new(380.0, 550.0, 35),
        ],
        SampleSpace::JointSpace => {
            let half = params.a / 2.0;
            [
                AxisSpec::new(-half, half, 21),
                AxisSpec::new(-half, half, 21),
                AxisSpec::new(-half, half, 21),
            ]
        }
    };
    let mut axes = default_axes;

    for bound in &grid.bounds {
        let parts: Vec<&str> = bound.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "--bounds entries must be `axis:min:max`, got `{bound}`"
            )));
        }
        let axis = match parts[0].to_ascii_lowercase().as_str() {
            "x" | "ya1" | "y1" => 0,
            "y" | "ya2" | "y2" => 1,
            "z" | "ya3" | "y3" => 2,
            other => {
                return Err(CliError::Usage(format!("unknown bounds axis `{other}`")));
            }
        };
        let min = parts[1]
            .parse::<f64>()
            .map_err(|e| CliError::Usage(format!("--bounds {bound}: {e}")))?;
        let max = parts[2]
            .parse::<f64>()
            .map_err(|e| CliError::Usage(format!("--bounds {bound}: {e}")))?;
        axes[axis].min = min;
        axes[axis].max = max;
    }

    if let Some(res) = &grid.res {
        let parts: Vec<&str> = res.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "--res must be `nx,ny,nz`, got `{res}`"
            )));
        }
        for (axis, part) in axes.iter_mut().zip(&parts) {
            axis.count = part
                .trim()
                .parse::<usize>()
                .map_err(|e| CliError::Usage(format!("--res: bad count `{part}`: {e}")))?;
        }
    }

    GridSpec::new(axes).map_err(|e| CliError::Usage(e.to_string()))
}

fn angle_pair(cli: &Cli, radians: f64) -> String {
    let d = cli.decimals;
    format!("{:.d$} rad ({:.d$} deg)", radians, radians.to_degrees(), d = d)
}

fn cmd_fk(
    cli: &Cli,
    params: &StructuralParams,
    joints_arg: &str,
    branch_arg: Option<&str>,
    all: bool,
    w: &mut Vec<u8>,
) -> CliResult {
    let j = parse_triple(joints_arg, "--joints")?;
    let joints = ActuatedJoints::new(j[0], j[1], j[2]);
    let d = cli.decimals;

    let solutions = if all {
        forward_all(&joints, params)
    } else {
        let branch = match branch_arg {
            Some(text) => parse_branch(text)?,
            None => FkBranch::PP,
        };
        vec![forward(&joints, params, branch)]
    };

    match cli.format {
        Format::Text => {
            writeln!(w, "{:>3} {:>3} {:>14} {:>14} {:>14}  status", "m", "n", "x", "y", "z")?;
            for sol in &solutions {
                match sol.pose {
                    Some(p) => writeln!(
                        w,
                        "{:>3} {:>3} {:>14.d$} {:>14.d$} {:>14.d$}  {}",
                        sol.branch.m.to_string(),
                        sol.branch.n.to_string(),
                        p.x,
                        p.y,
                        p.z,
                        sol.status.label(),
                    )?,
                    None => writeln!(
                        w,
                        "{:>3} {:>3} {:>14} {:>14} {:>14}  {}",
                        sol.branch.m.to_string(),
                        sol.branch.n.to_string(),
                        "-",
                        "-",
                        "-",
                        sol.status.label(),
                    )?,
                }
            }
            for sol in &solutions {
                if let Some(angles) = &sol.angles {
                    writeln!(
                        w,
                        "branch {}: alpha = {}, beta = {}",
                        sol.branch,
                        angle_pair(cli, angles.alpha()),
                        angle_pair(cli, angles.beta()),
                    )?;
                }
            }
        }
        Format::Csv => {
            writeln!(w, "m,n,x,y,z,status")?;
            for sol in &solutions {
                match sol.pose {
                    Some(p) => writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        sol.branch.m,
                        sol.branch.n,
                        p.x,
                        p.y,
                        p.z,
                        sol.status.label()
                    )?,
                    None => writeln!(
                        w,
                        "{},{},nan,nan,nan,{}",
                        sol.branch.m,
                        sol.branch.n,
                        sol.status.label()
                    )?,
                }
            }
        }
        Format::Json => {
            let records: Vec<serde_json::Value> = solutions
                .iter()
                .map(|sol| {
                    serde_json::json!({
                        "m": sol.branch.m.factor() as i8,
                        "n": sol.branch.n.factor() as i8,
                        "status": sol.status.label(),
                        "pose": sol.pose.map(|p| [p.x, p.y, p.z]),
                        "alpha": sol.angles.map(|a| a.alpha()),
                        "beta": sol.angles.map(|a| a.beta()),
                    })
                })
                .collect();
            writeln!(w, "{}", serde_json::Value::Array(records))?;
        }
        Format::Ply => unreachable!("rejected earlier"),
    }

    if solutions.iter().all(|s| !s.is_feasible()) {
        return Err(CliError::Infeasible(format!(
            "no feasible forward branch for joints ({}, {}, {})",
            joints.y_a1, joints.y_a2, joints.y_a3
        )));
    }
    Ok(())
}

fn ik_row(sol: &IkSolution) -> (String, String, String) {
    match sol.joints {
        Some(j) => (format!("{}", j.y_a1), format!("{}", j.y_a2), format!("{}", j.y_a3)),
        None => ("nan".into(), "nan".into(), "nan".into()),
    }
}

fn cmd_ik(
    cli: &Cli,
    params: &StructuralParams,
    pose_arg: &str,
    all: bool,
    w: &mut Vec<u8>,
) -> CliResult {
    let p = parse_triple(pose_arg, "--pose")?;
    let pose = PlatformPose::new(p[0], p[1], p[2]);
    let d = cli.decimals;

    let solutions: Vec<IkSolution> = inverse_all(&pose, params)
        .into_iter()
        .filter(|s| all || s.is_feasible())
        .collect();
    let feasible = solutions.iter().filter(|s| s.is_feasible()).count();

    match cli.format {
        Format::Text => {
            writeln!(
                w,
                "{:>3} {:>3} {:>3} {:>3} {:>14} {:>14} {:>14}  status",
                "v", "w1", "w2", "w3", "yA1", "yA2", "yA3"
            )?;
            for sol in &solutions {
                let cells = match sol.joints {
                    Some(j) => (
                        format!("{:>14.d$}", j.y_a1),
                        format!("{:>14.d$}", j.y_a2),
                        format!("{:>14.d$}", j.y_a3),
                    ),
                    None => (
                        format!("{:>14}", "-"),
                        format!("{:>14}", "-"),
                        format!("{:>14}", "-"),
                    ),
                };
                writeln!(
                    w,
                    "{:>3} {:>3} {:>3} {:>3} {} {} {}  {}",
                    sol.branch.v.to_string(),
                    sol.branch.w[0].to_string(),
                    sol.branch.w[1].to_string(),
                    sol.branch.w[2].to_string(),
                    cells.0,
                    cells.1,
                    cells.2,
                    sol.status.label(),
                )?;
            }
            writeln!(w, "{feasible} feasible of {} listed", solutions.len())?;
        }
        Format::Csv => {
            writeln!(w, "v,w1,w2,w3,yA1,yA2,yA3,status")?;
            for sol in &solutions {
                let (a, b, c) = ik_row(sol);
                writeln!(
                    w,
                    "{},{},{},{},{a},{b},{c},{}",
                    sol.branch.v,
                    sol.branch.w[0],
                    sol.branch.w[1],
                    sol.branch.w[2],
                    sol.status.label()
                )?;
            }
        }
        Format::Json => {
            let records: Vec<serde_json::Value> = solutions
                .iter()
                .map(|sol| {
                    serde_json::json!({
                        "v": sol.branch.v.factor() as i8,
                        "w": [
                            sol.branch.w[0].factor() as i8,
                            sol.branch.w[1].factor() as i8,
                            sol.branch.w[2].factor() as i8,
                        ],
                        "status": sol.status.label(),
                        "joints": sol.joints.map(|j| [j.y_a1, j.y_a2, j.y_a3]),
                    })
                })
                .collect();
            writeln!(w, "{}", serde_json::Value::Array(records))?;
        }
        Format::Ply => unreachable!("rejected earlier"),
    }

    if feasible == 0 {
        return Err(CliError::Infeasible(format!(
            "no feasible inverse solution for pose ({}, {}, {})",
            pose.x, pose.y, pose.z
        )));
    }
    Ok(())
}

/// Resolves the configuration for `jac`/`singularity`: either the forward
/// (+1, +1) branch of the joints, or a user pose checked for consistency.
fn resolve_configuration(
    params: &StructuralParams,
    joints: &ActuatedJoints,
    pose_arg: Option<&str>,
) -> Result<(PlatformPose, crate::model::AngleState), CliError> {
    match pose_arg {
        None => {
            let sol = forward(joints, params, FkBranch::PP);
            match (sol.pose, sol.angles) {
                (Some(pose), Some(angles)) => Ok((pose, angles)),
                _ => Err(CliError::Infeasible(format!(
                    "forward branch (+1, +1) infeasible: {}",
                    sol.status.label()
                ))),
            }
        }
        Some(text) => {
            let p = parse_triple(text, "--pose")?;
            let pose = PlatformPose::new(p[0], p[1], p[2]);
            // Length-normalized residual gate: 1e-4 admits configurations
            // given at 4-decimal table precision (squared-constraint error
            // ~1 mm^2 at these link lengths) while rejecting genuinely
            // inconsistent pairs, which land orders of magnitude higher.
            let scales = [
                params.l2 * params.l2,
                params.l2 * params.l2,
                params.l9 * params.l9,
            ];
            for v in Sign::BOTH {
                if let Ok(res) = residuals(&pose, joints, params, v) {
                    let worst = (0..3)
                        .map(|i| (res[i] / scales[i]).abs())
                        .fold(0.0_f64, f64::max);
                    if worst < 1e-4 {
                        let angles = angle_state(&pose, joints, params, v)
                            .expect("residuals implies valid beta");
                        return Ok((pose, angles));
                    }
                }
            }
            Err(CliError::Infeasible(
                "pose and joints are not a consistent configuration (normalized link-length \
                 residuals exceed 1e-4)"
                    .into(),
            ))
        }
    }
}

fn cmd_jac(
    cli: &Cli,
    params: &StructuralParams,
    joints_arg: &str,
    pose_arg: Option<&str>,
    w: &mut Vec<u8>,
) -> CliResult {
    let j = parse_triple(joints_arg, "--joints")?;
    let joints = ActuatedJoints::new(j[0], j[1], j[2]);
    let (pose, angles) = resolve_configuration(params, &joints, pose_arg)?;
    let jp = jacobians(&joints, &pose, params, &angles)
        .map_err(|e| CliError::Infeasible(e.to_string()))?;
    let d = cli.decimals;

    match cli.format {
        Format::Text => {
            writeln!(w, "configuration: pose = ({:.d$}, {:.d$}, {:.d$})", pose.x, pose.y, pose.z)?;
            writeln!(
                w,
                "alpha = {}, beta = {}",
                angle_pair(cli, angles.alpha()),
                angle_pair(cli, angles.beta())
            )?;
            writeln!(w, "A (parallel Jacobian):")?;
            for i in 0..3 {
                writeln!(
                    w,
                    "  [{:>14.d$} {:>14.d$} {:>14.d$}]",
                    jp.a[(i, 0)],
                    jp.a[(i, 1)],
                    jp.a[(i, 2)]
                )?;
            }
            let u = jp.u();
            writeln!(w, "B (serial Jacobian) diagonal: [{:.d$}, {:.d$}, {:.d$}]", u[0], u[1], u[2])?;
            writeln!(w, "det A = {:.6e}   normalized = {:.6e}", jp.det_a, jp.norm_det_a)?;
            writeln!(w, "det B = {:.6e}   normalized = {:.6e}", jp.det_b, jp.norm_det_b)?;
        }
        Format::Csv => {
            writeln!(w, "key,value")?;
            for i in 0..3 {
                for k in 0..3 {
                    writeln!(w, "A{}{},{}", i + 1, k + 1, jp.a[(i, k)])?;
                }
            }
            let u = jp.u();
            for (i, v) in u.iter().enumerate() {
                writeln!(w, "u{}{},{v}", i + 1, i + 1)?;
            }
            writeln!(w, "detA,{}", jp.det_a)?;
            writeln!(w, "detB,{}", jp.det_b)?;
        }
        Format::Json => {
            let a_rows: Vec<[f64; 3]> = (0..3)
                .map(|i| [jp.a[(i, 0)], jp.a[(i, 1)], jp.a[(i, 2)]])
                .collect();
            writeln!(
                w,
                "{}",
                serde_json::json!({
                    "pose": [pose.x, pose.y, pose.z],
                    "A": a_rows,
                    "B_diag": jp.u(),
                    "det_a": jp.det_a,
                    "det_b": jp.det_b,
                    "norm_det_a": jp.norm_det_a,
                    "norm_det_b": jp.norm_det_b,
                })
            )?;
        }
        Format::Ply => unreachable!("rejected earlier"),
    }
    Ok(())
}

fn cmd_singularity(
    cli: &Cli,
    params: &StructuralParams,
    joints_arg: &str,
    pose_arg: Option<&str>,
    tol: f64,
    w: &mut Vec<u8>,
) -> CliResult {
    let j = parse_triple(joints_arg, "--joints")?;
    let joints = ActuatedJoints::new(j[0], j[1], j[2]);
    let (pose, angles) = resolve_configuration(params, &joints, pose_arg)?;
    let jp = jacobians(&joints, &pose, params, &angles)
        .map_err(|e| CliError::Infeasible(e.to_string()))?;
    let report = classify(&jp, params, tol);

    let serial: Vec<&str> = report.serial_cases.iter().map(|c| c.label()).collect();
    let parallel: Vec<&str> = report.parallel_cases.iter().map(|c| c.label()).collect();

    match cli.format {
        Format::Text => {
            writeln!(w, "kind: {}", report.kind.label())?;
            writeln!(w, "serial cases: [{}]", serial.join(", "))?;
            writeln!(w, "parallel cases: [{}]", parallel.join(", "))?;
            writeln!(
                w,
                "|det A| = {:.6e} (normalized {:.6e})",
                report.margins.det_a_abs, report.margins.norm_det_a_abs
            )?;
            writeln!(
                w,
                "|det B| = {:.6e} (normalized {:.6e})",
                report.margins.det_b_abs, report.margins.norm_det_b_abs
            )?;
            writeln!(
                w,
                "serial margins |u_ii|/scale: [{:.6e}, {:.6e}, {:.6e}]",
                report.margins.serial[0], report.margins.serial[1], report.margins.serial[2]
            )?;
            writeln!(
                w,
                "row-pair margins: [{:.6e}, {:.6e}, {:.6e}]",
                report.margins.parallel_pairs[0],
                report.margins.parallel_pairs[1],
                report.margins.parallel_pairs[2]
            )?;
        }
        Format::Csv => {
            writeln!(w, "key,value")?;
            writeln!(w, "kind,{}", report.kind.label())?;
            writeln!(w, "serial_cases,{}", serial.join("|"))?;
            writeln!(w, "parallel_cases,{}", parallel.join("|"))?;
            writeln!(w, "abs_det_a,{}", report.margins.det_a_abs)?;
            writeln!(w, "abs_det_b,{}", report.margins.det_b_abs)?;
            writeln!(w, "norm_det_a,{}", report.margins.norm_det_a_abs)?;
            writeln!(w, "norm_det_b,{}", report.margins.norm_det_b_abs)?;
        }
        Format::Json => {
            writeln!(
                w,
                "{}",
                serde_json::json!({
                    "kind": report.kind.label(),
                    "serial_cases": serial,
                    "parallel_cases": parallel,
                    "abs_det_a": report.margins.det_a_abs,
                    "abs_det_b": report.margins.det_b_abs,
                    "norm_det_a": report.margins.norm_det_a_abs,
                    "norm_det_b": report.margins.norm_det_b_abs,
                    "serial_margins": report.margins.serial,
                    "row_pair_margins": report.margins.parallel_pairs,
                })
            )?;
        }
        Format::Ply => unreachable!("rejected earlier"),
    }
    Ok(())
}

fn cmd_workspace(
    cli: &Cli,
    params: &StructuralParams,
    grid_args: &GridArgs,
    joint_range: Option<&str>,
    alpha_range: Option<&str>,
    beta_range: Option<&str>,
    w: &mut Vec<u8>,
) -> CliResult {
    let grid = parse_grid(grid_args, SampleSpace::Workspace, params)?;
    let mut limits = ScanLimits::for_params(params);
    if let Some(text) = joint_range {
        limits.joint_range = parse_range(text, "--joint-range")?;
    }
    let to_radians = |r: (f64, f64)| {
        if cli.degrees {
            (r.0.to_radians(), r.1.to_radians())
        } else {
            r
        }
    };
    if let Some(text) = alpha_range {
        limits.alpha_range = to_radians(parse_range(text, "--alpha-range")?);
    }
    if let Some(text) = beta_range {
        limits.beta_range = to_radians(parse_range(text, "--beta-range")?);
    }

    let points = scan_workspace(params, &grid, &limits);
    emit_workspace(cli, &points, w)
}

fn emit_workspace(cli: &Cli, points: &[WorkspacePoint], w: &mut Vec<u8>) -> CliResult {
    let io_err = |e: crate::workspace::WorkspaceError| match e {
        crate::workspace::WorkspaceError::Io(e) => CliError::Io(e),
        other => CliError::Usage(other.to_string()),
    };
    match cli.format {
        Format::Text => {
            let inside = inside_points(points);
            writeln!(w, "nodes scanned: {}", points.len())?;
            writeln!(w, "inside points: {}", inside.len())?;
            let yz = project(&inside, ProjectionPlane::YZ);
            let xz = project(&inside, ProjectionPlane::XZ);
            writeln!(w, "projection YZ: {} silhouette points", yz.len())?;
            writeln!(w, "projection XZ: {} silhouette points", xz.len())?;
            if !inside.is_empty() {
                let min = inside.iter().fold(
                    Vector3::repeat(f64::INFINITY),
                    |acc: Vector3<f64>, p| acc.inf(p),
                );
                let max = inside.iter().fold(
                    Vector3::repeat(f64::NEG_INFINITY),
                    |acc: Vector3<f64>, p| acc.sup(p),
                );
                writeln!(
                    w,
                    "inside bounding box: x [{}, {}], y [{}, {}], z [{}, {}]",
                    min.x, max.x, min.y, max.y, min.z, max.z
                )?;
            }
        }
        Format::Csv => write_workspace_csv(points, w).map_err(io_err)?,
        Format::Json => write_workspace_jsonl(points, w).map_err(io_err)?,
        Format::Ply => write_ply(&inside_points(points), w).map_err(io_err)?,
    }
    Ok(())
}

fn cmd_surface(
    cli: &Cli,
    params: &StructuralParams,
    kind: SurfaceKindArg,
    space: SampleSpaceArg,
    fk_branch: Option<&str>,
    grid_args: &GridArgs,
    w: &mut Vec<u8>,
) -> CliResult {
    let kind = match kind {
        SurfaceKindArg::Serial => SurfaceKind::Serial,
        SurfaceKindArg::Parallel => SurfaceKind::Parallel,
    };
    let space = match space {
        SampleSpaceArg::Workspace => SampleSpace::Workspace,
        SampleSpaceArg::Jointspace => SampleSpace::JointSpace,
    };
    let branch = match fk_branch {
        Some(text) => parse_branch(text)?,
        None => FkBranch::PP,
    };
    let grid = parse_grid(grid_args, space, params)?;
    let patch = singular_surface_on_branch(params, &grid, kind, space, branch);
    emit_patch(cli, &patch, w)
}

fn emit_patch(cli: &Cli, patch: &SurfacePatch, w: &mut Vec<u8>) -> CliResult {
    let io_err = |e: crate::workspace::WorkspaceError| match e {
        crate::workspace::WorkspaceError::Io(e) => CliError::Io(e),
        other => CliError::Usage(other.to_string()),
    };
    match cli.format {
        Format::Text => {
            writeln!(w, "kind: {}", patch.kind.label())?;
            writeln!(w, "space: {}", patch.space.label())?;
            writeln!(w, "surface points: {}", patch.points.len())?;
            writeln!(w, "skipped nodes: {}", patch.skipped_nodes)?;
        }
        Format::Csv => {
            writeln!(w, "x,y,z")?;
            for p in &patch.points {
                writeln!(w, "{},{},{}", p.x, p.y, p.z)?;
            }
        }
        Format::Json => {
            for p in &patch.points {
                writeln!(
                    w,
                    "{}",
                    serde_json::json!({
                        "kind": patch.kind.label(),
                        "space": patch.space.label(),
                        "x": p.x, "y": p.y, "z": p.z,
                    })
                )?;
            }
        }
        Format::Ply => write_ply(&patch.points, w).map_err(io_err)?,
    }
    Ok(())
}

fn cmd_topology(cli: &Cli, w: &mut Vec<u8>) -> CliResult {
    let report = builtin_report();
    match cli.format {
        Format::Text => {
            writeln!(w, "platform POC: {}", report.platform_poc)?;
            for (i, (xi, delta)) in report
                .xi_per_loop
                .iter()
                .zip(&report.delta_per_loop)
                .enumerate()
            {
                writeln!(w, "loop {}: xi = {xi}, constraint degree = {delta:+}", i + 1)?;
            }
            writeln!(w, "DOF: {}", report.dof)?;
            writeln!(w, "coupling degree: {}", report.coupling_degree)?;
        }
        Format::Csv => {
            writeln!(w, "key,value")?;
            writeln!(w, "dof,{}", report.dof)?;
            writeln!(w, "coupling_degree,{}", report.coupling_degree)?;
            for (i, xi) in report.xi_per_loop.iter().enumerate() {
                writeln!(w, "xi_{},{xi}", i + 1)?;
            }
            for (i, delta) in report.delta_per_loop.iter().enumerate() {
                writeln!(w, "delta_{},{delta}", i + 1)?;
            }
            writeln!(w, "platform_translation_dim,{}", report.platform_poc.translation.dim())?;
            writeln!(w, "platform_rotation_dim,{}", report.platform_poc.rotation.dim())?;
        }
        Format::Json => {
            writeln!(
                w,
                "{}",
                serde_json::json!({
                    "xi_per_loop": report.xi_per_loop,
                    "dof": report.dof,
                    "delta_per_loop": report.delta_per_loop,
                    "coupling_degree": report.coupling_degree,
                    "platform_poc": {
                        "translation_dim": report.platform_poc.translation.dim(),
                        "rotation_dim": report.platform_poc.rotation.dim(),
                    },
                })
            )?;
        }
        Format::Ply => unreachable!("rejected earlier"),
    }
    Ok(())
}
