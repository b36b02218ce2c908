//! Kinematics toolkit for a 3-DOF translational parallel manipulator driven by
//! three prismatic joints on parallel rails.
//!
//! The manipulator consists of two hybrid chains: a planar 2P4R six-bar loop
//! feeding a parallelogram (chain A, two actuated rails) and a single rail
//! carrying a link-parallelogram stack (chain B). Its position kinematics are
//! closed-form in both directions, with four forward and sixteen inverse
//! branches selected by discrete signs.
//!
//! Modules:
//! - [`model`] — structural parameters, joint/pose types, chain-point geometry;
//! - [`topology`] — mobility calculus on position-and-orientation sets
//!   (DOF, constraint degree, coupling degree);
//! - [`kinematics`] — closed-form forward/inverse solutions with full branch
//!   enumeration and a constraint-residual oracle;
//! - [`differential`] — serial/parallel Jacobians and singularity
//!   classification;
//! - [`workspace`] — discrete workspace determination and numerical
//!   singular-surface sampling;
//! - [`cli`] — the `tpm` command-line front end.

pub mod cli;
pub mod differential;
pub mod kinematics;
pub mod model;
pub mod topology;
pub mod workspace;

pub use model::{
    ActuatedJoints, AngleState, ChainPoints, ParamsError, PlatformPose, Sign, StructuralParams,
};

pub use kinematics::{
    forward, forward_all, inverse, inverse_all, residuals, FkBranch, FkSolution, IkBranch,
    IkSolution, KinematicsError,
};

pub use differential::{classify, jacobians, JacobianPair, SingularityKind, SingularityReport};
