//! Structural parameters, coordinate conventions and chain-point geometry.
//!
//! The global frame O-XYZ sits at the centre of the rectangular base platform
//! (width 2b): X and Y in the base plane (Y along the rails), Z pointing up.
//! The moving platform carries the tool centre point O' and stays parallel to
//! the base. All lengths are millimetres, all angles radians.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// A discrete branch selector, exactly +1 or -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    /// The sign as a factor, +1.0 or -1.0.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_i8(v: i8) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => write!(f, "+1"),
            Sign::Minus => write!(f, "-1"),
        }
    }
}

/// Errors from loading or validating a structural-parameter file.
#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("failed to read parameter file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse parameter file: {0}")]
    Parse(String),
    #[error("missing required parameter key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown parameter key `{0}`")]
    UnknownKey(String),
    #[error("parameter `{key}` must be non-negative, got {value}")]
    Negative { key: &'static str, value: f64 },
    #[error("parameter `{key}` must be strictly positive, got {value}")]
    NonPositive { key: &'static str, value: f64 },
}

/// Link lengths and platform dimensions of the manipulator.
///
/// `b` is the half-width of the base platform and `d` half of the platform
/// segment ST. `l1` is the rail-to-pivot height A_iB_i, `l2` the proximal
/// links B1C1 = B2C2, `l3` the coupler C1C2, `l6` the swing link D2E2 and
/// `l9` the long link B3C3 of chain B. `l4`, `l7`, `l8` are intermediate
/// offsets that are zero on the prototype but kept symbolic here. `a`, `l5`
/// and `l10` are recorded for file round-tripping; no position equation reads
/// them (`a` serves as the default rail length for workspace limits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
    pub l7: f64,
    pub l8: f64,
    pub l9: f64,
    pub l10: f64,
}

impl Default for StructuralParams {
    /// The reference prototype dimensions (mm).
    fn default() -> Self {
        StructuralParams {
            a: 360.0,
            b: 90.0,
            d: 45.0,
            l1: 70.0,
            l2: 160.0,
            l3: 120.0,
            l4: 0.0,
            l5: 90.0,
            l6: 180.0,
            l7: 0.0,
            l8: 0.0,
            l9: 300.0,
            l10: 150.0,
        }
    }
}

/// Keys that must appear in a parameter file. `a`, `l5`, `l10` are optional
/// and fall back to the prototype defaults.
const REQUIRED_KEYS: [&str; 10] = ["b", "d", "l1", "l2", "l3", "l4", "l6", "l7", "l8", "l9"];
const OPTIONAL_KEYS: [&str; 3] = ["a", "l5", "l10"];

impl StructuralParams {
    /// Checks the length invariants: every length non-negative, and the
    /// divisor/discriminant lengths `l2`, `l6`, `l9` strictly positive.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let all = [
            ("a", self.a),
            ("b", self.b),
            ("d", self.d),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
            ("l5", self.l5),
            ("l6", self.l6),
            ("l7", self.l7),
            ("l8", self.l8),
            ("l9", self.l9),
            ("l10", self.l10),
        ];
        for (key, value) in all {
            if !value.is_finite() || value < 0.0 {
                return Err(ParamsError::Negative { key, value });
            }
        }
        for (key, value) in [("l2", self.l2), ("l6", self.l6), ("l9", self.l9)] {
            if value <= 0.0 {
                return Err(ParamsError::NonPositive { key, value });
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` parameter file (TOML surface syntax).
    ///
    /// Required keys: b, d, l1..l4, l6..l9. Optional keys a, l5, l10 default
    /// to the prototype values. Unknown keys and negative values are
    /// rejected.
    pub fn from_toml_str(text: &str) -> Result<Self, ParamsError> {
        let map: BTreeMap<String, toml::Value> =
            toml::from_str(text).map_err(|e| ParamsError::Parse(e.to_string()))?;

        let mut numbers: BTreeMap<String, f64> = BTreeMap::new();
        for (key, value) in map {
            if !REQUIRED_KEYS.contains(&key.as_str()) && !OPTIONAL_KEYS.contains(&key.as_str()) {
                return Err(ParamsError::UnknownKey(key));
            }
            let num = match value {
                toml::Value::Float(f) => f,
                toml::Value::Integer(i) => i as f64,
                other => {
                    return Err(ParamsError::Parse(format!(
                        "key `{key}` must be a number, got {other}"
                    )))
                }
            };
            numbers.insert(key, num);
        }

        for key in REQUIRED_KEYS {
            if !numbers.contains_key(key) {
                return Err(ParamsError::MissingKey(match key {
                    "b" => "b",
                    "d" => "d",
                    "l1" => "l1",
                    "l2" => "l2",
                    "l3" => "l3",
                    "l4" => "l4",
                    "l6" => "l6",
                    "l7" => "l7",
                    "l8" => "l8",
                    _ => "l9",
                }));
            }
        }

        let defaults = StructuralParams::default();
        let get = |key: &str, fallback: f64| numbers.get(key).copied().unwrap_or(fallback);
        let params = StructuralParams {
            a: get("a", defaults.a),
            b: get("b", f64::NAN),
            d: get("d", f64::NAN),
            l1: get("l1", f64::NAN),
            l2: get("l2", f64::NAN),
            l3: get("l3", f64::NAN),
            l4: get("l4", f64::NAN),
            l5: get("l5", defaults.l5),
            l6: get("l6", f64::NAN),
            l7: get("l7", f64::NAN),
            l8: get("l8", f64::NAN),
            l9: get("l9", f64::NAN),
            l10: get("l10", defaults.l10),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self, ParamsError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Serializes back to the flat key = value file format.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        let all = [
            ("a", self.a),
            ("b", self.b),
            ("d", self.d),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
            ("l5", self.l5),
            ("l6", self.l6),
            ("l7", self.l7),
            ("l8", self.l8),
            ("l9", self.l9),
            ("l10", self.l10),
        ];
        for (key, value) in all {
            out.push_str(&format!("{key} = {value:?}\n"));
        }
        out
    }
}

/// Positions of the three prismatic actuators along the Y-parallel rails (mm).
///
/// Physically assembled configurations keep `y_a2 > y_a1`; the type itself
/// admits violations so inverse-kinematics enumeration can report them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatedJoints {
    pub y_a1: f64,
    pub y_a2: f64,
    pub y_a3: f64,
}

impl ActuatedJoints {
    pub fn new(y_a1: f64, y_a2: f64, y_a3: f64) -> Self {
        ActuatedJoints { y_a1, y_a2, y_a3 }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.y_a1, self.y_a2, self.y_a3)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        ActuatedJoints::new(v.x, v.y, v.z)
    }

    /// Whether the rail ordering constraint `y_a2 > y_a1` holds.
    pub fn rail_order_ok(&self) -> bool {
        self.y_a2 > self.y_a1
    }
}

/// Position of the tool centre point O' in the global frame (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PlatformPose {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        PlatformPose { x, y, z }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        PlatformPose::new(v.x, v.y, v.z)
    }
}

/// The two passive angles of a configuration, stored as (cos, sin) pairs.
///
/// `alpha` is the angle between link B1C1 and the Y-axis; `beta` the angle
/// between link D2E2 and the negative X-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleState {
    pub cos_alpha: f64,
    pub sin_alpha: f64,
    pub cos_beta: f64,
    pub sin_beta: f64,
}

impl AngleState {
    pub fn from_pairs(alpha: (f64, f64), beta: (f64, f64)) -> Self {
        AngleState {
            cos_alpha: alpha.0,
            sin_alpha: alpha.1,
            cos_beta: beta.0,
            sin_beta: beta.1,
        }
    }

    pub fn from_angles(alpha: f64, beta: f64) -> Self {
        AngleState {
            cos_alpha: alpha.cos(),
            sin_alpha: alpha.sin(),
            cos_beta: beta.cos(),
            sin_beta: beta.sin(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.sin_alpha.atan2(self.cos_alpha)
    }

    pub fn beta(&self) -> f64 {
        self.sin_beta.atan2(self.cos_beta)
    }

    /// Both (cos, sin) pairs lie on the unit circle within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        let ra = self.cos_alpha * self.cos_alpha + self.sin_alpha * self.sin_alpha - 1.0;
        let rb = self.cos_beta * self.cos_beta + self.sin_beta * self.sin_beta - 1.0;
        ra.abs() <= tol && rb.abs() <= tol
    }
}

/// All labelled points of the two chains for one configuration (mm).
///
/// Index 0..2 maps to chains 1..3 for the rail points `a`, pivots `b` and
/// link ends `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPoints {
    pub a: [Vector3<f64>; 3],
    pub b: [Vector3<f64>; 3],
    pub c: [Vector3<f64>; 3],
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub s: Vector3<f64>,
    pub t: Vector3<f64>,
    pub oprime: Vector3<f64>,
}

/// Builds every labelled chain point from the joint inputs and the solved
/// passive angles.
///
/// `angles` must come from a successful forward branch solve; then all link
/// lengths are honoured to machine precision and `z_C1 = z_C2` holds exactly
/// by construction.
pub fn chain_points_from_fk(
    joints: &ActuatedJoints,
    params: &StructuralParams,
    angles: &AngleState,
) -> ChainPoints {
    let p = params;
    let (ca, sa) = (angles.cos_alpha, angles.sin_alpha);
    let (cb, sb) = (angles.cos_beta, angles.sin_beta);

    let a1 = Vector3::new(p.b, joints.y_a1, 0.0);
    let a2 = Vector3::new(p.b, joints.y_a2, 0.0);
    let a3 = Vector3::new(-p.b, joints.y_a3, 0.0);
    let b1 = Vector3::new(p.b, joints.y_a1, p.l1);
    let b2 = Vector3::new(p.b, joints.y_a2, p.l1);
    let b3 = Vector3::new(-p.b, joints.y_a3, p.l1);

    let c1 = Vector3::new(p.b, joints.y_a1 + p.l2 * ca, p.l1 + p.l2 * sa);
    let c2 = c1 + Vector3::new(0.0, p.l3, 0.0);

    let y_mid = joints.y_a1 + p.l2 * ca + p.l3 / 2.0;
    let d1 = Vector3::new(p.b, y_mid, p.l1 + p.l2 * sa);
    let d2 = d1 + Vector3::new(0.0, 0.0, p.l4);
    let e2 = Vector3::new(p.b - p.l6 * cb, y_mid, p.l1 + p.l2 * sa + p.l4 + p.l6 * sb);

    let oprime = Vector3::new(
        p.b - p.l6 * cb - p.d,
        y_mid,
        p.l1 + p.l4 + p.l7 + p.l2 * sa + p.l6 * sb,
    );
    let s = Vector3::new(oprime.x + p.d, oprime.y, oprime.z);
    let t = Vector3::new(oprime.x - p.d, oprime.y, oprime.z);
    let c3 = Vector3::new(oprime.x - p.d, oprime.y, oprime.z - p.l8);

    ChainPoints {
        a: [a1, a2, a3],
        b: [b1, b2, b3],
        c: [c1, c2, c3],
        d1,
        d2,
        e2,
        s,
        t,
        oprime,
    }
}

impl ChainPoints {
    /// Largest violation (mm) among the fixed-length and planarity
    /// invariants of the chain geometry.
    pub fn max_invariant_violation(&self, params: &StructuralParams) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            worst = worst.max(((self.b[i] - self.a[i]).norm() - params.l1).abs());
        }
        worst = worst.max(((self.c[0] - self.b[0]).norm() - params.l2).abs());
        worst = worst.max(((self.c[1] - self.b[1]).norm() - params.l2).abs());
        worst = worst.max(((self.c[2] - self.b[2]).norm() - params.l9).abs());
        worst = worst.max(((self.c[1] - self.c[0]).norm() - params.l3).abs());
        worst = worst.max(((self.e2 - self.d2).norm() - params.l6).abs());
        worst = worst.max((self.c[0].z - self.c[1].z).abs());
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{forward, FkBranch};
    use approx::assert_relative_eq;

    #[test]
    fn defaults_match_prototype_table() {
        let p = StructuralParams::default();
        assert_eq!(
            (p.a, p.b, p.d, p.l1, p.l2, p.l3),
            (360.0, 90.0, 45.0, 70.0, 160.0, 120.0)
        );
        assert_eq!(
            (p.l4, p.l5, p.l6, p.l7, p.l8, p.l9, p.l10),
            (0.0, 90.0, 180.0, 0.0, 0.0, 300.0, 150.0)
        );
        p.validate().unwrap();
    }

    #[test]
    fn param_file_round_trip() {
        let p = StructuralParams::default();
        let text = p.to_toml_string();
        let q = StructuralParams::from_toml_str(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn param_file_missing_required_key() {
        let text = "b = 90.0\nd = 45.0\nl1 = 70.0\nl2 = 160.0\nl3 = 120.0\nl4 = 0.0\nl6 = 180.0\nl7 = 0.0\nl8 = 0.0\n";
        match StructuralParams::from_toml_str(text) {
            Err(ParamsError::MissingKey("l9")) => {}
            other => panic!("expected MissingKey(l9), got {other:?}"),
        }
    }

    #[test]
    fn param_file_optional_keys_default() {
        let text = "b = 90\nd = 45\nl1 = 70\nl2 = 160\nl3 = 120\nl4 = 0\nl6 = 180\nl7 = 0\nl8 = 0\nl9 = 300\n";
        let p = StructuralParams::from_toml_str(text).unwrap();
        assert_eq!((p.a, p.l5, p.l10), (360.0, 90.0, 150.0));
    }

    #[test]
    fn param_file_rejects_negative_and_unknown() {
        let neg = "b = 90\nd = 45\nl1 = -70\nl2 = 160\nl3 = 120\nl4 = 0\nl6 = 180\nl7 = 0\nl8 = 0\nl9 = 300\n";
        assert!(matches!(
            StructuralParams::from_toml_str(neg),
            Err(ParamsError::Negative { key: "l1", .. })
        ));
        let unknown = "b = 90\nd = 45\nl1 = 70\nl2 = 160\nl3 = 120\nl4 = 0\nl6 = 180\nl7 = 0\nl8 = 0\nl9 = 300\nq7 = 1\n";
        assert!(matches!(
            StructuralParams::from_toml_str(unknown),
            Err(ParamsError::UnknownKey(k)) if k == "q7"
        ));
        let zero_l2 = "b = 90\nd = 45\nl1 = 70\nl2 = 0\nl3 = 120\nl4 = 0\nl6 = 180\nl7 = 0\nl8 = 0\nl9 = 300\n";
        assert!(matches!(
            StructuralParams::from_toml_str(zero_l2),
            Err(ParamsError::NonPositive { key: "l2", .. })
        ));
    }

    #[test]
    fn chain_points_reference_configuration() {
        // Rail inputs measured on the prototype model and the matching tool
        // point on the assembled branch.
        let params = StructuralParams::default();
        let joints = ActuatedJoints::new(-111.24, 244.70, 246.92);
        let sol = forward(&joints, &params, FkBranch::PP);
        let chain = chain_points_from_fk(&joints, &params, &sol.angles.unwrap());
        assert_relative_eq!(chain.oprime.x, -80.39, epsilon = 5e-3);
        assert_relative_eq!(chain.oprime.y, 66.73, epsilon = 5e-3);
        assert_relative_eq!(chain.oprime.z, 307.23, epsilon = 5e-3);
        assert!(chain.max_invariant_violation(&params) < 1e-9);
    }

    #[test]
    fn chain_points_fully_extended_alpha() {
        // y_a2 - y_a1 = l3 + 2*l2 puts links B1C1, C1C2, C2B2 in a straight
        // line: cos(alpha) = 1 and C1 sits l2 along +Y from B1. Rail 3 is
        // placed so chain B still closes at this flat height.
        let params = StructuralParams::default();
        let joints = ActuatedJoints::new(0.0, 120.0 + 320.0, 30.0);
        let sol = forward(&joints, &params, FkBranch::PP);
        let angles = sol.angles.unwrap();
        assert_relative_eq!(angles.cos_alpha, 1.0, epsilon = 1e-12);
        assert_relative_eq!(angles.sin_alpha, 0.0, epsilon = 1e-12);
        let chain = chain_points_from_fk(&joints, &params, &angles);
        let offset = chain.c[0] - chain.b[0];
        assert_relative_eq!(offset.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(offset.y, params.l2, epsilon = 1e-12);
        assert_relative_eq!(offset.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn angle_state_round_trip() {
        let st = AngleState::from_angles(0.3, -1.2);
        assert!(st.is_normalized(1e-12));
        assert_relative_eq!(st.alpha(), 0.3, epsilon = 1e-12);
        assert_relative_eq!(st.beta(), -1.2, epsilon = 1e-12);
    }
}
