//! Mobility calculus on position-and-orientation characteristic (POC) sets.
//!
//! A POC set records which independent translations and rotations an end
//! link can output, modelled as a pair of linear subspaces of 3-space.
//! Serial composition unions the sets, parallel composition intersects
//! them; loop displacement counts, the DOF formula, constraint degrees and
//! the coupling degree all reduce to subspace dimensions.

use nalgebra::Vector3;
use std::fmt;
use thiserror::Error;

/// Rank tolerance for spanning vectors, applied after unit normalization.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TopologyError {
    /// Constraint degrees of a sub-kinematic chain must sum to zero.
    #[error("constraint degrees sum to {0}, not 0: not a sub-kinematic chain")]
    NotAnSkc(i64),
}

/// A linear subspace of 3-space held as an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Vec<Vector3<f64>>,
}

impl Subspace {
    pub fn zero() -> Self {
        Subspace { basis: Vec::new() }
    }

    pub fn full() -> Self {
        Subspace::span(&[Vector3::x(), Vector3::y(), Vector3::z()])
    }

    pub fn line(direction: Vector3<f64>) -> Self {
        Subspace::span(&[direction])
    }

    pub fn plane(u: Vector3<f64>, v: Vector3<f64>) -> Self {
        Subspace::span(&[u, v])
    }

    /// Span of arbitrary vectors: Gram-Schmidt with rejection of
    /// near-dependent directions at `RANK_TOL` on unit vectors.
    pub fn span(vectors: &[Vector3<f64>]) -> Self {
        let mut basis: Vec<Vector3<f64>> = Vec::new();
        for v in vectors {
            let norm = v.norm();
            if norm <= RANK_TOL {
                continue;
            }
            let mut residue = v / norm;
            for e in &basis {
                residue -= e * residue.dot(e);
            }
            if residue.norm() > RANK_TOL {
                basis.push(residue.normalize());
            }
            if basis.len() == 3 {
                break;
            }
        }
        Subspace { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vector3<f64>] {
        &self.basis
    }

    pub fn contains(&self, v: Vector3<f64>) -> bool {
        let norm = v.norm();
        if norm <= RANK_TOL {
            return true;
        }
        let mut residue = v / norm;
        for e in &self.basis {
            residue -= e * residue.dot(e);
        }
        residue.norm() <= RANK_TOL
    }

    /// Smallest subspace containing both operands.
    pub fn union(&self, other: &Subspace) -> Subspace {
        let mut all = self.basis.clone();
        all.extend_from_slice(&other.basis);
        Subspace::span(&all)
    }

    pub fn orthogonal_complement(&self) -> Subspace {
        let candidates = [Vector3::x(), Vector3::y(), Vector3::z()];
        let mut complement: Vec<Vector3<f64>> = Vec::new();
        for c in candidates {
            let mut residue = c;
            for e in &self.basis {
                residue -= e * residue.dot(e);
            }
            for e in &complement {
                residue -= e * residue.dot(e);
            }
            if residue.norm() > RANK_TOL {
                complement.push(residue.normalize());
            }
        }
        complement.truncate(3 - self.dim());
        Subspace { basis: complement }
    }

    /// Intersection via U cap V = (U-perp + V-perp)-perp.
    pub fn intersect(&self, other: &Subspace) -> Subspace {
        self.orthogonal_complement()
            .union(&other.orthogonal_complement())
            .orthogonal_complement()
    }
}

/// POC set of an end link: independent translations and rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct PocSet {
    pub translation: Subspace,
    pub rotation: Subspace,
}

impl PocSet {
    pub fn new(translation: Subspace, rotation: Subspace) -> Self {
        PocSet { translation, rotation }
    }

    pub fn dim(&self) -> usize {
        self.translation.dim() + self.rotation.dim()
    }
}

impl fmt::Display for PocSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{t^{}, r^{}}}", self.translation.dim(), self.rotation.dim())
    }
}

/// Serial composition: the end link inherits the union of both motion sets.
pub fn poc_union(a: &PocSet, b: &PocSet) -> PocSet {
    PocSet {
        translation: a.translation.union(&b.translation),
        rotation: a.rotation.union(&b.rotation),
    }
}

/// Parallel composition: the platform keeps only motions common to all
/// chains.
pub fn poc_intersect(a: &PocSet, b: &PocSet) -> PocSet {
    PocSet {
        translation: a.translation.intersect(&b.translation),
        rotation: a.rotation.intersect(&b.rotation),
    }
}

/// Number of independent displacement equations contributed by closing the
/// next branch against an already-assembled partial mechanism.
pub fn independent_displacement_count(partial_poc: &PocSet, next_branch: &PocSet) -> usize {
    poc_union(partial_poc, next_branch).dim()
}

/// One independent loop of the decomposition.
#[derive(Debug, Clone)]
pub struct LoopSpec {
    /// Sum of joint freedoms over the loop's own joints.
    pub joint_dof_sum: u32,
    /// Number of actuated joints among them.
    pub actuated_count: u32,
    /// POC terms whose union gives the loop's displacement-equation count.
    pub poc_terms: Vec<PocSet>,
}

impl LoopSpec {
    /// Independent displacement equations of this loop: the dimension of
    /// the union of its POC terms.
    pub fn xi(&self) -> usize {
        let mut acc = PocSet::new(Subspace::zero(), Subspace::zero());
        for term in &self.poc_terms {
            acc = poc_union(&acc, term);
        }
        acc.dim()
    }
}

/// Full-cycle mechanism DOF: total joint freedoms minus the independent
/// displacement equations of every loop.
pub fn dof(loops: &[LoopSpec], total_joint_dof: u32) -> i64 {
    let xi_sum: usize = loops.iter().map(LoopSpec::xi).sum();
    total_joint_dof as i64 - xi_sum as i64
}

/// Constraint degree of one loop: joint freedoms minus actuations minus
/// displacement equations.
pub fn constraint_degree(loop_spec: &LoopSpec, xi: usize) -> i64 {
    loop_spec.joint_dof_sum as i64 - loop_spec.actuated_count as i64 - xi as i64
}

/// Coupling degree of a sub-kinematic chain: half the sum of absolute
/// constraint degrees. The degrees must balance to zero.
pub fn coupling_degree(deltas: &[i64]) -> Result<i64, TopologyError> {
    let sum: i64 = deltas.iter().sum();
    if sum != 0 {
        return Err(TopologyError::NotAnSkc(sum));
    }
    Ok(deltas.iter().map(|d| d.abs()).sum::<i64>() / 2)
}

/// Hard-wired two-loop decomposition of the manipulator plus the two hybrid
/// chain POC sets.
#[derive(Debug, Clone)]
pub struct MechanismTopology {
    pub loops: Vec<LoopSpec>,
    pub total_joint_dof: u32,
    pub chain_a: PocSet,
    pub chain_b: PocSet,
}

/// Summary of the mobility analysis.
#[derive(Debug, Clone)]
pub struct TopologyReport {
    pub xi_per_loop: Vec<usize>,
    pub dof: i64,
    pub delta_per_loop: Vec<i64>,
    pub coupling_degree: i64,
    pub platform_poc: PocSet,
}

/// The built-in manipulator description.
///
/// Loop 1 is the planar 2P4R six-bar (two actuated rails, four revolutes,
/// all revolute axes parallel to X): its output link translates in the Y-Z
/// plane and rotates about X. Loop 2 closes chain A's parallelogram
/// (1-DOF curvilinear translation in the X-Z plane) against chain B (rail,
/// revolute, parallelogram, revolute: spatial translations plus one
/// rotation about a Y-parallel axis).
pub fn builtin_mechanism() -> MechanismTopology {
    let planar_loop_output = PocSet::new(
        Subspace::plane(Vector3::y(), Vector3::z()),
        Subspace::line(Vector3::x()),
    );
    // In-plane translation direction of parallelogram 1 at a generic
    // configuration; any X-Z direction off the Y-Z plane spans the same
    // union.
    let parallelogram_a = PocSet::new(
        Subspace::line(Vector3::new(1.0, 0.0, 1.0)),
        Subspace::zero(),
    );
    let chain_b = PocSet::new(Subspace::full(), Subspace::line(Vector3::y()));

    let chain_a = poc_union(&planar_loop_output, &parallelogram_a);

    let loop1 = LoopSpec {
        joint_dof_sum: 6,
        actuated_count: 2,
        poc_terms: vec![planar_loop_output.clone()],
    };
    let loop2 = LoopSpec {
        joint_dof_sum: 5,
        actuated_count: 1,
        poc_terms: vec![planar_loop_output, parallelogram_a, chain_b.clone()],
    };

    MechanismTopology {
        loops: vec![loop1, loop2],
        total_joint_dof: 11,
        chain_a,
        chain_b,
    }
}

/// Runs the full mobility analysis for a mechanism description.
pub fn analyze(mech: &MechanismTopology) -> Result<TopologyReport, TopologyError> {
    let xi_per_loop: Vec<usize> = mech.loops.iter().map(LoopSpec::xi).collect();
    let delta_per_loop: Vec<i64> = mech
        .loops
        .iter()
        .zip(&xi_per_loop)
        .map(|(l, &xi)| constraint_degree(l, xi))
        .collect();
    Ok(TopologyReport {
        dof: dof(&mech.loops, mech.total_joint_dof),
        coupling_degree: coupling_degree(&delta_per_loop)?,
        platform_poc: poc_intersect(&mech.chain_a, &mech.chain_b),
        xi_per_loop,
        delta_per_loop,
    })
}

/// Mobility report of the built-in manipulator.
pub fn builtin_report() -> TopologyReport {
    analyze(&builtin_mechanism()).expect("built-in decomposition balances")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t2r1_x() -> PocSet {
        PocSet::new(
            Subspace::plane(Vector3::y(), Vector3::z()),
            Subspace::line(Vector3::x()),
        )
    }

    #[test]
    fn union_completes_translations() {
        let planar = t2r1_x();
        let pa = PocSet::new(Subspace::line(Vector3::new(1.0, 0.0, 1.0)), Subspace::zero());
        let chain_a = poc_union(&planar, &pa);
        assert_eq!(chain_a.translation.dim(), 3);
        assert_eq!(chain_a.rotation.dim(), 1);
        assert!(chain_a.rotation.contains(Vector3::x()));
    }

    #[test]
    fn intersect_cancels_distinct_rotations() {
        let a = PocSet::new(Subspace::full(), Subspace::line(Vector3::x()));
        let b = PocSet::new(Subspace::full(), Subspace::line(Vector3::y()));
        let platform = poc_intersect(&a, &b);
        assert_eq!(platform.translation.dim(), 3);
        assert_eq!(platform.rotation.dim(), 0);

        let same = poc_intersect(&a, &a);
        assert_eq!(same.rotation.dim(), 1);
        assert!(same.rotation.contains(Vector3::x()));
    }

    #[test]
    fn displacement_counts() {
        let planar = t2r1_x();
        let empty = PocSet::new(Subspace::zero(), Subspace::zero());
        assert_eq!(independent_displacement_count(&empty, &planar), 3);

        let pa = PocSet::new(Subspace::line(Vector3::new(1.0, 0.0, 1.0)), Subspace::zero());
        let chain_b = PocSet::new(Subspace::full(), Subspace::line(Vector3::y()));
        let partial = poc_union(&planar, &pa);
        assert_eq!(independent_displacement_count(&partial, &chain_b), 5);

        let full = PocSet::new(Subspace::full(), Subspace::full());
        assert_eq!(independent_displacement_count(&full, &planar), 6);
    }

    #[test]
    fn dof_structures() {
        // Single loop of six 1-DOF joints with xi = 6 is a structure.
        let generic = LoopSpec {
            joint_dof_sum: 6,
            actuated_count: 0,
            poc_terms: vec![PocSet::new(Subspace::full(), Subspace::full())],
        };
        assert_eq!(dof(std::slice::from_ref(&generic), 6), 0);
        // No loops: an open chain keeps every joint freedom.
        assert_eq!(dof(&[], 7), 7);
    }

    #[test]
    fn constraint_and_coupling_degrees() {
        let mech = builtin_mechanism();
        assert_eq!(constraint_degree(&mech.loops[0], 3), 1);
        assert_eq!(constraint_degree(&mech.loops[1], 5), -1);
        // Balanced loop: freedoms exactly consumed by actuation + closure.
        let balanced = LoopSpec {
            joint_dof_sum: 7,
            actuated_count: 1,
            poc_terms: vec![],
        };
        assert_eq!(constraint_degree(&balanced, 6), 0);
        assert_eq!(coupling_degree(&[1, -1]).unwrap(), 1);
        assert_eq!(coupling_degree(&[0]).unwrap(), 0);
        assert_eq!(coupling_degree(&[2, -1, -1]).unwrap(), 2);
        assert_eq!(coupling_degree(&[1, 1]), Err(TopologyError::NotAnSkc(2)));
    }

    #[test]
    fn builtin_report_values() {
        let report = builtin_report();
        assert_eq!(report.xi_per_loop, vec![3, 5]);
        assert_eq!(report.dof, 3);
        assert_eq!(report.delta_per_loop, vec![1, -1]);
        assert_eq!(report.coupling_degree, 1);
        assert_eq!(report.platform_poc.translation.dim(), 3);
        assert_eq!(report.platform_poc.rotation.dim(), 0);
    }

    fn arb_subspace() -> impl Strategy<Value = Subspace> {
        proptest::collection::vec(
            (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vector3::new(x, y, z)),
            0..4,
        )
        .prop_map(|vs| Subspace::span(&vs))
    }

    fn arb_poc() -> impl Strategy<Value = PocSet> {
        (arb_subspace(), arb_subspace()).prop_map(|(t, r)| PocSet::new(t, r))
    }

    proptest! {
        #[test]
        fn union_is_commutative_idempotent(a in arb_poc(), b in arb_poc()) {
            let ab = poc_union(&a, &b);
            let ba = poc_union(&b, &a);
            prop_assert_eq!(ab.translation.dim(), ba.translation.dim());
            prop_assert_eq!(ab.rotation.dim(), ba.rotation.dim());
            let aa = poc_union(&a, &a);
            prop_assert_eq!(aa.dim(), a.dim());
        }

        #[test]
        fn intersect_is_commutative_idempotent(a in arb_poc(), b in arb_poc()) {
            let ab = poc_intersect(&a, &b);
            let ba = poc_intersect(&b, &a);
            prop_assert_eq!(ab.translation.dim(), ba.translation.dim());
            prop_assert_eq!(ab.rotation.dim(), ba.rotation.dim());
            let aa = poc_intersect(&a, &a);
            prop_assert_eq!(aa.dim(), a.dim());
        }

        #[test]
        fn dims_are_monotone(a in arb_poc(), b in arb_poc()) {
            let lo = poc_intersect(&a, &b).dim();
            let hi = poc_union(&a, &b).dim();
            prop_assert!(lo <= a.dim().min(b.dim()));
            prop_assert!(a.dim().max(b.dim()) <= hi);
        }

        #[test]
        fn union_associative(a in arb_poc(), b in arb_poc(), c in arb_poc()) {
            let left = poc_union(&poc_union(&a, &b), &c);
            let right = poc_union(&a, &poc_union(&b, &c));
            prop_assert_eq!(left.translation.dim(), right.translation.dim());
            prop_assert_eq!(left.rotation.dim(), right.rotation.dim());
        }
    }
}
