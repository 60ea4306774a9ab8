//! Access modes, access vectors, and control vectors.
//!
//! A tuple-based ADT of dimension `N` exposes operations whose per-field
//! access pattern is summarised by an [`AccessVector`] of `N` modes drawn
//! from `Null < Read < Write`. Two operations *strongly commute* when their
//! vectors are componentwise compatible, and a whole bag of in-flight
//! operations can be summarised by two per-field counters (readers and
//! writers) without losing the commutativity information. Everything in
//! this module is a pure value-level function; the scheduler in
//! [`crate::monitor`] is built on top of it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-field access mode. The derived order is `Null < Read < Write`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub enum AccessMode {
    #[default]
    Null,
    Read,
    Write,
}

impl AccessMode {
    pub const ALL: [AccessMode; 3] = [AccessMode::Null, AccessMode::Read, AccessMode::Write];

    /// Classical compatibility relation: `Null` goes with everything,
    /// readers go with readers, writers go with nothing but `Null`.
    pub fn compatible(self, other: AccessMode) -> bool {
        match (self, other) {
            (AccessMode::Null, _) | (_, AccessMode::Null) => true,
            (AccessMode::Read, AccessMode::Read) => true,
            _ => false,
        }
    }

    pub fn letter(self) -> char {
        match self {
            AccessMode::Null => 'N',
            AccessMode::Read => 'R',
            AccessMode::Write => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<AccessMode> {
        match c {
            'N' => Some(AccessMode::Null),
            'R' => Some(AccessMode::Read),
            'W' => Some(AccessMode::Write),
            _ => None,
        }
    }
}

/// Mismatched vector dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dimension mismatch: {left} vs {right}")]
pub struct DimensionError {
    pub left: usize,
    pub right: usize,
}

/// An ordered list of [`AccessMode`]s, one per field of the owning schema.
///
/// The textual form is a parenthesised comma list of letters, e.g.
/// `(R,N,W)`; [`fmt::Display`] and [`FromStr`] round-trip it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessVector(Vec<AccessMode>);

impl AccessVector {
    pub fn new(modes: Vec<AccessMode>) -> Self {
        AccessVector(modes)
    }

    /// All-`Null` vector of the given dimension.
    pub fn null(dim: usize) -> Self {
        AccessVector(vec![AccessMode::Null; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> AccessMode {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, m: AccessMode) {
        self.0[i] = m;
    }

    pub fn modes(&self) -> &[AccessMode] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = AccessMode> + '_ {
        self.0.iter().copied()
    }

    /// Raise field `i` to at least `m`, never demoting. Returns the new mode.
    pub fn upgrade(&mut self, i: usize, m: AccessMode) -> AccessMode {
        if m > self.0[i] {
            self.0[i] = m;
        }
        self.0[i]
    }

    fn check_dim(&self, other: &AccessVector) -> Result<(), DimensionError> {
        if self.len() != other.len() {
            return Err(DimensionError {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }

    /// Strong commutativity: componentwise compatibility of the two vectors.
    pub fn commutes_with(&self, other: &AccessVector) -> Result<bool, DimensionError> {
        self.check_dim(other)?;
        Ok(self
            .iter()
            .zip(other.iter())
            .all(|(a, b)| a.compatible(b)))
    }

    /// Componentwise `<=` under `Null < Read < Write`.
    pub fn leq(&self, other: &AccessVector) -> Result<bool, DimensionError> {
        self.check_dim(other)?;
        Ok(self.iter().zip(other.iter()).all(|(a, b)| a <= b))
    }
}

impl From<Vec<AccessMode>> for AccessVector {
    fn from(modes: Vec<AccessMode>) -> Self {
        AccessVector(modes)
    }
}

impl fmt::Display for AccessVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", m.letter())?;
        }
        write!(f, ")")
    }
}

/// Error parsing the `(R,N,W)` textual form.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed access vector: {0}")]
pub struct VectorParseError(pub String);

impl FromStr for AccessVector {
    type Err = VectorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| VectorParseError(s.to_string()))?;
        if inner.is_empty() {
            return Ok(AccessVector(Vec::new()));
        }
        inner
            .split(',')
            .map(|part| {
                let part = part.trim();
                let mut chars = part.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => {
                        AccessMode::from_letter(c).ok_or_else(|| VectorParseError(s.to_string()))
                    }
                    _ => Err(VectorParseError(s.to_string())),
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(AccessVector)
    }
}

/// Per-field reader counts and writer counts summarising a bag of vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlVectors {
    /// Number of bag members reading each field.
    pub rcv: Vec<u32>,
    /// Number of bag members writing each field.
    pub wcv: Vec<u32>,
}

impl ControlVectors {
    pub fn zeroed(dim: usize) -> Self {
        ControlVectors {
            rcv: vec![0; dim],
            wcv: vec![0; dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.rcv.len()
    }

    /// True iff the summarised bag can be pairwise commutative: on every
    /// field, readers exclude writers and there is at most one writer.
    pub fn is_conflict_free(&self) -> bool {
        self.rcv
            .iter()
            .zip(self.wcv.iter())
            .all(|(&r, &w)| (r == 0 || w == 0) && w <= 1)
    }
}

/// An unordered multiset of equal-length access vectors.
///
/// Repeated vectors are distinct members: each repetition counts once in
/// the control-vector sums and once per unordered pair in the pairwise
/// commutativity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationBag {
    vectors: Vec<AccessVector>,
    dim: usize,
}

impl OperationBag {
    /// Builds a bag, rejecting mixed dimensions. An empty bag has
    /// dimension 0.
    pub fn new(vectors: Vec<AccessVector>) -> Result<Self, DimensionError> {
        let dim = vectors.first().map(AccessVector::len).unwrap_or(0);
        for v in &vectors {
            if v.len() != dim {
                return Err(DimensionError {
                    left: dim,
                    right: v.len(),
                });
            }
        }
        Ok(OperationBag { vectors, dim })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[AccessVector] {
        &self.vectors
    }

    /// Pairwise commutativity by definition: every unordered pair of
    /// distinct members commutes. Quantifies over member *positions*, so a
    /// repeated vector is checked against its own copies.
    pub fn is_pairwise_commutative(&self) -> bool {
        for (i, a) in self.vectors.iter().enumerate() {
            for b in &self.vectors[i + 1..] {
                if !a.commutes_with(b).expect("bag members share a dimension") {
                    return false;
                }
            }
        }
        true
    }

    /// Reader and writer counts per field over all members.
    pub fn control_vectors(&self) -> ControlVectors {
        let mut cv = ControlVectors::zeroed(self.dim);
        for v in &self.vectors {
            for (i, m) in v.iter().enumerate() {
                match m {
                    AccessMode::Read => cv.rcv[i] += 1,
                    AccessMode::Write => cv.wcv[i] += 1,
                    AccessMode::Null => {}
                }
            }
        }
        cv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use AccessMode::{Null, Read, Write};

    fn av(modes: &[AccessMode]) -> AccessVector {
        AccessVector::new(modes.to_vec())
    }

    #[test]
    fn compatibility_table() {
        // All nine entries of the classical relation.
        assert!(Null.compatible(Null));
        assert!(Null.compatible(Read));
        assert!(Null.compatible(Write));
        assert!(Read.compatible(Null));
        assert!(Read.compatible(Read));
        assert!(!Read.compatible(Write));
        assert!(Write.compatible(Null));
        assert!(!Write.compatible(Read));
        assert!(!Write.compatible(Write));
    }

    #[test]
    fn mode_order() {
        assert!(Null < Read && Read < Write);
        assert_eq!(AccessMode::ALL.len(), 3);
    }

    #[test]
    fn vectors_commute_examples() {
        let a = av(&[Read, Null, Write]);
        let b = av(&[Read, Write, Null]);
        assert!(a.commutes_with(&b).unwrap());

        let c = av(&[Write, Null]);
        let d = av(&[Read, Null]);
        assert!(!c.commutes_with(&d).unwrap());

        let any = av(&[Write, Read, Write]);
        let nulls = AccessVector::null(3);
        assert!(any.commutes_with(&nulls).unwrap());
    }

    #[test]
    fn commute_dimension_error() {
        let a = av(&[Read]);
        let b = av(&[Read, Read]);
        assert_eq!(
            a.commutes_with(&b),
            Err(DimensionError { left: 1, right: 2 })
        );
        assert!(a.leq(&b).is_err());
    }

    #[test]
    fn bag_pairwise_examples() {
        let empty = OperationBag::new(vec![]).unwrap();
        assert!(empty.is_pairwise_commutative());

        let ok = OperationBag::new(vec![
            av(&[Read, Null]),
            av(&[Read, Write]),
            av(&[Read, Null]),
        ])
        .unwrap();
        assert!(ok.is_pairwise_commutative());

        let clash = OperationBag::new(vec![
            av(&[Write, Null]),
            av(&[Null, Write]),
            av(&[Write, Null]),
        ])
        .unwrap();
        assert!(!clash.is_pairwise_commutative());
    }

    #[test]
    fn bag_mixed_dimensions_rejected() {
        let err = OperationBag::new(vec![av(&[Read]), av(&[Read, Read])]);
        assert_eq!(err, Err(DimensionError { left: 1, right: 2 }));
    }

    #[test]
    fn control_vector_examples() {
        let bag = OperationBag::new(vec![av(&[Read, Null]), av(&[Read, Write])]).unwrap();
        let cv = bag.control_vectors();
        assert_eq!(cv.rcv, vec![2, 0]);
        assert_eq!(cv.wcv, vec![0, 1]);

        let empty = OperationBag::new(vec![]).unwrap();
        let cv = empty.control_vectors();
        assert!(cv.rcv.is_empty() && cv.wcv.is_empty());

        let one = OperationBag::new(vec![av(&[Write, Write])]).unwrap();
        let cv = one.control_vectors();
        assert_eq!(cv.rcv, vec![0, 0]);
        assert_eq!(cv.wcv, vec![1, 1]);
    }

    #[test]
    fn conflict_free_examples() {
        let cv = ControlVectors {
            rcv: vec![2, 0],
            wcv: vec![0, 1],
        };
        assert!(cv.is_conflict_free());

        let clash = ControlVectors {
            rcv: vec![1, 0],
            wcv: vec![1, 0],
        };
        assert!(!clash.is_conflict_free());

        assert!(ControlVectors::zeroed(4).is_conflict_free());

        let two_writers = ControlVectors {
            rcv: vec![0],
            wcv: vec![2],
        };
        assert!(!two_writers.is_conflict_free());
    }

    #[test]
    fn leq_examples() {
        assert!(av(&[Read, Null]).leq(&av(&[Write, Read])).unwrap());
        assert!(!av(&[Write]).leq(&av(&[Read])).unwrap());
        let v = av(&[Read, Write, Null]);
        assert!(v.leq(&v).unwrap());
    }

    #[test]
    fn display_and_parse_round_trip() {
        let v = av(&[Read, Null, Write]);
        assert_eq!(v.to_string(), "(R,N,W)");
        assert_eq!("(R,N,W)".parse::<AccessVector>().unwrap(), v);
        assert!("(R,X)".parse::<AccessVector>().is_err());
        assert!("R,N".parse::<AccessVector>().is_err());
    }

    /// Every multiset of vectors with size <= `max_bag` over all vectors of
    /// the given dimension, by non-decreasing index (multisets, not tuples).
    fn enumerate_bags(dim: usize, max_bag: usize) -> Vec<OperationBag> {
        let universe: Vec<AccessVector> = {
            let mut out = vec![Vec::new()];
            for _ in 0..dim {
                let mut next = Vec::new();
                for prefix in &out {
                    for m in AccessMode::ALL {
                        let mut v = prefix.clone();
                        v.push(m);
                        next.push(v);
                    }
                }
                out = next;
            }
            out.into_iter().map(AccessVector::new).collect()
        };
        let mut bags = Vec::new();
        // Stack of (members-so-far, minimum universe index for the next member).
        let mut stack: Vec<(Vec<AccessVector>, usize)> = vec![(Vec::new(), 0)];
        while let Some((members, min)) = stack.pop() {
            bags.push(OperationBag::new(members.clone()).unwrap());
            if members.len() == max_bag {
                continue;
            }
            for idx in min..universe.len() {
                let mut next = members.clone();
                next.push(universe[idx].clone());
                stack.push((next, idx));
            }
        }
        bags
    }

    #[test]
    fn control_vector_summary_matches_pairwise_exhaustively() {
        // Both routes computed independently: the pairwise definition vs the
        // conflict-freedom of the per-field counters.
        let mut checked = 0usize;
        for dim in 0..=3 {
            for bag in enumerate_bags(dim, 4) {
                assert_eq!(
                    bag.is_pairwise_commutative(),
                    bag.control_vectors().is_conflict_free(),
                    "bag disagrees: {:?}",
                    bag.vectors()
                );
                checked += 1;
            }
        }
        assert!(checked > 30_000, "only {checked} bags enumerated");
    }

    fn arb_mode() -> impl Strategy<Value = AccessMode> {
        prop_oneof![Just(Null), Just(Read), Just(Write)]
    }

    fn arb_vector(dim: usize) -> impl Strategy<Value = AccessVector> {
        prop::collection::vec(arb_mode(), dim).prop_map(AccessVector::new)
    }

    proptest! {
        #[test]
        fn compatible_is_symmetric(a in arb_mode(), b in arb_mode()) {
            prop_assert_eq!(a.compatible(b), b.compatible(a));
        }

        #[test]
        fn commutes_is_symmetric(dim in 1usize..6, seed in 0u64..1000) {
            let mut rng = crate::harness::test_rng(seed);
            let a = crate::harness::random_vector(dim, &mut rng);
            let b = crate::harness::random_vector(dim, &mut rng);
            prop_assert_eq!(a.commutes_with(&b).unwrap(), b.commutes_with(&a).unwrap());
        }

        #[test]
        fn summary_matches_pairwise_random(
            dim in 1usize..=6,
            n in 0usize..=6,
            seed in proptest::num::u64::ANY,
        ) {
            let mut rng = crate::harness::test_rng(seed);
            let vectors = (0..n).map(|_| crate::harness::random_vector(dim, &mut rng)).collect();
            let bag = OperationBag::new(vectors).unwrap();
            prop_assert_eq!(
                bag.is_pairwise_commutative(),
                bag.control_vectors().is_conflict_free()
            );
        }

        #[test]
        fn lowering_preserves_commutation(dim in 1usize..6, seed in proptest::num::u64::ANY) {
            // If a' <= a and a commutes with b then a' commutes with b.
            let mut rng = crate::harness::test_rng(seed);
            let a = crate::harness::random_vector(dim, &mut rng);
            let b = crate::harness::random_vector(dim, &mut rng);
            let lowered = crate::harness::random_lowering(&a, &mut rng);
            prop_assert!(lowered.leq(&a).unwrap());
            if a.commutes_with(&b).unwrap() {
                prop_assert!(lowered.commutes_with(&b).unwrap());
            }
        }

        #[test]
        fn display_parse_round_trip_random(dim in 0usize..7, seed in proptest::num::u64::ANY) {
            let mut rng = crate::harness::test_rng(seed);
            let v = crate::harness::random_vector(dim, &mut rng);
            let text = v.to_string();
            prop_assert_eq!(text.parse::<AccessVector>().unwrap(), v);
        }
    }
}
