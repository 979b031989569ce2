//! Fixed-depth sparse Merkle tree keyed by field elements.
//!
//! Hashing layout:
//! - leaf node: `hash(0x00 || index || value)`
//! - inner node: `hash(0x01 || left || right)`
//! - empty leaf: the zero element; empty subtrees hash upwards from it.
//!
//! The low `depth` bits of the index pick the path; bit 0 decides the
//! branch just above the leaf (0 = left child).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{hash_to_field_parts, FieldElement};

pub const DEFAULT_DEPTH: usize = 160;
pub const MAX_DEPTH: usize = 256;

const LEAF_TAG: u8 = 0x00;
const NODE_TAG: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("index {0} is already occupied")]
    DuplicateKey(FieldElement),
    #[error("index {index} shares its {depth}-bit path with {existing}")]
    PathCollision {
        index: FieldElement,
        existing: FieldElement,
        depth: usize,
    },
    #[error("index {0} is not in the tree")]
    NotFound(FieldElement),
    #[error("tree depth must be in 1..={MAX_DEPTH}, got {0}")]
    InvalidDepth(usize),
}

pub fn leaf_hash(index: &FieldElement, value: &FieldElement) -> FieldElement {
    hash_to_field_parts(&[&[LEAF_TAG], index.as_bytes(), value.as_bytes()])
}

pub fn node_hash(left: &FieldElement, right: &FieldElement) -> FieldElement {
    hash_to_field_parts(&[&[NODE_TAG], left.as_bytes(), right.as_bytes()])
}

/// Hashes of empty subtrees; entry `l` is the empty node at height `l`.
pub fn default_hashes(depth: usize) -> Vec<FieldElement> {
    let mut out = Vec::with_capacity(depth + 1);
    out.push(FieldElement::ZERO);
    for level in 0..depth {
        let below = out[level];
        out.push(node_hash(&below, &below));
    }
    out
}

/// Inclusion proof: siblings from the leaf level up to just below the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub index: FieldElement,
    pub siblings: Vec<FieldElement>,
}

impl MerkleProof {
    pub fn depth(&self) -> usize {
        self.siblings.len()
    }
}

/// Folds `leaf_hash(proof.index, x)` up the path and compares with `root`.
pub fn merkle_verify(x: &FieldElement, proof: &MerkleProof, root: &FieldElement) -> bool {
    if proof.siblings.len() > MAX_DEPTH {
        return false;
    }
    let mut acc = leaf_hash(&proof.index, x);
    for (level, sibling) in proof.siblings.iter().enumerate() {
        acc = if proof.index.bit(level) {
            node_hash(sibling, &acc)
        } else {
            node_hash(&acc, sibling)
        };
    }
    acc == *root
}

/// Index bits as little-endian u64 limbs, truncated to the tree depth.
type Path = [u64; 4];

fn path_of(index: &FieldElement, depth: usize) -> Path {
    let bytes = index.as_bytes();
    let mut limbs = [0u64; 4];
    for (i, limb) in limbs.iter_mut().enumerate() {
        let start = 32 - 8 * (i + 1);
        *limb = u64::from_be_bytes(bytes[start..start + 8].try_into().unwrap());
    }
    for (i, limb) in limbs.iter_mut().enumerate() {
        let lo = 64 * i;
        if depth <= lo {
            *limb = 0;
        } else if depth < lo + 64 {
            *limb &= (1u64 << (depth - lo)) - 1;
        }
    }
    limbs
}

fn shr1(path: Path) -> Path {
    let mut out = [0u64; 4];
    for i in 0..4 {
        out[i] = path[i] >> 1;
        if i + 1 < 4 {
            out[i] |= path[i + 1] << 63;
        }
    }
    out
}

fn sibling_of(path: Path) -> Path {
    let mut out = path;
    out[0] ^= 1;
    out
}

#[derive(Debug, Clone)]
pub struct SparseMerkleTree {
    depth: usize,
    leaves: BTreeMap<FieldElement, FieldElement>,
    /// Non-empty nodes keyed by (height, path prefix). Height 0 holds leaf hashes.
    nodes: HashMap<(usize, Path), FieldElement>,
    slots: HashMap<Path, FieldElement>,
    defaults: Vec<FieldElement>,
    root: FieldElement,
}

impl SparseMerkleTree {
    pub fn new(depth: usize) -> Result<Self, SmtError> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(SmtError::InvalidDepth(depth));
        }
        let defaults = default_hashes(depth);
        let root = defaults[depth];
        Ok(SparseMerkleTree {
            depth,
            leaves: BTreeMap::new(),
            nodes: HashMap::new(),
            slots: HashMap::new(),
            defaults,
            root,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> FieldElement {
        self.root
    }

    pub fn empty_root(&self) -> FieldElement {
        self.defaults[self.depth]
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn contains(&self, index: &FieldElement) -> bool {
        self.leaves.contains_key(index)
    }

    pub fn get(&self, index: &FieldElement) -> Option<FieldElement> {
        self.leaves.get(index).copied()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&FieldElement, &FieldElement)> {
        self.leaves.iter()
    }

    /// Inserts a new leaf and returns the new root. Occupied indexes (or
    /// indexes whose truncated path is taken) are rejected.
    pub fn insert(&mut self, index: FieldElement, value: FieldElement) -> Result<FieldElement, SmtError> {
        if self.leaves.contains_key(&index) {
            return Err(SmtError::DuplicateKey(index));
        }
        let mut path = path_of(&index, self.depth);
        if let Some(existing) = self.slots.get(&path) {
            return Err(SmtError::PathCollision {
                index,
                existing: *existing,
                depth: self.depth,
            });
        }
        self.leaves.insert(index, value);
        self.slots.insert(path, index);

        let mut acc = leaf_hash(&index, &value);
        self.nodes.insert((0, path), acc);
        for level in 0..self.depth {
            let sibling = self.node(level, sibling_of(path));
            acc = if path[0] & 1 == 1 {
                node_hash(&sibling, &acc)
            } else {
                node_hash(&acc, &sibling)
            };
            path = shr1(path);
            self.nodes.insert((level + 1, path), acc);
        }
        self.root = acc;
        Ok(acc)
    }

    pub fn prove(&self, index: &FieldElement) -> Result<MerkleProof, SmtError> {
        if !self.leaves.contains_key(index) {
            return Err(SmtError::NotFound(*index));
        }
        let mut path = path_of(index, self.depth);
        let mut siblings = Vec::with_capacity(self.depth);
        for level in 0..self.depth {
            siblings.push(self.node(level, sibling_of(path)));
            path = shr1(path);
        }
        Ok(MerkleProof {
            index: *index,
            siblings,
        })
    }

    fn node(&self, level: usize, path: Path) -> FieldElement {
        self.nodes
            .get(&(level, path))
            .copied()
            .unwrap_or(self.defaults[level])
    }

    /// Root recomputed from the stored leaves alone, ignoring the node cache.
    pub fn recompute_root(&self) -> FieldElement {
        let mut layer: BTreeMap<Path, FieldElement> = self
            .leaves
            .iter()
            .map(|(i, v)| (path_of(i, self.depth), leaf_hash(i, v)))
            .collect();
        for level in 0..self.depth {
            let mut parents = BTreeMap::new();
            for (path, hash) in &layer {
                let parent = shr1(*path);
                if parents.contains_key(&parent) {
                    continue;
                }
                let sibling = layer
                    .get(&sibling_of(*path))
                    .copied()
                    .unwrap_or(self.defaults[level]);
                let joined = if path[0] & 1 == 1 {
                    node_hash(&sibling, hash)
                } else {
                    node_hash(hash, &sibling)
                };
                parents.insert(parent, joined);
            }
            layer = parents;
        }
        layer
            .into_values()
            .next()
            .unwrap_or(self.defaults[self.depth])
    }

    /// True iff the incrementally maintained root matches [`Self::recompute_root`].
    pub fn audit_root(&self) -> bool {
        self.root == self.recompute_root()
    }

    #[cfg(test)]
    pub(crate) fn corrupt_leaf(&mut self, index: FieldElement, value: FieldElement) {
        self.leaves.insert(index, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::hash_to_field;
    use proptest::prelude::*;

    fn fe(n: u64) -> FieldElement {
        hash_to_field(&n.to_be_bytes())
    }

    #[test]
    fn insert_changes_root() {
        let mut t = SparseMerkleTree::new(DEFAULT_DEPTH).unwrap();
        let empty = t.root();
        assert_eq!(empty, t.empty_root());
        t.insert(fe(1), fe(2)).unwrap();
        assert_ne!(t.root(), empty);
    }

    #[test]
    fn duplicate_index_is_rejected() {
        let mut t = SparseMerkleTree::new(DEFAULT_DEPTH).unwrap();
        t.insert(fe(1), fe(2)).unwrap();
        let before = t.root();
        assert_eq!(t.insert(fe(1), fe(3)), Err(SmtError::DuplicateKey(fe(1))));
        assert_eq!(t.root(), before);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn truncated_path_collision_is_rejected() {
        let mut t = SparseMerkleTree::new(8).unwrap();
        t.insert(FieldElement::from_u64(0x105), fe(1)).unwrap();
        let err = t.insert(FieldElement::from_u64(0x205), fe(2)).unwrap_err();
        assert!(matches!(err, SmtError::PathCollision { .. }));
    }

    #[test]
    fn single_leaf_proof_is_all_default_hashes() {
        let mut t = SparseMerkleTree::new(DEFAULT_DEPTH).unwrap();
        t.insert(fe(9), fe(10)).unwrap();
        let proof = t.prove(&fe(9)).unwrap();
        assert_eq!(proof.siblings.len(), DEFAULT_DEPTH);
        assert_eq!(proof.siblings, default_hashes(DEFAULT_DEPTH)[..DEFAULT_DEPTH].to_vec());
        assert!(merkle_verify(&fe(10), &proof, &t.root()));
    }

    #[test]
    fn absent_index_is_not_found() {
        let mut t = SparseMerkleTree::new(16).unwrap();
        t.insert(fe(1), fe(1)).unwrap();
        assert_eq!(t.prove(&fe(2)), Err(SmtError::NotFound(fe(2))));
    }

    #[test]
    fn wrong_root_or_value_fails() {
        let mut t = SparseMerkleTree::new(32).unwrap();
        for i in 0..5 {
            t.insert(fe(i), fe(i + 100)).unwrap();
        }
        let proof = t.prove(&fe(3)).unwrap();
        assert!(merkle_verify(&fe(103), &proof, &t.root()));
        assert!(!merkle_verify(&fe(104), &proof, &t.root()));
        assert!(!merkle_verify(&fe(103), &proof, &t.empty_root()));
    }

    #[test]
    fn audit_detects_corruption() {
        let t = SparseMerkleTree::new(DEFAULT_DEPTH).unwrap();
        assert!(t.audit_root());
        let mut t = t;
        for i in 0..10 {
            t.insert(fe(i), fe(i)).unwrap();
            assert!(t.audit_root());
        }
        t.corrupt_leaf(fe(4), fe(999));
        assert!(!t.audit_root());
    }

    #[test]
    fn invalid_depths() {
        assert_eq!(SparseMerkleTree::new(0).unwrap_err(), SmtError::InvalidDepth(0));
        assert_eq!(SparseMerkleTree::new(257).unwrap_err(), SmtError::InvalidDepth(257));
        let mut full = SparseMerkleTree::new(256).unwrap();
        full.insert(fe(1), fe(1)).unwrap();
        assert!(full.audit_root());
    }

    #[test]
    fn proof_json_shape() {
        let mut t = SparseMerkleTree::new(4).unwrap();
        t.insert(fe(1), fe(1)).unwrap();
        let proof = t.prove(&fe(1)).unwrap();
        let json: serde_json::Value = serde_json::to_value(&proof).unwrap();
        assert_eq!(json["siblings"].as_array().unwrap().len(), 4);
        assert!(json["index"].as_str().unwrap().starts_with("0x"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn root_is_insertion_order_independent(
            keys in proptest::collection::btree_set(any::<u64>(), 1..24),
            seed in any::<u64>(),
        ) {
            let keys: Vec<u64> = keys.into_iter().collect();
            let mut shuffled = keys.clone();
            // cheap deterministic permutation
            shuffled.sort_by_key(|k| k.wrapping_mul(seed | 1).rotate_left(17));
            let mut a = SparseMerkleTree::new(64).unwrap();
            let mut b = SparseMerkleTree::new(64).unwrap();
            for k in &keys { a.insert(fe(*k), fe(k ^ 1)).unwrap(); }
            for k in &shuffled { b.insert(fe(*k), fe(k ^ 1)).unwrap(); }
            prop_assert_eq!(a.root(), b.root());
            for k in &keys {
                let proof = a.prove(&fe(*k)).unwrap();
                prop_assert!(merkle_verify(&fe(k ^ 1), &proof, &a.root()));
            }
        }

        #[test]
        fn fabricated_proofs_for_absent_values_fail(
            keys in proptest::collection::btree_set(any::<u64>(), 1..16),
            absent in any::<u64>(),
            junk in proptest::collection::vec(any::<[u8; 32]>(), 32),
        ) {
            prop_assume!(!keys.contains(&absent));
            let mut t = SparseMerkleTree::new(32).unwrap();
            for k in &keys { t.insert(fe(*k), fe(*k)).unwrap(); }
            let fabricated = MerkleProof {
                index: fe(absent),
                siblings: junk.into_iter().map(FieldElement::from_be_bytes_reduced).collect(),
            };
            prop_assert!(!merkle_verify(&fe(absent), &fabricated, &t.root()));
            // reusing a real proof for a different value fails too
            let real = t.prove(&fe(*keys.iter().next().unwrap())).unwrap();
            prop_assert!(!merkle_verify(&fe(absent), &real, &t.root()));
        }
    }
}
