//! Shared test oracles.
#![allow(dead_code)]

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use zkss::smt::merkle_verify;
use zkss::{FieldElement, SparseMerkleTree};

pub fn h(parts: &[&[u8]]) -> FieldElement {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    FieldElement::from_be_bytes_reduced(hasher.finalize().into())
}

/// Root of the subtree at `height` holding `leaves`, splitting on bit
/// `height - 1` at each step. Shares no code with the tree under test.
pub fn oracle_root(
    height: usize,
    leaves: &[(FieldElement, FieldElement)],
    empty: &mut HashMap<usize, FieldElement>,
) -> FieldElement {
    if leaves.is_empty() {
        if let Some(e) = empty.get(&height) {
            return *e;
        }
        let e = if height == 0 {
            FieldElement::ZERO
        } else {
            let below = oracle_root(height - 1, &[], empty);
            h(&[&[1], below.as_bytes(), below.as_bytes()])
        };
        empty.insert(height, e);
        return e;
    }
    if height == 0 {
        assert_eq!(leaves.len(), 1, "two leaves on one path");
        let (index, value) = leaves[0];
        return h(&[&[0], index.as_bytes(), value.as_bytes()]);
    }
    let (right, left): (Vec<_>, Vec<_>) = leaves.iter().partition(|(i, _)| i.bit(height - 1));
    let l = oracle_root(height - 1, &left, empty);
    let r = oracle_root(height - 1, &right, empty);
    h(&[&[1], l.as_bytes(), r.as_bytes()])
}

pub fn perturb(x: &FieldElement) -> FieldElement {
    x.add(&FieldElement::from_u64(1))
}

pub fn check_tree(depth: usize, indices: &[FieldElement]) {
    let mut tree = SparseMerkleTree::new(depth).unwrap();
    let mut leaves = Vec::new();
    for (k, index) in indices.iter().enumerate() {
        let value = if k % 2 == 0 { *index } else { h(&[b"v", index.as_bytes()]) };
        tree.insert(*index, value).unwrap();
        leaves.push((*index, value));
    }
    let mut empty = HashMap::new();
    let expected = oracle_root(depth, &leaves, &mut empty);
    assert_eq!(tree.root(), expected, "depth {depth}, {} leaves", leaves.len());
    assert_eq!(tree.recompute_root(), expected);

    for (index, value) in &leaves {
        let proof = tree.prove(index).unwrap();
        assert_eq!(proof.depth(), depth);
        assert!(merkle_verify(value, &proof, &expected));
        assert!(!merkle_verify(&perturb(value), &proof, &expected));
        let mut moved = proof.clone();
        moved.index = perturb(index);
        assert!(!merkle_verify(value, &moved, &expected));
        for level in 0..depth {
            let mut bad = proof.clone();
            bad.siblings[level] = perturb(&bad.siblings[level]);
            assert!(
                !merkle_verify(value, &bad, &expected),
                "sibling {level} perturbation accepted (depth {depth})"
            );
        }
    }
}

pub fn hashed_indices(count: usize, salt: u8) -> Vec<FieldElement> {
    (0..count as u64).map(|i| h(&[&[salt], &i.to_be_bytes()])).collect()
}
