//! Sparse Merkle tree against a brute-force top-down recomputation.

mod common;

use std::collections::HashMap;

use common::{check_tree, hashed_indices, oracle_root};
use zkss::{FieldElement, SparseMerkleTree};

#[test]
fn depth_64_one_to_64_leaves() {
    for count in 1..=64 {
        check_tree(64, &hashed_indices(count, 0x40));
    }
}

#[test]
fn depth_20_one_to_64_leaves() {
    for count in 1..=64 {
        check_tree(20, &hashed_indices(count, 0x20));
    }
}

#[test]
fn dense_depth_6_tree() {
    // every leaf of a 64-leaf tree, in several fill orders
    let all: Vec<FieldElement> = (0..64).map(FieldElement::from_u64).collect();
    for count in 1..=64 {
        check_tree(6, &all[..count]);
        let reversed: Vec<FieldElement> = all.iter().rev().take(count).copied().collect();
        check_tree(6, &reversed);
    }
}

#[test]
fn empty_tree_matches_oracle() {
    for depth in [1, 6, 64, 160, 256] {
        let tree = SparseMerkleTree::new(depth).unwrap();
        assert_eq!(tree.root(), oracle_root(depth, &[], &mut HashMap::new()));
    }
}
