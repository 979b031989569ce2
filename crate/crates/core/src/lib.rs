//! Protocol engine and adversarial simulator for ZK Secret Santa.
//!
//! A game runs in three steps after a one-off setup:
//!
//! 1. **Commit.** Every registered participant signs `address || eventId`
//!    with deterministic ECDSA and publishes `H = hash(sig)` into the
//!    commitments tree.
//! 2. **Determine.** Every participant anonymously (through a relayer)
//!    appends a randomness value to the senders array, proving membership of
//!    both trees and binding a nullifier `hash(sig.s)` that can be spent once.
//! 3. **Disclose.** Every participant claims one sender slot as receiver,
//!    proving privately that the slot's nullifier is not their own.
//!
//! The result is a derangement: each participant sends exactly one gift, and
//! nobody draws their own slot. Module map:
//!
//! | module       | contents                                               |
//! |--------------|--------------------------------------------------------|
//! | [`primitives`] | field elements, hash-to-field, addresses, event ids   |
//! | [`smt`]        | fixed-depth sparse Merkle tree with inclusion proofs  |
//! | [`signing`]    | RFC 6979 ECDSA, ecrecover, commitments, nullifiers    |
//! | [`relations`]  | sender/receiver relations and the proving backend     |
//! | [`contract`]   | the on-chain state machine                            |
//! | [`envelope`]   | RSA-OAEP delivery-address encryption                  |
//! | [`relayer`]    | origin-stripping relayer and the mempool              |
//! | [`simulator`]  | scripted games, attack scenarios, report verification |

pub mod contract;
pub mod envelope;
pub mod primitives;
pub mod relations;
pub mod relayer;
pub mod signing;
pub mod simulator;
pub mod smt;

mod hexfmt;

pub use contract::{Call, Contract, ContractState, Phase, Receipt, RevertReason, Transaction};
pub use primitives::{hash_to_field, Address, EventId, FieldElement, Message};
pub use relations::{Proof, ProvingBackend, RelationTag, TransparentBackend};
pub use signing::{Commitment, KeyPair, Nullifier, Signature};
pub use simulator::{AdversaryScript, GameConfig, GameReport};
pub use smt::{MerkleProof, SparseMerkleTree};
