//! Origin-stripping relayer for step-2 submissions, and the FIFO mempool
//! that orders every transaction before it reaches the contract.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::contract::{to_jsonl, Call, Contract, Receipt, Transaction};
use crate::envelope::PublicKeyBytes;
use crate::primitives::{Address, FieldElement};
use crate::relations::{Proof, ProvingBackend, SenderPublicInputs};
use crate::signing::{Commitment, Nullifier};

/// What a participant hands to the relayer. Carries no address by type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayRequest {
    pub proof: Proof,
    pub publics: SenderPublicInputs,
    pub rsa_public_key: Option<PublicKeyBytes>,
    pub submitted_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayLogEntry {
    pub relay_seq: u64,
    pub submitted_at: u64,
    pub mempool_id: u64,
    pub r: FieldElement,
    pub null_s: Nullifier,
    pub rsa_public_key: Option<PublicKeyBytes>,
    pub proof_blob: FieldElement,
}

#[derive(Debug, Default, Clone)]
pub struct Relayer {
    log: Vec<RelayLogEntry>,
}

impl Relayer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps the request in an origin-less transaction and enqueues it.
    /// Returns the queue position.
    pub fn relay(&mut self, request: RelayRequest, mempool: &mut Mempool) -> usize {
        let RelayRequest {
            proof,
            publics,
            rsa_public_key,
            submitted_at,
        } = request;
        let entry = RelayLogEntry {
            relay_seq: self.log.len() as u64,
            submitted_at,
            mempool_id: 0,
            r: publics.r,
            null_s: publics.null_s,
            rsa_public_key: rsa_public_key.clone(),
            proof_blob: proof.blob,
        };
        let (id, position) = mempool.submit(Transaction {
            origin: None,
            call: Call::SubmitRandomness {
                proof,
                publics,
                rsa_public_key,
            },
        });
        self.log.push(RelayLogEntry { mempool_id: id, ..entry });
        position
    }

    pub fn log(&self) -> &[RelayLogEntry] {
        &self.log
    }

    pub fn log_jsonl(&self) -> String {
        to_jsonl(&self.log)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingTx {
    pub id: u64,
    pub tx: Transaction,
}

/// Public view of a pending transaction, as any mempool watcher sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "camelCase")]
pub enum PendingSummary {
    Register {
        id: u64,
        origin: Option<Address>,
        participants: usize,
    },
    Commit {
        id: u64,
        origin: Option<Address>,
        commitment: Commitment,
    },
    SubmitRandomness {
        id: u64,
        origin: Option<Address>,
        r: FieldElement,
        null_s: Nullifier,
    },
    Disclose {
        id: u64,
        origin: Option<Address>,
        target: Nullifier,
    },
}

impl PendingSummary {
    pub fn id(&self) -> u64 {
        match self {
            PendingSummary::Register { id, .. }
            | PendingSummary::Commit { id, .. }
            | PendingSummary::SubmitRandomness { id, .. }
            | PendingSummary::Disclose { id, .. } => *id,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Mempool {
    queue: VecDeque<PendingTx>,
    next_id: u64,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Appends at the tail. Returns (id, position).
    pub fn submit(&mut self, tx: Transaction) -> (u64, usize) {
        let id = self.next_id;
        self.next_id += 1;
        self.queue.push_back(PendingTx { id, tx });
        (id, self.queue.len() - 1)
    }

    /// Adversary hook: places `tx` directly ahead of the pending transaction
    /// `target`. `None` if the target is no longer pending.
    pub fn inject_ahead(&mut self, target: u64, tx: Transaction) -> Option<(u64, usize)> {
        let position = self.queue.iter().position(|p| p.id == target)?;
        let id = self.next_id;
        self.next_id += 1;
        self.queue.insert(position, PendingTx { id, tx });
        Some((id, position))
    }

    pub fn peek(&self) -> Vec<PendingSummary> {
        self.queue.iter().map(summarize).collect()
    }

    pub fn pop(&mut self) -> Option<PendingTx> {
        self.queue.pop_front()
    }

    /// Applies every pending transaction in queue order.
    pub fn drain_into<B: ProvingBackend>(&mut self, contract: &mut Contract<B>) -> Vec<(PendingTx, Receipt)> {
        let mut out = Vec::with_capacity(self.queue.len());
        while let Some(pending) = self.pop() {
            let receipt = contract.apply(pending.tx.clone());
            out.push((pending, receipt));
        }
        out
    }
}

fn summarize(pending: &PendingTx) -> PendingSummary {
    let id = pending.id;
    let origin = pending.tx.origin;
    match &pending.tx.call {
        Call::Register { addresses } => PendingSummary::Register {
            id,
            origin,
            participants: addresses.len(),
        },
        Call::Commit { commitment } => PendingSummary::Commit {
            id,
            origin,
            commitment: *commitment,
        },
        Call::SubmitRandomness { publics, .. } => PendingSummary::SubmitRandomness {
            id,
            origin,
            r: publics.r,
            null_s: publics.null_s,
        },
        Call::Disclose { publics, .. } => PendingSummary::Disclose {
            id,
            origin,
            target: publics.null_s,
        },
    }
}
