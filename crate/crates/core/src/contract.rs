//! The game contract as a deterministic, single-writer state machine.
//!
//! Transactions are applied strictly in log order. A rejected transaction
//! leaves the state untouched and yields a `REVERTED(reason)` receipt.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envelope::PublicKeyBytes;
use crate::hexfmt;
use crate::primitives::{Address, EventId, FieldElement};
use crate::relations::{Proof, ProvingBackend, PublicInputs, ReceiverPublicInputs, SenderPublicInputs};
use crate::signing::{Commitment, Nullifier};
use crate::smt::{SmtError, SparseMerkleTree, DEFAULT_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Setup,
    Commit,
    Determine,
    Disclose,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RevertReason {
    Duplicate,
    TooFew,
    Phase,
    NotParticipant,
    AlreadyCommitted,
    NullifierSpent,
    StaleRoot,
    BadProof,
    MalformedProof,
    NotRelayed,
    MissingOrigin,
    OriginMismatch,
    WrongEvent,
    AnchorMismatch,
    Collision,
    AlreadyDisclosed,
    NoSuchSender,
}

impl fmt::Display for RevertReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_value(self).expect("unit variant");
        f.write_str(text.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Receipt {
    Accepted,
    Reverted(RevertReason),
}

impl Receipt {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Receipt::Accepted)
    }

    pub fn reason(&self) -> Option<RevertReason> {
        match self {
            Receipt::Accepted => None,
            Receipt::Reverted(r) => Some(*r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Call {
    Register {
        addresses: Vec<Address>,
    },
    Commit {
        commitment: Commitment,
    },
    SubmitRandomness {
        proof: Proof,
        publics: SenderPublicInputs,
        rsa_public_key: Option<PublicKeyBytes>,
    },
    Disclose {
        proof: Proof,
        publics: ReceiverPublicInputs,
        #[serde(with = "hexfmt::opt_base64")]
        encrypted_delivery_address: Option<Vec<u8>>,
    },
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::Register { .. } => "register",
            Call::Commit { .. } => "commit",
            Call::SubmitRandomness { .. } => "submitRandomness",
            Call::Disclose { .. } => "disclose",
        }
    }
}

/// `origin` is the on-chain `msg.sender`; `None` for relayed transactions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub origin: Option<Address>,
    pub call: Call,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderEntry {
    pub randomness: FieldElement,
    pub rsa_public_key: Option<PublicKeyBytes>,
    pub nullifier: Nullifier,
    pub assigned_receiver: Option<Address>,
    #[serde(with = "hexfmt::opt_base64")]
    pub encrypted_delivery_address: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedTransaction {
    pub seq: u64,
    pub tx: Transaction,
    pub receipt: Receipt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractParams {
    pub event_id: EventId,
    pub depth: usize,
    pub commitment_step: bool,
}

impl ContractParams {
    pub fn new(event_id: EventId) -> Self {
        ContractParams {
            event_id,
            depth: DEFAULT_DEPTH,
            commitment_step: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContractState {
    params: ContractParams,
    phase: Phase,
    participants: SparseMerkleTree,
    commitments: SparseMerkleTree,
    registered: Vec<Address>,
    registered_set: BTreeSet<Address>,
    committed: BTreeSet<Address>,
    commitment_log: Vec<Commitment>,
    senders: Vec<SenderEntry>,
    sender_by_nullifier: BTreeMap<Nullifier, usize>,
    spent_nullifiers: Vec<Nullifier>,
    disclosed: Vec<Address>,
    disclosed_set: BTreeSet<Address>,
}

impl ContractState {
    pub fn new(params: ContractParams) -> Result<Self, SmtError> {
        Ok(ContractState {
            params,
            phase: Phase::Setup,
            participants: SparseMerkleTree::new(params.depth)?,
            commitments: SparseMerkleTree::new(params.depth)?,
            registered: Vec::new(),
            registered_set: BTreeSet::new(),
            committed: BTreeSet::new(),
            commitment_log: Vec::new(),
            senders: Vec::new(),
            sender_by_nullifier: BTreeMap::new(),
            spent_nullifiers: Vec::new(),
            disclosed: Vec::new(),
            disclosed_set: BTreeSet::new(),
        })
    }

    pub fn params(&self) -> &ContractParams {
        &self.params
    }

    pub fn event_id(&self) -> EventId {
        self.params.event_id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn participants(&self) -> &SparseMerkleTree {
        &self.participants
    }

    pub fn commitments(&self) -> &SparseMerkleTree {
        &self.commitments
    }

    pub fn registered(&self) -> &[Address] {
        &self.registered
    }

    pub fn is_registered(&self, address: &Address) -> bool {
        self.registered_set.contains(address)
    }

    pub fn senders(&self) -> &[SenderEntry] {
        &self.senders
    }

    pub fn spent_nullifiers(&self) -> &[Nullifier] {
        &self.spent_nullifiers
    }

    pub fn has_disclosed(&self, address: &Address) -> bool {
        self.disclosed_set.contains(address)
    }

    pub fn sender_slot(&self, nullifier: &Nullifier) -> Option<&SenderEntry> {
        self.sender_by_nullifier.get(nullifier).map(|&i| &self.senders[i])
    }

    fn n(&self) -> usize {
        self.registered.len()
    }

    fn register(&mut self, addresses: &[Address]) -> Result<(), RevertReason> {
        if self.phase != Phase::Setup {
            return Err(RevertReason::Phase);
        }
        let unique: BTreeSet<&Address> = addresses.iter().collect();
        if unique.len() != addresses.len() {
            return Err(RevertReason::Duplicate);
        }
        if addresses.len() < 2 {
            return Err(RevertReason::TooFew);
        }
        for address in addresses {
            let index = address.registry_index();
            self.participants
                .insert(index, index)
                .map_err(|_| RevertReason::Duplicate)?;
            self.registered.push(*address);
            self.registered_set.insert(*address);
        }
        self.phase = if self.params.commitment_step {
            Phase::Commit
        } else {
            Phase::Determine
        };
        Ok(())
    }

    fn commit(&mut self, origin: Option<Address>, commitment: Commitment) -> Result<(), RevertReason> {
        if self.phase != Phase::Commit {
            return Err(RevertReason::Phase);
        }
        let origin = origin.ok_or(RevertReason::MissingOrigin)?;
        if !self.is_registered(&origin) {
            return Err(RevertReason::NotParticipant);
        }
        if self.committed.contains(&origin) {
            return Err(RevertReason::AlreadyCommitted);
        }
        self.commitments
            .insert(commitment.0, commitment.0)
            .map_err(|_| RevertReason::Duplicate)?;
        self.committed.insert(origin);
        self.commitment_log.push(commitment);
        if self.committed.len() == self.n() {
            self.phase = Phase::Determine;
        }
        Ok(())
    }

    fn submit_randomness<B: ProvingBackend>(
        &mut self,
        backend: &B,
        origin: Option<Address>,
        proof: &Proof,
        publics: &SenderPublicInputs,
        rsa_public_key: &Option<PublicKeyBytes>,
    ) -> Result<(), RevertReason> {
        if origin.is_some() {
            return Err(RevertReason::NotRelayed);
        }
        if self.sender_by_nullifier.contains_key(&publics.null_s) {
            return Err(RevertReason::NullifierSpent);
        }
        if self.phase != Phase::Determine {
            return Err(RevertReason::Phase);
        }
        if publics.event_id != self.params.event_id {
            return Err(RevertReason::WrongEvent);
        }
        if publics.root_p != self.participants.root() || publics.root_c != self.commitments.root() {
            return Err(RevertReason::StaleRoot);
        }
        if let Some(key) = rsa_public_key {
            if key.anchor() != publics.r {
                return Err(RevertReason::AnchorMismatch);
            }
        }
        match backend.verify(proof, &PublicInputs::Sender(*publics)) {
            Ok(true) => {}
            Ok(false) => return Err(RevertReason::BadProof),
            Err(_) => return Err(RevertReason::MalformedProof),
        }
        self.sender_by_nullifier.insert(publics.null_s, self.senders.len());
        self.senders.push(SenderEntry {
            randomness: publics.r,
            rsa_public_key: rsa_public_key.clone(),
            nullifier: publics.null_s,
            assigned_receiver: None,
            encrypted_delivery_address: None,
        });
        self.spent_nullifiers.push(publics.null_s);
        if self.senders.len() == self.n() {
            self.phase = Phase::Disclose;
        }
        Ok(())
    }

    fn disclose<B: ProvingBackend>(
        &mut self,
        backend: &B,
        origin: Option<Address>,
        proof: &Proof,
        publics: &ReceiverPublicInputs,
        envelope: &Option<Vec<u8>>,
    ) -> Result<(), RevertReason> {
        if self.phase != Phase::Disclose {
            return Err(RevertReason::Phase);
        }
        let origin = origin.ok_or(RevertReason::MissingOrigin)?;
        if origin != publics.address {
            return Err(RevertReason::OriginMismatch);
        }
        if !self.is_registered(&origin) {
            return Err(RevertReason::NotParticipant);
        }
        if publics.event_id != self.params.event_id {
            return Err(RevertReason::WrongEvent);
        }
        if self.disclosed_set.contains(&origin) {
            return Err(RevertReason::AlreadyDisclosed);
        }
        let slot = *self
            .sender_by_nullifier
            .get(&publics.null_s)
            .ok_or(RevertReason::NoSuchSender)?;
        match backend.verify(proof, &PublicInputs::Receiver(*publics)) {
            Ok(true) => {}
            Ok(false) => return Err(RevertReason::BadProof),
            Err(_) => return Err(RevertReason::MalformedProof),
        }
        let entry = &mut self.senders[slot];
        if entry.assigned_receiver.is_some() {
            return Err(RevertReason::Collision);
        }
        entry.assigned_receiver = Some(origin);
        entry.encrypted_delivery_address = envelope.clone();
        self.disclosed.push(origin);
        self.disclosed_set.insert(origin);
        if self.senders.iter().all(|e| e.assigned_receiver.is_some()) {
            self.phase = Phase::Complete;
        }
        Ok(())
    }

    /// Public view of the state. Relayed submissions appear only through
    /// their public inputs.
    pub fn snapshot(&self) -> PublicView {
        PublicView {
            event_id: self.params.event_id,
            phase: self.phase,
            commitment_step: self.params.commitment_step,
            depth: self.params.depth,
            root_p: self.participants.root(),
            root_c: self.commitments.root(),
            participants: self.registered.clone(),
            commitments: self.commitment_log.clone(),
            senders: self.senders.clone(),
            spent_nullifiers: self.spent_nullifiers.clone(),
            disclosed_receivers: self.disclosed.clone(),
        }
    }
}

/// Snapshot persisted as `state.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicView {
    pub event_id: EventId,
    pub phase: Phase,
    pub commitment_step: bool,
    pub depth: usize,
    pub root_p: FieldElement,
    pub root_c: FieldElement,
    pub participants: Vec<Address>,
    pub commitments: Vec<Commitment>,
    pub senders: Vec<SenderEntry>,
    pub spent_nullifiers: Vec<Nullifier>,
    pub disclosed_receivers: Vec<Address>,
}

impl PublicView {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("view serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// State machine plus the verifier it was deployed with and its log.
#[derive(Debug, Clone)]
pub struct Contract<B> {
    state: ContractState,
    backend: B,
    log: Vec<LoggedTransaction>,
}

impl<B: ProvingBackend> Contract<B> {
    pub fn new(params: ContractParams, backend: B) -> Result<Self, SmtError> {
        Ok(Contract {
            state: ContractState::new(params)?,
            backend,
            log: Vec::new(),
        })
    }

    pub fn state(&self) -> &ContractState {
        &self.state
    }

    pub fn log(&self) -> &[LoggedTransaction] {
        &self.log
    }

    pub fn apply(&mut self, tx: Transaction) -> Receipt {
        let outcome = match &tx.call {
            Call::Register { addresses } => self.state.register(addresses),
            Call::Commit { commitment } => self.state.commit(tx.origin, *commitment),
            Call::SubmitRandomness {
                proof,
                publics,
                rsa_public_key,
            } => self
                .state
                .submit_randomness(&self.backend, tx.origin, proof, publics, rsa_public_key),
            Call::Disclose {
                proof,
                publics,
                encrypted_delivery_address,
            } => self
                .state
                .disclose(&self.backend, tx.origin, proof, publics, encrypted_delivery_address),
        };
        let receipt = match outcome {
            Ok(()) => Receipt::Accepted,
            Err(reason) => Receipt::Reverted(reason),
        };
        self.log.push(LoggedTransaction {
            seq: self.log.len() as u64,
            tx,
            receipt,
        });
        receipt
    }

    pub fn snapshot(&self) -> PublicView {
        self.state.snapshot()
    }

    pub fn txlog_jsonl(&self) -> String {
        to_jsonl(&self.log)
    }
}

pub(crate) fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}
