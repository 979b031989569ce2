//! The two proof relations and the proving-backend seam.
//!
//! Sender relation (step 2), public `(r, eventId, root_p, root_c, null_s)`:
//! 1. `null_s == hash(sig.s)`
//! 2. `ecrecover(sig, address || eventId) == address`
//! 3. `hash(address)` is a leaf of the participants tree under `root_p`
//! 4. `hash(sig)` is a leaf of the commitments tree under `root_c`
//!    (only when the commitment step is part of the deployment)
//! 5. `r * r` is computed and folded into the transcript, anchoring `r`
//!
//! Receiver relation (step 3), public `(address, eventId, null_s)`:
//! 1. `null_r := hash(sig.s)` (never leaves the check)
//! 2. `ecrecover(sig, address || eventId) == address`
//! 3. `null_r != null_s`
//!
//! The shipped [`TransparentBackend`] checks the relation directly at prove
//! time and emits a keyed hash over the tag, the public inputs and the
//! anchor. It never copies witness bytes into the proof.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hexfmt;
use crate::primitives::{hash_to_field_parts, Address, EventId, FieldElement, Message};
use crate::signing::{self, commitment_hash, derive_nullifier, Nullifier, Signature};
use crate::smt::{merkle_verify, MerkleProof, MAX_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelationTag {
    Sender,
    Receiver,
}

impl RelationTag {
    fn byte(self) -> u8 {
        match self {
            RelationTag::Sender => 1,
            RelationTag::Receiver => 2,
        }
    }
}

/// Relation clauses, named by what they check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    NullifierBinding,
    SignerRecovery,
    ParticipantInclusion,
    CommitmentInclusion,
    NullifierInequality,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("malformed relation input: {0}")]
    Structural(String),
    #[error("unknown relation tag {0:?}")]
    UnknownRelation(String),
    #[error("witness does not match relation {0:?}")]
    WitnessMismatch(RelationTag),
    #[error("relation unsatisfied at clause {0:?}; prover refuses")]
    Unsatisfied(Clause),
}

/// Deployment-level relation parameters. Different parameters amount to a
/// different circuit, so they are bound into every proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationConfig {
    pub commitment_step: bool,
}

impl Default for RelationConfig {
    fn default() -> Self {
        RelationConfig {
            commitment_step: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SenderWitness {
    pub sig: Signature,
    pub address: Address,
    pub participant_proof: MerkleProof,
    pub commitment_proof: Option<MerkleProof>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderPublicInputs {
    pub r: FieldElement,
    pub event_id: EventId,
    pub root_p: FieldElement,
    pub root_c: FieldElement,
    pub null_s: Nullifier,
}

#[derive(Debug, Clone)]
pub struct ReceiverWitness {
    pub sig: Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverPublicInputs {
    pub address: Address,
    pub event_id: EventId,
    pub null_s: Nullifier,
}

#[derive(Debug, Clone)]
pub enum Witness {
    Sender(SenderWitness),
    Receiver(ReceiverWitness),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PublicInputs {
    Sender(SenderPublicInputs),
    Receiver(ReceiverPublicInputs),
}

impl PublicInputs {
    pub fn tag(&self) -> RelationTag {
        match self {
            PublicInputs::Sender(_) => RelationTag::Sender,
            PublicInputs::Receiver(_) => RelationTag::Receiver,
        }
    }

    /// Fixed-order byte encoding of each public input.
    pub fn encode(&self) -> Vec<Vec<u8>> {
        match self {
            PublicInputs::Sender(x) => vec![
                x.r.as_bytes().to_vec(),
                x.event_id.encode().to_vec(),
                x.root_p.as_bytes().to_vec(),
                x.root_c.as_bytes().to_vec(),
                x.null_s.0.as_bytes().to_vec(),
            ],
            PublicInputs::Receiver(x) => vec![
                x.address.as_bytes().to_vec(),
                x.event_id.encode().to_vec(),
                x.null_s.0.as_bytes().to_vec(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub relation: RelationTag,
    #[serde(rename = "publicInputs", with = "hexfmt::bytes_list")]
    pub public_inputs: Vec<Vec<u8>>,
    pub blob: FieldElement,
}

impl Proof {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("proof serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RelationError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| RelationError::Structural(e.to_string()))?;
        match value.get("relation").and_then(|t| t.as_str()) {
            Some("SENDER") | Some("RECEIVER") => {}
            Some(other) => return Err(RelationError::UnknownRelation(other.to_owned())),
            None => return Err(RelationError::Structural("missing relation tag".into())),
        }
        serde_json::from_value(value).map_err(|e| RelationError::Structural(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SenderCheck {
    pub nullifier: Nullifier,
    /// `r * r`, the anchoring value bound into the transcript.
    pub anchor: FieldElement,
    pub failed: Option<Clause>,
}

impl SenderCheck {
    pub fn satisfied(&self) -> bool {
        self.failed.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceiverCheck {
    pub failed: Option<Clause>,
}

impl ReceiverCheck {
    pub fn satisfied(&self) -> bool {
        self.failed.is_none()
    }
}

fn check_proof_shape(proof: &MerkleProof, what: &str) -> Result<(), RelationError> {
    if proof.depth() == 0 || proof.depth() > MAX_DEPTH {
        return Err(RelationError::Structural(format!(
            "{what} proof has depth {}",
            proof.depth()
        )));
    }
    Ok(())
}

pub fn check_sender_relation(
    w: &SenderWitness,
    x: &SenderPublicInputs,
    config: &RelationConfig,
) -> Result<SenderCheck, RelationError> {
    check_proof_shape(&w.participant_proof, "participant")?;
    let commitment_proof = match (&w.commitment_proof, config.commitment_step) {
        (Some(p), true) => {
            check_proof_shape(p, "commitment")?;
            if p.depth() != w.participant_proof.depth() {
                return Err(RelationError::Structural(
                    "participant and commitment proofs differ in depth".into(),
                ));
            }
            Some(p)
        }
        (None, true) => {
            return Err(RelationError::Structural("missing commitment proof".into()));
        }
        (_, false) => None,
    };

    let nullifier = derive_nullifier(&w.sig);
    let anchor = x.r.square();
    let message = Message::new(&w.address, &x.event_id);
    let address_leaf = w.address.registry_index();

    let failed = if nullifier != x.null_s {
        Some(Clause::NullifierBinding)
    } else if signing::ecrecover(&w.sig, &message).ok() != Some(w.address) {
        Some(Clause::SignerRecovery)
    } else if w.participant_proof.index != address_leaf
        || !merkle_verify(&address_leaf, &w.participant_proof, &x.root_p)
    {
        Some(Clause::ParticipantInclusion)
    } else if let Some(proof) = commitment_proof {
        let h = commitment_hash(&w.sig).0;
        (proof.index != h || !merkle_verify(&h, proof, &x.root_c)).then_some(Clause::CommitmentInclusion)
    } else {
        None
    };

    Ok(SenderCheck {
        nullifier,
        anchor,
        failed,
    })
}

pub fn check_receiver_relation(
    w: &ReceiverWitness,
    x: &ReceiverPublicInputs,
) -> Result<ReceiverCheck, RelationError> {
    let null_r = derive_nullifier(&w.sig);
    let message = Message::new(&x.address, &x.event_id);
    let failed = if signing::ecrecover(&w.sig, &message).ok() != Some(x.address) {
        Some(Clause::SignerRecovery)
    } else if null_r == x.null_s {
        Some(Clause::NullifierInequality)
    } else {
        None
    };
    Ok(ReceiverCheck { failed })
}

pub trait ProvingBackend {
    fn prove(&self, witness: &Witness, publics: &PublicInputs) -> Result<Proof, RelationError>;
    fn verify(&self, proof: &Proof, expected: &PublicInputs) -> Result<bool, RelationError>;
}

/// Stand-in prover: checks the witness in the clear, then emits
/// `hash(domain || tag || config || inputs || anchor || key)`.
#[derive(Clone)]
pub struct TransparentBackend {
    key: [u8; 32],
    config: RelationConfig,
}

const TRANSCRIPT_DOMAIN: &[u8] = b"zkss/transparent/v1";

impl TransparentBackend {
    pub fn new(key: [u8; 32], config: RelationConfig) -> Self {
        TransparentBackend { key, config }
    }

    pub fn config(&self) -> &RelationConfig {
        &self.config
    }

    fn transcript(&self, tag: RelationTag, inputs: &[Vec<u8>], anchor: Option<FieldElement>) -> FieldElement {
        let mut bytes = Vec::with_capacity(256);
        bytes.extend_from_slice(TRANSCRIPT_DOMAIN);
        bytes.push(tag.byte());
        bytes.push(u8::from(self.config.commitment_step));
        for input in inputs {
            bytes.extend_from_slice(&(input.len() as u32).to_be_bytes());
            bytes.extend_from_slice(input);
        }
        if let Some(a) = anchor {
            bytes.extend_from_slice(a.as_bytes());
        }
        hash_to_field_parts(&[&bytes, &self.key])
    }
}

impl std::fmt::Debug for TransparentBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransparentBackend")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl ProvingBackend for TransparentBackend {
    fn prove(&self, witness: &Witness, publics: &PublicInputs) -> Result<Proof, RelationError> {
        let anchor = match (witness, publics) {
            (Witness::Sender(w), PublicInputs::Sender(x)) => {
                let check = check_sender_relation(w, x, &self.config)?;
                if let Some(clause) = check.failed {
                    return Err(RelationError::Unsatisfied(clause));
                }
                Some(check.anchor)
            }
            (Witness::Receiver(w), PublicInputs::Receiver(x)) => {
                if let Some(clause) = check_receiver_relation(w, x)?.failed {
                    return Err(RelationError::Unsatisfied(clause));
                }
                None
            }
            _ => return Err(RelationError::WitnessMismatch(publics.tag())),
        };
        let inputs = publics.encode();
        let blob = self.transcript(publics.tag(), &inputs, anchor);
        Ok(Proof {
            relation: publics.tag(),
            public_inputs: inputs,
            blob,
        })
    }

    fn verify(&self, proof: &Proof, expected: &PublicInputs) -> Result<bool, RelationError> {
        let expected_len = match proof.relation {
            RelationTag::Sender => 5,
            RelationTag::Receiver => 3,
        };
        if proof.public_inputs.len() != expected_len {
            return Err(RelationError::Structural(format!(
                "{:?} proof carries {} public inputs",
                proof.relation,
                proof.public_inputs.len()
            )));
        }
        if proof.relation != expected.tag() {
            return Ok(false);
        }
        let inputs = expected.encode();
        if proof.public_inputs != inputs {
            return Ok(false);
        }
        let anchor = match expected {
            PublicInputs::Sender(x) => Some(x.r.square()),
            PublicInputs::Receiver(_) => None,
        };
        Ok(self.transcript(proof.relation, &inputs, anchor) == proof.blob)
    }
}

/// Proves `witness` against `publics` for the relation named by `tag`.
pub fn prove<B: ProvingBackend + ?Sized>(
    tag: RelationTag,
    witness: &Witness,
    publics: &PublicInputs,
    backend: &B,
) -> Result<Proof, RelationError> {
    if publics.tag() != tag {
        return Err(RelationError::WitnessMismatch(tag));
    }
    backend.prove(witness, publics)
}

pub fn verify<B: ProvingBackend + ?Sized>(
    proof: &Proof,
    expected: &PublicInputs,
    backend: &B,
) -> Result<bool, RelationError> {
    backend.verify(proof, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signing::{sign_deterministic, KeyPair};
    use crate::smt::SparseMerkleTree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        keys: Vec<KeyPair>,
        sigs: Vec<Signature>,
        event: EventId,
        participants: SparseMerkleTree,
        commitments: SparseMerkleTree,
        backend: TransparentBackend,
    }

    fn fixture(n: usize, seed: u64) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let event = EventId::new(Address::new([0x42; 20]), seed.into());
        let keys: Vec<KeyPair> = (0..n).map(|_| KeyPair::generate(&mut rng)).collect();
        let sigs: Vec<Signature> = keys
            .iter()
            .map(|k| sign_deterministic(k, &Message::new(&k.address(), &event)))
            .collect();
        let mut participants = SparseMerkleTree::new(32).unwrap();
        let mut commitments = SparseMerkleTree::new(32).unwrap();
        for (k, s) in keys.iter().zip(&sigs) {
            let idx = k.address().registry_index();
            participants.insert(idx, idx).unwrap();
            let h = commitment_hash(s).0;
            commitments.insert(h, h).unwrap();
        }
        Fixture {
            keys,
            sigs,
            event,
            participants,
            commitments,
            backend: TransparentBackend::new([7; 32], RelationConfig::default()),
        }
    }

    impl Fixture {
        fn sender(&self, i: usize) -> (SenderWitness, SenderPublicInputs) {
            let addr = self.keys[i].address();
            let w = SenderWitness {
                sig: self.sigs[i],
                address: addr,
                participant_proof: self.participants.prove(&addr.registry_index()).unwrap(),
                commitment_proof: Some(self.commitments.prove(&commitment_hash(&self.sigs[i]).0).unwrap()),
            };
            let x = SenderPublicInputs {
                r: FieldElement::from_u64(1000 + i as u64),
                event_id: self.event,
                root_p: self.participants.root(),
                root_c: self.commitments.root(),
                null_s: derive_nullifier(&self.sigs[i]),
            };
            (w, x)
        }

        fn receiver(&self, i: usize, target: usize) -> (ReceiverWitness, ReceiverPublicInputs) {
            (
                ReceiverWitness { sig: self.sigs[i] },
                ReceiverPublicInputs {
                    address: self.keys[i].address(),
                    event_id: self.event,
                    null_s: derive_nullifier(&self.sigs[target]),
                },
            )
        }
    }

    #[test]
    fn honest_sender_satisfies() {
        let f = fixture(4, 1);
        let (w, x) = f.sender(2);
        let check = check_sender_relation(&w, &x, &RelationConfig::default()).unwrap();
        assert!(check.satisfied());
        assert_eq!(check.anchor, x.r.square());
    }

    #[test]
    fn foreign_nullifier_fails_binding_clause() {
        let f = fixture(4, 2);
        let (w, mut x) = f.sender(0);
        x.null_s = derive_nullifier(&f.sigs[1]);
        let check = check_sender_relation(&w, &x, &RelationConfig::default()).unwrap();
        assert_eq!(check.failed, Some(Clause::NullifierBinding));
    }

    #[test]
    fn wrong_event_fails_recovery_clause() {
        let f = fixture(3, 3);
        let (w, mut x) = f.sender(1);
        x.event_id = x.event_id.next().unwrap();
        let check = check_sender_relation(&w, &x, &RelationConfig::default()).unwrap();
        assert_eq!(check.failed, Some(Clause::SignerRecovery));
    }

    #[test]
    fn high_s_twin_fails_every_relation() {
        let f = fixture(3, 4);
        let (mut w, mut x) = f.sender(0);
        w.sig = w.sig.mirrored();
        x.null_s = derive_nullifier(&w.sig);
        let check = check_sender_relation(&w, &x, &RelationConfig::default()).unwrap();
        assert_eq!(check.failed, Some(Clause::SignerRecovery));

        let (mut rw, rx) = f.receiver(0, 1);
        rw.sig = rw.sig.mirrored();
        assert_eq!(check_receiver_relation(&rw, &rx).unwrap().failed, Some(Clause::SignerRecovery));
    }

    #[test]
    fn uncommitted_signature_fails_commitment_clause_only_when_enabled() {
        let f = fixture(3, 5);
        let (mut w, mut x) = f.sender(0);
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let m = Message::new(&f.keys[0].address(), &f.event);
        w.sig = signing::sign_randomized(&f.keys[0], &m, &mut rng);
        x.null_s = derive_nullifier(&w.sig);
        let check = check_sender_relation(&w, &x, &RelationConfig::default()).unwrap();
        assert_eq!(check.failed, Some(Clause::CommitmentInclusion));

        let relaxed = RelationConfig { commitment_step: false };
        w.commitment_proof = None;
        assert!(check_sender_relation(&w, &x, &relaxed).unwrap().satisfied());
    }

    #[test]
    fn outsider_fails_participant_clause() {
        let f = fixture(3, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let outsider = KeyPair::generate(&mut rng);
        let sig = sign_deterministic(&outsider, &Message::new(&outsider.address(), &f.event));
        let (mut w, mut x) = f.sender(0);
        w.address = outsider.address();
        w.sig = sig;
        x.null_s = derive_nullifier(&sig);
        let check = check_sender_relation(&w, &x, &RelationConfig::default()).unwrap();
        assert_eq!(check.failed, Some(Clause::ParticipantInclusion));
    }

    #[test]
    fn malformed_witness_is_structural() {
        let f = fixture(2, 8);
        let (mut w, x) = f.sender(0);
        w.commitment_proof = None;
        assert!(matches!(
            check_sender_relation(&w, &x, &RelationConfig::default()),
            Err(RelationError::Structural(_))
        ));
        let (mut w, x) = f.sender(0);
        w.participant_proof.siblings.pop();
        assert!(matches!(
            check_sender_relation(&w, &x, &RelationConfig::default()),
            Err(RelationError::Structural(_))
        ));
    }

    #[test]
    fn receiver_clauses() {
        let f = fixture(3, 9);
        let (w, x) = f.receiver(0, 1);
        assert!(check_receiver_relation(&w, &x).unwrap().satisfied());
        let (w, x) = f.receiver(0, 0);
        assert_eq!(check_receiver_relation(&w, &x).unwrap().failed, Some(Clause::NullifierInequality));
        // signature by participant 1 claimed for participant 0's address
        let (_, x) = f.receiver(0, 2);
        let w = ReceiverWitness { sig: f.sigs[1] };
        assert_eq!(check_receiver_relation(&w, &x).unwrap().failed, Some(Clause::SignerRecovery));
    }

    #[test]
    fn prove_verify_round_trip_and_binding() {
        let f = fixture(3, 10);
        let (w, x) = f.sender(1);
        let publics = PublicInputs::Sender(x);
        let proof = prove(RelationTag::Sender, &Witness::Sender(w), &publics, &f.backend).unwrap();
        assert!(verify(&proof, &publics, &f.backend).unwrap());

        let mut bumped = x;
        bumped.r = x.r.add(&FieldElement::from_u64(1));
        assert!(!verify(&proof, &PublicInputs::Sender(bumped), &f.backend).unwrap());

        let mut tampered = proof.clone();
        tampered.public_inputs[0][31] ^= 1;
        assert!(!verify(&tampered, &publics, &f.backend).unwrap());

        let mut reordered = proof.clone();
        reordered.public_inputs.swap(2, 3);
        assert!(!verify(&reordered, &publics, &f.backend).unwrap());

        let other_key = TransparentBackend::new([8; 32], RelationConfig::default());
        assert!(!verify(&proof, &publics, &other_key).unwrap());
        let other_circuit = TransparentBackend::new([7; 32], RelationConfig { commitment_step: false });
        assert!(!verify(&proof, &publics, &other_circuit).unwrap());
    }

    #[test]
    fn sender_proof_does_not_verify_as_receiver() {
        let f = fixture(3, 11);
        let (w, x) = f.sender(0);
        let proof = prove(RelationTag::Sender, &Witness::Sender(w), &PublicInputs::Sender(x), &f.backend).unwrap();
        let (_, rx) = f.receiver(1, 0);
        let mut relabeled = proof.clone();
        relabeled.relation = RelationTag::Receiver;
        assert!(!verify(&proof, &PublicInputs::Receiver(rx), &f.backend).unwrap());
        assert!(verify(&relabeled, &PublicInputs::Receiver(rx), &f.backend).is_err());
    }

    #[test]
    fn prover_refuses_unsatisfied_relations() {
        let f = fixture(3, 12);
        let (w, x) = f.receiver(2, 2);
        let err = prove(RelationTag::Receiver, &Witness::Receiver(w), &PublicInputs::Receiver(x), &f.backend)
            .unwrap_err();
        assert_eq!(err, RelationError::Unsatisfied(Clause::NullifierInequality));

        let (w, x) = f.sender(0);
        let err = prove(RelationTag::Receiver, &Witness::Sender(w), &PublicInputs::Sender(x), &f.backend)
            .unwrap_err();
        assert!(matches!(err, RelationError::WitnessMismatch(_)));
    }

    #[test]
    fn proof_json_rejects_unknown_relation() {
        let f = fixture(2, 13);
        let (w, x) = f.receiver(0, 1);
        let proof = prove(RelationTag::Receiver, &Witness::Receiver(w), &PublicInputs::Receiver(x), &f.backend).unwrap();
        let text = proof.to_json();
        assert!(text.contains("\"publicInputs\""));
        assert_eq!(Proof::from_json(&text).unwrap(), proof);
        let bad = text.replace("RECEIVER", "AUDITOR");
        assert_eq!(Proof::from_json(&bad), Err(RelationError::UnknownRelation("AUDITOR".into())));
    }

    #[test]
    fn proofs_carry_no_witness_bytes() {
        let f = fixture(4, 14);
        for i in 0..4 {
            let (w, x) = f.sender(i);
            let sig_hex = hex::encode(w.sig.to_bytes());
            let addr_hex = hex::encode(w.address.as_bytes());
            let proof = prove(RelationTag::Sender, &Witness::Sender(w.clone()), &PublicInputs::Sender(x), &f.backend).unwrap();
            let json = proof.to_json();
            assert!(!json.contains(&sig_hex));
            assert!(!json.contains(&addr_hex));
            let blob = proof.blob.to_be_bytes();
            assert!(!blob.windows(20).any(|win| win == w.address.as_bytes()));
        }
    }
}
