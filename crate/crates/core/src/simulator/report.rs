use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AdversaryScript, GameConfig, PublicArtifacts};
use crate::contract::{Phase, PublicView};
use crate::envelope::{decrypt_raw, generate_rsa_keypair, RsaKeyPair};
use crate::hexfmt;
use crate::primitives::{Address, EventId, FieldElement, Message};
use crate::signing::{derive_nullifier, ecrecover, Commitment, Nullifier, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub slot: usize,
    pub nullifier: Nullifier,
    pub randomness: FieldElement,
    pub sender: Option<Address>,
    pub receiver: Option<Address>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptSummary {
    pub accepted: usize,
    pub reverted: BTreeMap<String, usize>,
    pub by_call: BTreeMap<String, BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub script: AdversaryScript,
    pub adversary: Address,
    /// False when the scenario never found an opening.
    pub launched: bool,
    pub note: Option<String>,
    pub attempts: usize,
    /// Receipts of the adversary's attack transactions, by outcome.
    pub receipts: BTreeMap<String, usize>,
    pub adversary_slots: usize,
    pub honest_locked_out: usize,
    pub victim: Option<Address>,
    pub victim_collisions: usize,
    pub succeeded: bool,
}

/// Simulator-private facts about one participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub address: Address,
    pub adversary: bool,
    pub signature: Signature,
    pub nullifier: Nullifier,
    pub commitment: Option<Commitment>,
    pub extra_signatures: Vec<Signature>,
    pub randomness: Option<FieldElement>,
    #[serde(with = "opt_seed")]
    pub rsa_seed: Option<[u8; 32]>,
    pub delivery: String,
    pub owned_slots: Vec<Nullifier>,
}

mod opt_seed {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(seed: &Option<[u8; 32]>, ser: S) -> Result<S::Ok, S::Error> {
        seed.map(|s| crate::hexfmt::encode(&s)).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<[u8; 32]>, D::Error> {
        Option::<String>::deserialize(de)?
            .map(|t| crate::hexfmt::decode_fixed::<32>(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub participants: Vec<ParticipantTruth>,
}

impl GroundTruth {
    fn owner_of(&self, nullifier: &Nullifier) -> Option<&ParticipantTruth> {
        self.participants.iter().find(|p| p.owned_slots.contains(nullifier))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checklist {
    pub bijective: bool,
    pub derangement: bool,
    pub anonymity: bool,
    pub low_s: bool,
    pub event_id_unique: bool,
    /// `None` when the game ran without envelopes.
    pub envelopes: Option<bool>,
}

impl Checklist {
    pub fn all_pass(&self) -> bool {
        self.bijective
            && self.derangement
            && self.anonymity
            && self.low_s
            && self.event_id_unique
            && self.envelopes.unwrap_or(true)
    }

    pub fn lines(&self) -> Vec<(&'static str, Option<bool>)> {
        vec![
            ("bijective", Some(self.bijective)),
            ("derangement", Some(self.derangement)),
            ("anonymity", Some(self.anonymity)),
            ("low-s", Some(self.low_s)),
            ("event-id-unique", Some(self.event_id_unique)),
            ("envelopes", self.envelopes),
        ]
    }
}

/// Wall-clock cost per step. Kept out of `report.json`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseTiming {
    pub keygen: Duration,
    pub setup: Duration,
    pub commit: Duration,
    pub determine: Duration,
    pub disclose: Duration,
}

impl PhaseTiming {
    pub fn total(&self) -> Duration {
        self.keygen + self.setup + self.commit + self.determine + self.disclose
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameReport {
    pub config: GameConfig,
    pub event_id: EventId,
    pub session_event_ids: Vec<EventId>,
    pub final_phase: Phase,
    pub stalled: Option<String>,
    pub assignment: Vec<AssignmentRow>,
    pub derangement_ok: bool,
    pub anonymity_ok: bool,
    pub protocol_violation: bool,
    pub receipts: ReceiptSummary,
    pub attack: Option<AttackOutcome>,
    pub checks: Checklist,
    pub ground_truth: GroundTruth,
    #[serde(skip)]
    pub timing: PhaseTiming,
}

impl GameReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn is_complete(&self) -> bool {
        self.final_phase == Phase::Complete
    }

    /// Receiver of each participant's slot, by participant order. `None`
    /// where the participant owns no assigned slot.
    pub fn receivers(&self) -> Vec<Option<Address>> {
        self.ground_truth
            .participants
            .iter()
            .map(|p| {
                self.assignment
                    .iter()
                    .find(|row| row.sender == Some(p.address))
                    .and_then(|row| row.receiver)
            })
            .collect()
    }
}

/// RSA keys by participant, regenerated from the ground-truth seeds.
#[derive(Debug, Clone, Default)]
pub struct KeyRing(BTreeMap<Address, RsaKeyPair>);

impl KeyRing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, owner: Address, key: RsaKeyPair) {
        self.0.insert(owner, key);
    }

    pub fn get(&self, owner: &Address) -> Option<&RsaKeyPair> {
        self.0.get(owner)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_truth(truth: &GroundTruth) -> Self {
        let mut ring = KeyRing::new();
        for p in &truth.participants {
            if let Some(seed) = p.rsa_seed {
                ring.insert(p.address, generate_rsa_keypair(seed));
            }
        }
        ring
    }
}

/// Independent end-state audit: recomputes every check from the persisted
/// artifacts and the ground truth, without reading `report.checks`.
pub fn verify_report(report: &GameReport, artifacts: &PublicArtifacts, keys: &KeyRing) -> Checklist {
    let view = PublicView::from_json(&artifacts.state_json).ok();
    let truth = &report.ground_truth;
    let complete = view.as_ref().is_some_and(|v| v.phase == Phase::Complete);

    let bijective = complete && view.as_ref().is_some_and(|v| bijective(v, report));
    let derangement = complete
        && view.as_ref().is_some_and(|v| {
            v.senders
                .iter()
                .all(|slot| match (truth.owner_of(&slot.nullifier), slot.assigned_receiver) {
                    (Some(owner), Some(receiver)) => owner.address != receiver,
                    _ => false,
                })
        });
    let anonymity = find_links(artifacts, truth).is_empty();
    let low_s = truth
        .participants
        .iter()
        .flat_map(|p| std::iter::once(&p.signature).chain(&p.extra_signatures))
        .all(Signature::is_low_s);
    let issued: BTreeSet<&EventId> = report.session_event_ids.iter().collect();
    let event_id_unique = issued.len() == report.session_event_ids.len()
        && issued.contains(&report.event_id)
        && view.as_ref().is_some_and(|v| v.event_id == report.event_id);
    let envelopes = report
        .config
        .envelopes
        .then(|| view.as_ref().is_some_and(|v| complete && envelopes_ok(v, truth, keys)));

    Checklist {
        bijective,
        derangement,
        anonymity,
        low_s,
        event_id_unique,
        envelopes,
    }
}

fn bijective(view: &PublicView, report: &GameReport) -> bool {
    let truth = &report.ground_truth;
    let n = view.participants.len();
    if truth.participants.len() != n || view.senders.len() != n {
        return false;
    }
    // ground truth must be self-consistent before it is trusted
    for p in &truth.participants {
        let message = Message::new(&p.address, &view.event_id);
        let sigs = std::iter::once(&p.signature).chain(&p.extra_signatures);
        let mut derivable = BTreeSet::new();
        for sig in sigs {
            if ecrecover(sig, &message).ok() != Some(p.address) {
                return false;
            }
            derivable.insert(derive_nullifier(sig));
        }
        if derive_nullifier(&p.signature) != p.nullifier
            || !p.owned_slots.iter().all(|n| derivable.contains(n))
            || p.owned_slots.len() != 1
        {
            return false;
        }
    }
    let slots: BTreeSet<Nullifier> = view.senders.iter().map(|s| s.nullifier).collect();
    let owned: BTreeSet<Nullifier> = truth.participants.iter().flat_map(|p| p.owned_slots.clone()).collect();
    let receivers: BTreeSet<Address> = view.senders.iter().filter_map(|s| s.assigned_receiver).collect();
    let registered: BTreeSet<Address> = view.participants.iter().copied().collect();
    slots == owned && receivers == registered && receivers.len() == n
}

fn envelopes_ok(view: &PublicView, truth: &GroundTruth, keys: &KeyRing) -> bool {
    view.senders.iter().all(|slot| {
        let (Some(owner), Some(receiver), Some(ciphertext)) = (
            truth.owner_of(&slot.nullifier),
            slot.assigned_receiver,
            slot.encrypted_delivery_address.as_ref(),
        ) else {
            return false;
        };
        let Some(expected) = truth.participants.iter().find(|p| p.address == receiver) else {
            return false;
        };
        let Some(own_key) = keys.get(&owner.address) else {
            return false;
        };
        if slot.rsa_public_key.as_ref() != Some(own_key.public_key()) {
            return false;
        }
        if decrypt_raw(ciphertext, own_key).ok().as_deref() != Some(expected.delivery.as_bytes()) {
            return false;
        }
        truth
            .participants
            .iter()
            .filter(|p| p.address != owner.address)
            .filter_map(|p| keys.get(&p.address))
            .all(|other| decrypt_raw(ciphertext, other).is_err())
    })
}

/// Records in which an honest participant's address appears together with
/// their own randomness or nullifier. Each JSONL line is one record; in
/// `state.json` each sender entry and each other top-level field is one
/// record.
pub fn find_links(artifacts: &PublicArtifacts, truth: &GroundTruth) -> Vec<String> {
    let mut records: Vec<(String, String)> = Vec::new();
    for (name, text) in [("txlog.jsonl", &artifacts.txlog_jsonl), ("relay.jsonl", &artifacts.relay_jsonl)] {
        for (i, line) in text.lines().enumerate() {
            records.push((format!("{name}:{}", i + 1), line.to_lowercase()));
        }
    }
    if let Ok(Value::Object(state)) = serde_json::from_str::<Value>(&artifacts.state_json) {
        for (key, value) in &state {
            match (key.as_str(), value) {
                ("senders", Value::Array(entries)) => {
                    for (i, entry) in entries.iter().enumerate() {
                        records.push((format!("state.json:senders[{i}]"), entry.to_string().to_lowercase()));
                    }
                }
                _ => records.push((format!("state.json:{key}"), value.to_string().to_lowercase())),
            }
        }
    }

    let digits = |text: String| text.trim_start_matches("0x").to_owned();
    let mut links = Vec::new();
    for p in truth.participants.iter().filter(|p| !p.adversary) {
        let address = digits(p.address.to_hex());
        let mut secrets = vec![digits(p.nullifier.0.to_hex())];
        if let Some(r) = p.randomness {
            secrets.push(digits(r.to_hex()));
        }
        for (label, record) in &records {
            if record.contains(&address) && secrets.iter().any(|s| record.contains(s.as_str())) {
                links.push(format!("{} linked in {label}", hexfmt::encode(p.address.as_bytes())));
            }
        }
    }
    links
}
