use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::report::{
    verify_report, AssignmentRow, AttackOutcome, GameReport, GroundTruth, KeyRing, ParticipantTruth, PhaseTiming,
    ReceiptSummary,
};
use super::{AdversaryScript, DisclosureOrder, GameConfig, PublicArtifacts, SimError};
use crate::contract::{Call, Contract, ContractParams, Phase, PublicView, Receipt, RevertReason, Transaction};
use crate::envelope::{encrypt_delivery_address, generate_rsa_keypair, PublicKeyBytes, RsaKeyPair};
use crate::primitives::{hash_to_field, keccak256, Address, EventId, FieldElement, Message};
use crate::relations::{
    Proof, ProvingBackend, PublicInputs, ReceiverPublicInputs, ReceiverWitness, RelationConfig, RelationError,
    SenderPublicInputs, SenderWitness, TransparentBackend, Witness,
};
use crate::relayer::{Mempool, PendingSummary, RelayRequest, Relayer};
use crate::signing::{
    commitment_hash, derive_nullifier, sign_deterministic, sign_randomized, Commitment, KeyPair, Nullifier,
    Signature,
};

const STREETS: [&str; 6] = ["Holly Lane", "Evergreen Way", "Birch Road", "Sleigh Street", "Pine Court", "Frost Avenue"];
const TOWNS: [&str; 5] = ["North Pole", "Lapland", "Snowdon", "Yule Harbor", "Tinsel Town"];

/// Issues event ids for consecutive games on one contract address.
#[derive(Debug, Clone)]
pub struct Session {
    contract: Address,
    next: Option<EventId>,
    issued: Vec<EventId>,
}

impl Session {
    pub fn new(contract: Address) -> Self {
        Session {
            contract,
            next: Some(EventId::new(contract, 0)),
            issued: Vec::new(),
        }
    }

    /// Session on the contract address derived from `seed`.
    pub fn for_seed(seed: u64) -> Self {
        let mut preimage = b"zkss/contract".to_vec();
        preimage.extend_from_slice(&seed.to_be_bytes());
        let digest = keccak256(&preimage);
        let mut address = [0u8; 20];
        address.copy_from_slice(&digest[12..]);
        Session::new(Address::new(address))
    }

    pub fn contract(&self) -> Address {
        self.contract
    }

    pub fn event_ids(&self) -> &[EventId] {
        &self.issued
    }

    pub fn run(&mut self, config: &GameConfig) -> Result<GameRun, SimError> {
        config.validate()?;
        let event_id = self
            .next
            .ok_or_else(|| SimError::InvalidConfig("event nonce space exhausted".into()))?;
        self.next = event_id.next().ok();
        self.issued.push(event_id);
        Ok(Game::new(config, event_id).play(self.issued.clone()))
    }
}

/// One game on a fresh session.
pub fn run_game(config: &GameConfig) -> Result<GameRun, SimError> {
    Session::for_seed(config.seed).run(config)
}

pub fn run_attack(config: &GameConfig) -> Result<GameRun, SimError> {
    if config.adversary.is_none() {
        return Err(SimError::InvalidConfig("no adversary script selected".into()));
    }
    run_game(config)
}

/// Everything a finished game leaves behind.
#[derive(Debug, Clone)]
pub struct GameRun {
    pub report: GameReport,
    pub snapshot: PublicView,
    pub txlog_jsonl: String,
    pub relay_jsonl: String,
    pub keys: KeyRing,
    /// Final contract, for replaying logged transactions against it.
    pub contract: Contract<TransparentBackend>,
}

impl GameRun {
    pub fn artifacts(&self) -> PublicArtifacts {
        PublicArtifacts {
            state_json: self.snapshot.to_json(),
            txlog_jsonl: self.txlog_jsonl.clone(),
            relay_jsonl: self.relay_jsonl.clone(),
        }
    }
}

struct Participant {
    key: KeyPair,
    address: Address,
    sig: Signature,
    nullifier: Nullifier,
    commitment: Commitment,
    rsa_seed: Option<[u8; 32]>,
    rsa: Option<RsaKeyPair>,
    randomness: FieldElement,
    delivery: String,
    extra_signatures: Vec<Signature>,
}

impl Participant {
    fn rsa_public(&self) -> Option<PublicKeyBytes> {
        self.rsa.as_ref().map(|k| k.public_key().clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sender {
    Honest(usize),
    Attack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Frontrun {
    Waiting,
    Launched { victim: usize },
    Impossible(&'static str),
}

struct Game<'a> {
    config: &'a GameConfig,
    rng: ChaCha20Rng,
    event_id: EventId,
    backend: TransparentBackend,
    contract: Contract<TransparentBackend>,
    mempool: Mempool,
    relayer: Relayer,
    people: Vec<Participant>,
    adversary: Option<usize>,
    slot_owner: BTreeMap<Nullifier, usize>,
    pending: BTreeMap<u64, Sender>,
    clock: u64,
    attack_receipts: BTreeMap<String, usize>,
    attack_accepted: usize,
    honest_locked_out: usize,
    stale_publics: Option<(SenderPublicInputs, SenderWitness)>,
    frontrun: Option<Frontrun>,
    victim_collisions: usize,
    stalled: Option<String>,
    timing: PhaseTiming,
}

impl<'a> Game<'a> {
    fn new(config: &'a GameConfig, event_id: EventId) -> Self {
        let started = Instant::now();
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let relation = RelationConfig {
            commitment_step: config.commitment_step,
        };
        let backend = TransparentBackend::new(rng.gen(), relation);
        let params = ContractParams {
            event_id,
            depth: config.depth,
            commitment_step: config.commitment_step,
        };
        let contract = Contract::new(params, backend.clone()).expect("depth validated");

        let mut people = Vec::with_capacity(config.n);
        for i in 0..config.n {
            let key = KeyPair::generate(&mut rng);
            let address = key.address();
            let sig = sign_deterministic(&key, &Message::new(&address, &event_id));
            let (rsa_seed, rsa, randomness) = if config.envelopes {
                let seed: [u8; 32] = rng.gen();
                let rsa = generate_rsa_keypair(seed);
                let anchor = rsa.public_key().anchor();
                (Some(seed), Some(rsa), anchor)
            } else {
                (None, None, hash_to_field(&rng.gen::<[u8; 32]>()))
            };
            let delivery = format!(
                "{} {}, Apt {}, {}",
                rng.gen_range(1..10_000),
                STREETS[rng.gen_range(0..STREETS.len())],
                i + 1,
                TOWNS[rng.gen_range(0..TOWNS.len())]
            );
            people.push(Participant {
                key,
                address,
                nullifier: derive_nullifier(&sig),
                commitment: commitment_hash(&sig),
                sig,
                rsa_seed,
                rsa,
                randomness,
                delivery,
                extra_signatures: Vec::new(),
            });
        }
        let adversary = config.adversary.map(|_| rng.gen_range(1..config.n));
        let frontrun = (config.adversary == Some(AdversaryScript::Frontrun)).then_some(Frontrun::Waiting);

        Game {
            config,
            rng,
            event_id,
            backend,
            contract,
            mempool: Mempool::new(),
            relayer: Relayer::new(),
            people,
            adversary,
            slot_owner: BTreeMap::new(),
            pending: BTreeMap::new(),
            clock: 0,
            attack_receipts: BTreeMap::new(),
            attack_accepted: 0,
            honest_locked_out: 0,
            stale_publics: None,
            frontrun,
            victim_collisions: 0,
            stalled: None,
            timing: PhaseTiming {
                keygen: started.elapsed(),
                ..PhaseTiming::default()
            },
        }
    }

    fn script(&self) -> Option<AdversaryScript> {
        self.config.adversary
    }

    fn is_adversary(&self, i: usize) -> bool {
        self.adversary == Some(i)
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn submit(&mut self, tx: Transaction, sender: Sender) -> u64 {
        let (id, _) = self.mempool.submit(tx);
        self.pending.insert(id, sender);
        id
    }

    fn relay(&mut self, proof: Proof, publics: SenderPublicInputs, key: Option<PublicKeyBytes>, sender: Sender) {
        let submitted_at = self.tick();
        self.relayer.relay(
            RelayRequest {
                proof,
                publics,
                rsa_public_key: key,
                submitted_at,
            },
            &mut self.mempool,
        );
        let id = self.relayer.log().last().expect("just relayed").mempool_id;
        self.pending.insert(id, sender);
    }

    /// Applies the mempool. Returns accepted disclosures by origin and
    /// collisions by origin.
    fn drain(&mut self) -> Vec<(Sender, Call, Receipt, Option<Address>)> {
        let results = self.mempool.drain_into(&mut self.contract);
        let mut out = Vec::with_capacity(results.len());
        for (pending, receipt) in results {
            let sender = self.pending.remove(&pending.id).unwrap_or(Sender::Attack);
            match sender {
                Sender::Attack => {
                    *self.attack_receipts.entry(label(&receipt)).or_default() += 1;
                    if receipt.is_accepted() {
                        self.attack_accepted += 1;
                    }
                }
                Sender::Honest(_) => {
                    if matches!(pending.tx.call, Call::SubmitRandomness { .. }) && !receipt.is_accepted() {
                        self.honest_locked_out += 1;
                    }
                }
            }
            out.push((sender, pending.tx.call, receipt, pending.tx.origin));
        }
        out
    }

    fn play(mut self, session_event_ids: Vec<EventId>) -> GameRun {
        let t = Instant::now();
        self.setup();
        self.timing.setup = t.elapsed();

        let t = Instant::now();
        self.commit_step();
        self.timing.commit = t.elapsed();

        let t = Instant::now();
        self.determine_step();
        self.timing.determine = t.elapsed();

        let t = Instant::now();
        self.disclose_step();
        self.timing.disclose = t.elapsed();

        self.finish(session_event_ids)
    }

    fn setup(&mut self) {
        let lead = self.people[0].address;
        let addresses = self.people.iter().map(|p| p.address).collect();
        self.submit(
            Transaction {
                origin: Some(lead),
                call: Call::Register { addresses },
            },
            Sender::Honest(0),
        );
        self.drain();
    }

    fn commit_step(&mut self) {
        if !self.config.commitment_step {
            return;
        }
        let mut order: Vec<usize> = (0..self.people.len()).collect();
        order.shuffle(&mut self.rng);
        if let (Some(AdversaryScript::StaleRoot), Some(adv)) = (self.script(), self.adversary) {
            order.retain(|&i| i != adv);
            order.insert(0, adv);
        }
        for i in order {
            let p = &self.people[i];
            let tx = Transaction {
                origin: Some(p.address),
                call: Call::Commit {
                    commitment: p.commitment,
                },
            };
            self.submit(tx, Sender::Honest(i));
            self.drain();
            if !self.is_adversary(i) {
                continue;
            }
            match self.script() {
                Some(AdversaryScript::StaleRoot) => {
                    let publics = self.sender_publics(self.people[i].randomness, self.people[i].sig);
                    let witness = self.sender_witness(i, self.people[i].sig);
                    self.stale_publics = Some((publics, witness));
                }
                Some(AdversaryScript::MalleableSig) => {
                    let sig = self.randomized_signature(i);
                    let tx = Transaction {
                        origin: Some(self.people[i].address),
                        call: Call::Commit {
                            commitment: commitment_hash(&sig),
                        },
                    };
                    self.submit(tx, Sender::Attack);
                    self.drain();
                }
                _ => {}
            }
        }
    }

    fn randomized_signature(&mut self, i: usize) -> Signature {
        let message = Message::new(&self.people[i].address, &self.event_id);
        let sig = sign_randomized(&self.people[i].key, &message, &mut self.rng);
        self.people[i].extra_signatures.push(sig);
        sig
    }

    fn sender_publics(&self, r: FieldElement, sig: Signature) -> SenderPublicInputs {
        let state = self.contract.state();
        SenderPublicInputs {
            r,
            event_id: self.event_id,
            root_p: state.participants().root(),
            root_c: state.commitments().root(),
            null_s: derive_nullifier(&sig),
        }
    }

    fn sender_witness(&self, i: usize, sig: Signature) -> SenderWitness {
        let state = self.contract.state();
        let address = self.people[i].address;
        let participant_proof = state
            .participants()
            .prove(&address.registry_index())
            .expect("registered participant has a leaf");
        let commitment_proof = self.config.commitment_step.then(|| {
            state
                .commitments()
                .prove(&commitment_hash(&sig).0)
                .unwrap_or_else(|_| participant_proof.clone())
        });
        SenderWitness {
            sig,
            address,
            participant_proof,
            commitment_proof,
        }
    }

    fn prove_sender(&self, witness: SenderWitness, publics: &SenderPublicInputs) -> Result<Proof, RelationError> {
        self.backend
            .prove(&Witness::Sender(witness), &PublicInputs::Sender(*publics))
    }

    /// Proof for `publics` built by an adversary who lacks a satisfying
    /// witness: a valid transcript for other inputs, relabelled.
    fn forge(template: &Proof, publics: &PublicInputs) -> Proof {
        Proof {
            relation: template.relation,
            public_inputs: publics.encode(),
            blob: template.blob,
        }
    }

    fn honest_submission(&mut self, i: usize, sender: Sender) -> (Proof, SenderPublicInputs) {
        let p = &self.people[i];
        let (sig, r, key) = (p.sig, p.randomness, p.rsa_public());
        let publics = self.sender_publics(r, sig);
        let proof = self
            .prove_sender(self.sender_witness(i, sig), &publics)
            .expect("honest witness satisfies the sender relation");
        self.slot_owner.insert(publics.null_s, i);
        self.relay(proof.clone(), publics, key, sender);
        (proof, publics)
    }

    fn determine_step(&mut self) {
        if self.contract.state().phase() != Phase::Determine {
            return;
        }
        let mut order: Vec<usize> = (0..self.people.len()).collect();
        order.shuffle(&mut self.rng);
        let script = self.script();
        if let (Some(AdversaryScript::MalleableSig), Some(adv)) = (script, self.adversary) {
            order.retain(|&i| i != adv);
            order.insert(0, adv);
        }
        for i in order {
            if !self.is_adversary(i) {
                self.honest_submission(i, Sender::Honest(i));
                continue;
            }
            match script.expect("adversary implies a script") {
                AdversaryScript::MalleableSig => self.malleable_flood(i),
                AdversaryScript::DoubleNullifier => {
                    let (proof, publics) = self.honest_submission(i, Sender::Honest(i));
                    let key = self.people[i].rsa_public();
                    self.relay(proof, publics, key, Sender::Attack);
                    let fresh_r = hash_to_field(&self.rng.gen::<[u8; 32]>());
                    let sig = self.people[i].sig;
                    let fresh = self.sender_publics(fresh_r, sig);
                    let proof = self
                        .prove_sender(self.sender_witness(i, sig), &fresh)
                        .expect("same signature satisfies the relation");
                    self.relay(proof, fresh, None, Sender::Attack);
                }
                AdversaryScript::StaleRoot => {
                    if let Some((publics, witness)) = self.stale_publics.take() {
                        let proof = self
                            .prove_sender(witness, &publics)
                            .expect("witness held against its own snapshot");
                        let key = self.people[i].rsa_public();
                        self.relay(proof, publics, key, Sender::Attack);
                    }
                    self.honest_submission(i, Sender::Honest(i));
                }
                AdversaryScript::SelfPick | AdversaryScript::Frontrun => {
                    self.honest_submission(i, Sender::Honest(i));
                }
            }
        }
        self.drain();
    }

    /// Nondeterministic-signature attack: one submission per fresh signature.
    fn malleable_flood(&mut self, i: usize) {
        if self.config.commitment_step {
            let (template, _) = self.honest_submission(i, Sender::Honest(i));
            for _ in 1..self.people.len() {
                let sig = self.randomized_signature(i);
                let r = hash_to_field(&self.rng.gen::<[u8; 32]>());
                let publics = self.sender_publics(r, sig);
                let proof = match self.prove_sender(self.sender_witness(i, sig), &publics) {
                    Ok(proof) => proof,
                    Err(_) => Self::forge(&template, &PublicInputs::Sender(publics)),
                };
                self.slot_owner.insert(publics.null_s, i);
                self.relay(proof, publics, None, Sender::Attack);
            }
        } else {
            for _ in 0..self.people.len() {
                let sig = self.randomized_signature(i);
                let r = hash_to_field(&self.rng.gen::<[u8; 32]>());
                let publics = self.sender_publics(r, sig);
                let proof = self
                    .prove_sender(self.sender_witness(i, sig), &publics)
                    .expect("without the commitment clause any valid signature satisfies the relation");
                self.slot_owner.insert(publics.null_s, i);
                self.relay(proof, publics, None, Sender::Attack);
            }
        }
    }

    fn own_slot_free(&self, i: usize) -> bool {
        self.contract
            .state()
            .sender_slot(&self.people[i].nullifier)
            .is_some_and(|slot| slot.assigned_receiver.is_none())
    }

    fn next_receiver(&self, remaining: &[usize]) -> usize {
        let deferred = matches!(self.frontrun, Some(Frontrun::Waiting)) && remaining.len() > 1;
        let eligible: Vec<usize> = (0..remaining.len())
            .filter(|&k| !(deferred && self.is_adversary(remaining[k])))
            .collect();
        if self.config.disclosure_order == DisclosureOrder::EndgameAware && remaining.len() == 2 {
            if let Some(&k) = eligible.iter().find(|&&k| self.own_slot_free(remaining[k])) {
                return k;
            }
        }
        eligible[0]
    }

    fn disclose_tx(&mut self, i: usize, target: Nullifier) -> Transaction {
        let p = &self.people[i];
        let publics = ReceiverPublicInputs {
            address: p.address,
            event_id: self.event_id,
            null_s: target,
        };
        let witness = Witness::Receiver(ReceiverWitness { sig: p.sig });
        let proof = match self.backend.prove(&witness, &PublicInputs::Receiver(publics)) {
            Ok(proof) => proof,
            Err(_) => self.forged_self_pick(i, &publics),
        };
        let key = self.contract.state().sender_slot(&target).and_then(|s| s.rsa_public_key.clone());
        let delivery = self.people[i].delivery.clone();
        let envelope = key.map(|k| {
            encrypt_delivery_address(delivery.as_bytes(), &k, &mut self.rng)
                .expect("delivery strings fit the envelope")
                .ciphertext
        });
        Transaction {
            origin: Some(self.people[i].address),
            call: Call::Disclose {
                proof,
                publics,
                encrypted_delivery_address: envelope,
            },
        }
    }

    /// The prover refuses a self-targeting disclosure, so the adversary
    /// relabels a valid proof for some other slot.
    fn forged_self_pick(&self, i: usize, publics: &ReceiverPublicInputs) -> Proof {
        let p = &self.people[i];
        let other = self
            .contract
            .state()
            .senders()
            .iter()
            .map(|s| s.nullifier)
            .find(|n| *n != p.nullifier)
            .unwrap_or(Nullifier(FieldElement::from_u64(1)));
        let decoy = ReceiverPublicInputs { null_s: other, ..*publics };
        let template = self
            .backend
            .prove(
                &Witness::Receiver(ReceiverWitness { sig: p.sig }),
                &PublicInputs::Receiver(decoy),
            )
            .unwrap_or(Proof {
                relation: crate::relations::RelationTag::Receiver,
                public_inputs: Vec::new(),
                blob: FieldElement::from_u64(1),
            });
        Self::forge(&template, &PublicInputs::Receiver(*publics))
    }

    fn disclose_step(&mut self) {
        if self.contract.state().phase() != Phase::Disclose {
            self.stalled = Some(format!(
                "determine step ended in phase {:?} with {} of {} slots",
                self.contract.state().phase(),
                self.contract.state().senders().len(),
                self.people.len()
            ));
            return;
        }
        let mut remaining: Vec<usize> = (0..self.people.len()).collect();
        remaining.shuffle(&mut self.rng);
        let mut self_pick_pending = self.script() == Some(AdversaryScript::SelfPick);
        let mut budget = 4 * self.people.len() + 8;

        while !remaining.is_empty() && self.contract.state().phase() == Phase::Disclose {
            if budget == 0 {
                self.stalled = Some("disclosure attempt budget exhausted".into());
                return;
            }
            budget -= 1;
            self.update_frontrun_feasibility(remaining.len());

            let receiver = remaining[self.next_receiver(&remaining)];
            if self_pick_pending && self.is_adversary(receiver) {
                self_pick_pending = false;
                let own = self.people[receiver].nullifier;
                let tx = self.disclose_tx(receiver, own);
                self.submit(tx, Sender::Attack);
                self.drain();
            }

            let own = self.people[receiver].nullifier;
            let candidates: Vec<Nullifier> = self
                .contract
                .state()
                .senders()
                .iter()
                .filter(|s| s.assigned_receiver.is_none() && s.nullifier != own)
                .map(|s| s.nullifier)
                .collect();
            if candidates.is_empty() {
                self.stalled = Some(format!(
                    "{} receiver(s) left and the only unassigned slot is the next receiver's own",
                    remaining.len()
                ));
                return;
            }
            let target = candidates[self.rng.gen_range(0..candidates.len())];
            let tx = self.disclose_tx(receiver, target);
            let victim_tx = self.submit(tx, Sender::Honest(receiver));
            self.maybe_frontrun(receiver, victim_tx);

            for (sender, call, receipt, origin) in self.drain() {
                let Call::Disclose { .. } = call else { continue };
                let Some(origin) = origin else { continue };
                let Some(k) = remaining.iter().position(|&j| self.people[j].address == origin) else {
                    continue;
                };
                if receipt.is_accepted() {
                    remaining.remove(k);
                } else if receipt == Receipt::Reverted(RevertReason::Collision)
                    && sender == Sender::Honest(remaining[k])
                    && self.frontrun == Some(Frontrun::Launched { victim: remaining[k] })
                {
                    self.victim_collisions += 1;
                }
            }
        }
        if self.frontrun == Some(Frontrun::Waiting) {
            self.frontrun = Some(Frontrun::Impossible("no opening before the game closed"));
        }
    }

    fn update_frontrun_feasibility(&mut self, remaining: usize) {
        let (Some(Frontrun::Waiting), Some(adv)) = (&self.frontrun, self.adversary) else {
            return;
        };
        if !self.own_slot_free(adv) {
            self.frontrun = Some(Frontrun::Impossible("adversary's slot was chosen before any opening"));
        } else if remaining < 3 {
            self.frontrun = Some(Frontrun::Impossible("fewer than three receivers left"));
        }
    }

    /// Watches the mempool; if the fresh disclosure targets a slot other than
    /// the adversary's own, races it with a disclosure for the same slot.
    fn maybe_frontrun(&mut self, receiver: usize, victim_tx: u64) {
        let (Some(Frontrun::Waiting), Some(adv)) = (&self.frontrun, self.adversary) else {
            return;
        };
        if receiver == adv {
            return;
        }
        let own = self.people[adv].nullifier;
        let seen = self.mempool.peek().into_iter().find_map(|s| match s {
            PendingSummary::Disclose { id, target, .. } if id == victim_tx && target != own => Some(target),
            _ => None,
        });
        let Some(target) = seen else { return };
        let tx = self.disclose_tx(adv, target);
        if let Some((id, _)) = self.mempool.inject_ahead(victim_tx, tx) {
            self.pending.insert(id, Sender::Attack);
            self.frontrun = Some(Frontrun::Launched { victim: receiver });
        }
    }

    fn finish(self, session_event_ids: Vec<EventId>) -> GameRun {
        let snapshot = self.contract.snapshot();
        let mut owned: BTreeMap<usize, Vec<Nullifier>> = BTreeMap::new();
        for slot in &snapshot.senders {
            if let Some(&i) = self.slot_owner.get(&slot.nullifier) {
                owned.entry(i).or_default().push(slot.nullifier);
            }
        }

        let assignment = snapshot
            .senders
            .iter()
            .enumerate()
            .map(|(slot, entry)| AssignmentRow {
                slot,
                nullifier: entry.nullifier,
                randomness: entry.randomness,
                sender: self.slot_owner.get(&entry.nullifier).map(|&i| self.people[i].address),
                receiver: entry.assigned_receiver,
            })
            .collect::<Vec<_>>();

        let participants = self
            .people
            .iter()
            .enumerate()
            .map(|(i, p)| ParticipantTruth {
                address: p.address,
                adversary: self.is_adversary(i),
                signature: p.sig,
                nullifier: p.nullifier,
                commitment: self.config.commitment_step.then_some(p.commitment),
                extra_signatures: p.extra_signatures.clone(),
                randomness: owned
                    .get(&i)
                    .and_then(|slots| slots.contains(&p.nullifier).then_some(p.randomness)),
                rsa_seed: p.rsa_seed,
                delivery: p.delivery.clone(),
                owned_slots: owned.get(&i).cloned().unwrap_or_default(),
            })
            .collect();
        let ground_truth = GroundTruth { participants };

        let receipts = summarize(self.contract.log());
        let adversary_slots = self.adversary.map_or(0, |a| owned.get(&a).map_or(0, Vec::len));
        let fixed_point = assignment.iter().any(|row| row.sender.is_some() && row.sender == row.receiver);
        let ownership_broken = snapshot.phase >= Phase::Disclose && (0..self.people.len()).any(|i| owned.get(&i).map_or(0, Vec::len) != 1);
        let attack = self.attack_outcome(adversary_slots);

        let mut keys = KeyRing::new();
        for p in &self.people {
            if let Some(rsa) = &p.rsa {
                keys.insert(p.address, rsa.clone());
            }
        }

        let mut report = GameReport {
            config: *self.config,
            event_id: self.event_id,
            session_event_ids,
            final_phase: snapshot.phase,
            stalled: self.stalled.clone(),
            assignment,
            derangement_ok: false,
            anonymity_ok: false,
            protocol_violation: fixed_point || ownership_broken,
            receipts,
            attack,
            checks: super::Checklist {
                bijective: false,
                derangement: false,
                anonymity: false,
                low_s: false,
                event_id_unique: false,
                envelopes: None,
            },
            ground_truth,
            timing: self.timing,
        };
        let run = GameRun {
            snapshot,
            txlog_jsonl: self.contract.txlog_jsonl(),
            relay_jsonl: self.relayer.log_jsonl(),
            keys,
            report: report.clone(),
            contract: self.contract,
        };
        let checks = verify_report(&report, &run.artifacts(), &run.keys);
        report.checks = checks;
        report.derangement_ok = checks.bijective && checks.derangement;
        report.anonymity_ok = checks.anonymity;
        GameRun { report, ..run }
    }

    fn attack_outcome(&self, adversary_slots: usize) -> Option<AttackOutcome> {
        let (script, adv) = (self.script()?, self.adversary?);
        let attempts = self.attack_receipts.values().sum();
        let (launched, note, victim) = match &self.frontrun {
            Some(Frontrun::Launched { victim }) => (true, None, Some(self.people[*victim].address)),
            Some(Frontrun::Impossible(why)) => (false, Some((*why).to_owned()), None),
            Some(Frontrun::Waiting) => (false, Some("never found an opening".to_owned()), None),
            None => (attempts > 0, None, None),
        };
        let succeeded = match script {
            AdversaryScript::MalleableSig => adversary_slots > 1,
            AdversaryScript::Frontrun => launched && self.victim_collisions > 0,
            _ => self.attack_accepted > 0,
        };
        Some(AttackOutcome {
            script,
            adversary: self.people[adv].address,
            launched,
            note,
            attempts,
            receipts: self.attack_receipts.clone(),
            adversary_slots,
            honest_locked_out: self.honest_locked_out,
            victim,
            victim_collisions: self.victim_collisions,
            succeeded,
        })
    }
}

fn label(receipt: &Receipt) -> String {
    match receipt {
        Receipt::Accepted => "ACCEPTED".to_owned(),
        Receipt::Reverted(reason) => reason.to_string(),
    }
}

fn summarize(log: &[crate::contract::LoggedTransaction]) -> ReceiptSummary {
    let mut summary = ReceiptSummary::default();
    for entry in log {
        let outcome = label(&entry.receipt);
        match entry.receipt {
            Receipt::Accepted => summary.accepted += 1,
            Receipt::Reverted(_) => *summary.reverted.entry(outcome.clone()).or_default() += 1,
        }
        *summary
            .by_call
            .entry(entry.tx.call.name().to_owned())
            .or_default()
            .entry(outcome)
            .or_default() += 1;
    }
    summary
}
