//! Scripted games: honest runs, the attack scenarios, and end-state checks.
//!
//! Every random choice (keys, nonces, relay order, disclosure order, target
//! picks) is drawn from one ChaCha20 stream seeded by [`GameConfig::seed`],
//! so a config fully determines the report and the transaction log.

mod artifacts;
mod game;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smt::{DEFAULT_DEPTH, MAX_DEPTH};

pub use artifacts::{load_artifacts, write_artifacts, PublicArtifacts};
pub use artifacts::{RELAY_FILE, REPORT_FILE, STATE_FILE, TXLOG_FILE};
pub use game::{run_attack, run_game, GameRun, Session};
pub use report::{
    find_links, verify_report, AssignmentRow, AttackOutcome, Checklist, GameReport, GroundTruth, KeyRing,
    ParticipantTruth, PhaseTiming, ReceiptSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryScript {
    /// Extra sender slots from non-deterministic signatures.
    MalleableSig,
    /// Re-submitting an already spent nullifier.
    DoubleNullifier,
    /// Disclosing as receiver of one's own sender slot.
    SelfPick,
    /// Racing a pending disclosure for the same sender slot.
    Frontrun,
    /// Submitting against roots that have since moved.
    StaleRoot,
}

/// Order in which receivers take their turn in the disclosure step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisclosureOrder {
    /// Seeded shuffle, nothing else. The last receiver can be left holding
    /// only their own slot, which stalls the game.
    Shuffled,
    /// Seeded shuffle, except that when two receivers remain, one whose own
    /// slot is still unassigned goes first. This rules out the stall.
    EndgameAware,
}

macro_rules! kebab_from_str {
    ($ty:ty) => {
        impl std::str::FromStr for $ty {
            type Err = String;

            fn from_str(text: &str) -> Result<Self, Self::Err> {
                serde_json::from_value(serde_json::Value::String(text.to_owned()))
                    .map_err(|_| format!("unknown value `{text}`"))
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                let value = serde_json::to_value(self).expect("unit variant");
                f.write_str(value.as_str().unwrap_or("?"))
            }
        }
    };
}

kebab_from_str!(AdversaryScript);
kebab_from_str!(DisclosureOrder);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    pub seed: u64,
    pub adversary: Option<AdversaryScript>,
    pub commitment_step: bool,
    /// Use RSA public keys as randomness and deliver encrypted addresses.
    pub envelopes: bool,
    pub disclosure_order: DisclosureOrder,
    pub depth: usize,
}

impl GameConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        GameConfig {
            n,
            seed,
            adversary: None,
            commitment_step: true,
            envelopes: true,
            disclosure_order: DisclosureOrder::EndgameAware,
            depth: DEFAULT_DEPTH,
        }
    }

    pub fn with_adversary(mut self, script: AdversaryScript) -> Self {
        self.adversary = Some(script);
        self
    }

    pub fn with_commitment_step(mut self, enabled: bool) -> Self {
        self.commitment_step = enabled;
        self
    }

    pub fn with_envelopes(mut self, enabled: bool) -> Self {
        self.envelopes = enabled;
        self
    }

    pub fn with_disclosure_order(mut self, order: DisclosureOrder) -> Self {
        self.disclosure_order = order;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n < 2 {
            return Err(SimError::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return Err(SimError::InvalidConfig(format!("depth {} out of range", self.depth)));
        }
        if self.adversary == Some(AdversaryScript::StaleRoot) && !self.commitment_step {
            return Err(SimError::InvalidConfig(
                "the stale-root scenario needs the commitment step".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: String, message: String },
}
