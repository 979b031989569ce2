//! Deterministic ECDSA over secp256k1, address recovery, signature
//! commitments and nullifiers.
//!
//! Signers always emit low-s signatures (RFC 6979 nonces). Verification
//! boundaries refuse high-s signatures instead of normalizing them, so the
//! `(r, n - s)` twin of an accepted signature never verifies.

use std::fmt;

use k256::ecdsa::signature::hazmat::RandomizedPrehashSigner;
use k256::ecdsa::{RecoveryId, Signature as EcdsaSignature, SigningKey, VerifyingKey};
use k256::FieldBytes;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hexfmt;
use crate::primitives::{hash_to_field, Address, FieldElement, Message, PrimitiveError};

pub const SIGNATURE_LEN: usize = 65;

/// `(n - 1) / 2` for the secp256k1 order n.
const HALF_ORDER: [u8; 32] = [
    0x7f, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
    0x5d, 0x57, 0x6e, 0x73, 0x57, 0xa4, 0x50, 0x1d, 0xdf, 0xe9, 0x2f, 0x46, 0x68, 0x1b, 0x20, 0xa0,
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SigningError {
    #[error("invalid secret key")]
    InvalidSecretKey,
    #[error("signature component is zero or out of range")]
    InvalidComponent,
    #[error("recovery id must be 0 or 1, got {0}")]
    InvalidRecoveryId(u8),
    #[error("high-s signature rejected")]
    Malleable,
    #[error("public key recovery failed")]
    Recovery,
    #[error(transparent)]
    Encoding(#[from] PrimitiveError),
}

/// ECDSA signature `(r, s, v)` with `v` the parity recovery id.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Signature {
    r: FieldElement,
    s: FieldElement,
    recovery_id: u8,
}

impl Signature {
    pub fn new(r: FieldElement, s: FieldElement, recovery_id: u8) -> Result<Self, SigningError> {
        if r.is_zero() || s.is_zero() {
            return Err(SigningError::InvalidComponent);
        }
        if recovery_id > 1 {
            return Err(SigningError::InvalidRecoveryId(recovery_id));
        }
        Ok(Signature { r, s, recovery_id })
    }

    pub fn r(&self) -> FieldElement {
        self.r
    }

    pub fn s(&self) -> FieldElement {
        self.s
    }

    pub fn recovery_id(&self) -> u8 {
        self.recovery_id
    }

    pub fn is_low_s(&self) -> bool {
        self.s.to_be_bytes() <= HALF_ORDER
    }

    /// The malleability twin `(r, n - s, v ^ 1)`; recovers the same key
    /// under unrestricted ECDSA.
    pub fn mirrored(&self) -> Signature {
        Signature {
            r: self.r,
            s: self.s.neg(),
            recovery_id: self.recovery_id ^ 1,
        }
    }

    /// Canonical `r(32) || s(32) || v(1)` encoding.
    pub fn to_bytes(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..32].copy_from_slice(self.r.as_bytes());
        out[32..64].copy_from_slice(self.s.as_bytes());
        out[64] = self.recovery_id;
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SigningError> {
        if bytes.len() != SIGNATURE_LEN {
            return Err(PrimitiveError::InvalidLength {
                expected: SIGNATURE_LEN,
                got: bytes.len(),
            }
            .into());
        }
        let r = FieldElement::from_be_bytes(bytes[..32].try_into().unwrap())
            .map_err(|_| SigningError::InvalidComponent)?;
        let s = FieldElement::from_be_bytes(bytes[32..64].try_into().unwrap())
            .map_err(|_| SigningError::InvalidComponent)?;
        Signature::new(r, s, bytes[64])
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(&self.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self, SigningError> {
        Signature::from_bytes(&hexfmt::decode(text)?)
    }

    fn from_ecdsa(sig: &EcdsaSignature, recid: RecoveryId) -> Self {
        let (r, s) = sig.split_bytes();
        Signature {
            r: FieldElement::from_be_bytes(r.into()).expect("r < n"),
            s: FieldElement::from_be_bytes(s.into()).expect("s < n"),
            recovery_id: u8::from(recid.is_y_odd()),
        }
    }

    fn to_ecdsa(self) -> Result<(EcdsaSignature, RecoveryId), SigningError> {
        let sig = EcdsaSignature::from_scalars(
            FieldBytes::from(self.r.to_be_bytes()),
            FieldBytes::from(self.s.to_be_bytes()),
        )
        .map_err(|_| SigningError::InvalidComponent)?;
        let recid = RecoveryId::from_byte(self.recovery_id)
            .ok_or(SigningError::InvalidRecoveryId(self.recovery_id))?;
        Ok((sig, recid))
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

impl From<Signature> for String {
    fn from(value: Signature) -> Self {
        value.to_hex()
    }
}

impl TryFrom<String> for Signature {
    type Error = SigningError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Signature::from_hex(&value)
    }
}

#[derive(Clone)]
pub struct KeyPair {
    secret: SigningKey,
    public: VerifyingKey,
    address: Address,
}

impl KeyPair {
    pub fn from_secret_bytes(bytes: &[u8; 32]) -> Result<Self, SigningError> {
        let secret =
            SigningKey::from_bytes(&FieldBytes::from(*bytes)).map_err(|_| SigningError::InvalidSecretKey)?;
        Ok(Self::from_signing_key(secret))
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self::from_signing_key(SigningKey::random(rng))
    }

    fn from_signing_key(secret: SigningKey) -> Self {
        let public = *secret.verifying_key();
        let address = address_of(&public);
        KeyPair {
            secret,
            public,
            address,
        }
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes().into()
    }

    /// SEC1 uncompressed public key (65 bytes, 0x04 prefix).
    pub fn public_key_uncompressed(&self) -> Vec<u8> {
        self.public.to_encoded_point(false).as_bytes().to_vec()
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("address", &self.address).finish_non_exhaustive()
    }
}

fn address_of(key: &VerifyingKey) -> Address {
    let point = key.to_encoded_point(false);
    let xy: &[u8; 64] = point.as_bytes()[1..].try_into().expect("uncompressed point");
    Address::from_public_key_xy(xy)
}

/// RFC 6979 signature over `message.digest()`, normalized to low-s.
pub fn sign_deterministic(key: &KeyPair, message: &Message) -> Signature {
    sign_digest(key, &message.digest())
}

/// RFC 6979 signature over a raw 32-byte digest, normalized to low-s.
pub fn sign_digest(key: &KeyPair, digest: &[u8; 32]) -> Signature {
    let (sig, recid) = key
        .secret
        .sign_prehash_recoverable(digest)
        .expect("32-byte prehash is always signable");
    let out = Signature::from_ecdsa(&sig, recid);
    debug_assert!(out.is_low_s());
    out
}

/// Signature with a fresh random nonce mixed in. Valid ECDSA and low-s, but
/// not reproducible: the tool of the nondeterministic-signature adversary.
pub fn sign_randomized<R: RngCore + CryptoRng>(key: &KeyPair, message: &Message, rng: &mut R) -> Signature {
    let digest = message.digest();
    let sig: EcdsaSignature = key
        .secret
        .sign_prehash_with_rng(rng, &digest)
        .expect("32-byte prehash is always signable");
    let sig = sig.normalize_s().unwrap_or(sig);
    for byte in 0..2u8 {
        let recid = RecoveryId::from_byte(byte).expect("0 and 1 are valid");
        if VerifyingKey::recover_from_prehash(&digest, &sig, recid).ok() == Some(key.public) {
            return Signature::from_ecdsa(&sig, recid);
        }
    }
    unreachable!("one of the two parity ids recovers the signer")
}

/// Recovers the signer address. High-s input is a malleability error.
pub fn ecrecover(sig: &Signature, message: &Message) -> Result<Address, SigningError> {
    if !sig.is_low_s() {
        return Err(SigningError::Malleable);
    }
    let (ecdsa_sig, recid) = sig.to_ecdsa()?;
    let key = VerifyingKey::recover_from_prehash(&message.digest(), &ecdsa_sig, recid)
        .map_err(|_| SigningError::Recovery)?;
    Ok(address_of(&key))
}

/// `H = hash(sig)`, published in the commitments tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Commitment(pub FieldElement);

/// `hash(sig.s)`: one per participant per event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nullifier(pub FieldElement);

impl fmt::Display for Nullifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn commitment_hash(sig: &Signature) -> Commitment {
    Commitment(hash_to_field(&sig.to_bytes()))
}

pub fn derive_nullifier(sig: &Signature) -> Nullifier {
    Nullifier(hash_to_field(sig.s().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::EventId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn message_for(key: &KeyPair, nonce: u128) -> Message {
        Message::new(&key.address(), &EventId::new(Address::new([0x11; 20]), nonce))
    }

    #[test]
    fn deterministic_signing_is_bit_identical() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = KeyPair::generate(&mut rng);
        let m = message_for(&key, 3);
        assert_eq!(sign_deterministic(&key, &m), sign_deterministic(&key, &m));
    }

    #[test]
    fn half_order_constant_is_floor_of_n_over_two() {
        // 2 * HALF_ORDER + 1 == n, checked in field arithmetic: 2h + 1 == 0 mod n
        let h = FieldElement::from_be_bytes(HALF_ORDER).unwrap();
        assert!(h.add(&h).add(&FieldElement::from_u64(1)).is_zero());
    }

    #[test]
    fn mirrored_signature_is_rejected_and_changes_nullifier() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let key = KeyPair::generate(&mut rng);
        let m = message_for(&key, 0);
        let sig = sign_deterministic(&key, &m);
        let twin = sig.mirrored();
        assert!(!twin.is_low_s());
        assert_eq!(ecrecover(&twin, &m), Err(SigningError::Malleable));
        assert_ne!(derive_nullifier(&sig), derive_nullifier(&twin));
        // the twin is a genuine ECDSA signature under the unrestricted rule
        let (raw, recid) = twin.to_ecdsa().unwrap();
        let recovered = VerifyingKey::recover_from_prehash(&m.digest(), &raw, recid);
        if let Ok(k) = recovered {
            assert_eq!(address_of(&k), key.address());
        }
    }

    #[test]
    fn recovery_id_is_part_of_the_commitment() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let key = KeyPair::generate(&mut rng);
        let sig = sign_deterministic(&key, &message_for(&key, 0));
        let flipped = Signature::new(sig.r(), sig.s(), sig.recovery_id() ^ 1).unwrap();
        assert_ne!(commitment_hash(&sig), commitment_hash(&flipped));
        assert_eq!(commitment_hash(&sig), commitment_hash(&sig));
        assert_eq!(derive_nullifier(&sig), derive_nullifier(&flipped));
    }

    #[test]
    fn randomized_signatures_differ_but_recover() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let key = KeyPair::generate(&mut rng);
        let m = message_for(&key, 0);
        let a = sign_randomized(&key, &m, &mut rng);
        let b = sign_randomized(&key, &m, &mut rng);
        assert_ne!(a, b);
        assert_ne!(derive_nullifier(&a), derive_nullifier(&b));
        assert_eq!(ecrecover(&a, &m).unwrap(), key.address());
        assert_eq!(ecrecover(&b, &m).unwrap(), key.address());
    }

    #[test]
    fn malformed_signatures_are_rejected() {
        let one = FieldElement::from_u64(1);
        assert_eq!(Signature::new(FieldElement::ZERO, one, 0), Err(SigningError::InvalidComponent));
        assert_eq!(Signature::new(one, one, 2), Err(SigningError::InvalidRecoveryId(2)));
        assert!(Signature::from_bytes(&[0u8; 64]).is_err());
        assert!(KeyPair::from_secret_bytes(&[0u8; 32]).is_err());
    }

    #[test]
    fn signature_hex_is_65_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let key = KeyPair::generate(&mut rng);
        let sig = sign_deterministic(&key, &message_for(&key, 0));
        let text = sig.to_hex();
        assert_eq!(text.len(), 2 + 2 * SIGNATURE_LEN);
        assert_eq!(Signature::from_hex(&text).unwrap(), sig);
    }
}
