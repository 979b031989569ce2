//! Field elements, hash-to-field, addresses, event ids and signed messages.
//!
//! The protocol field is the secp256k1 group order, so signature scalars,
//! nullifiers, tree roots and randomness anchors all live in one field.

use std::fmt;

use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::PrimeField;
use k256::{FieldBytes, Scalar, U256};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sha3::Keccak256;
use thiserror::Error;

use crate::hexfmt;

/// Big-endian bytes of the field modulus (secp256k1 group order).
pub const FIELD_MODULUS: [u8; 32] = [
    0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xfe,
    0xba, 0xae, 0xdc, 0xe6, 0xaf, 0x48, 0xa0, 0x3b, 0xbf, 0xd2, 0x5e, 0x8c, 0xd0, 0x36, 0x41, 0x41,
];

pub const ADDRESS_LEN: usize = 20;
pub const NONCE_LEN: usize = 32;
pub const EVENT_ID_LEN: usize = ADDRESS_LEN + NONCE_LEN;
pub const MESSAGE_LEN: usize = ADDRESS_LEN + EVENT_ID_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrimitiveError {
    #[error("value is not a canonical field element (>= modulus)")]
    NotCanonical,
    #[error("nonce does not fit in {NONCE_LEN} bytes")]
    NonceOutOfRange,
    #[error("expected {expected} bytes, got {got}")]
    InvalidLength { expected: usize, got: usize },
    #[error("invalid hex string {0:?}")]
    InvalidHex(String),
}

/// An element of F_p, stored as canonical big-endian bytes.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FieldElement([u8; 32]);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement([0u8; 32]);

    /// Parses canonical big-endian bytes, rejecting values `>= p`.
    pub fn from_be_bytes(bytes: [u8; 32]) -> Result<Self, PrimitiveError> {
        if bytes < FIELD_MODULUS {
            Ok(FieldElement(bytes))
        } else {
            Err(PrimitiveError::NotCanonical)
        }
    }

    /// Interprets any 32 bytes as an integer and reduces it mod p.
    pub fn from_be_bytes_reduced(bytes: [u8; 32]) -> Self {
        let scalar = <Scalar as Reduce<U256>>::reduce_bytes(&FieldBytes::from(bytes));
        Self::from_scalar(&scalar)
    }

    pub fn from_u64(value: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[24..].copy_from_slice(&value.to_be_bytes());
        FieldElement(bytes)
    }

    pub fn to_be_bytes(self) -> [u8; 32] {
        self.0
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 32]
    }

    /// Bit `i` of the integer value, counting from the least significant bit.
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < 256);
        (self.0[31 - i / 8] >> (i % 8)) & 1 == 1
    }

    pub fn add(&self, other: &FieldElement) -> FieldElement {
        Self::from_scalar(&(self.to_scalar() + other.to_scalar()))
    }

    pub fn mul(&self, other: &FieldElement) -> FieldElement {
        Self::from_scalar(&(self.to_scalar() * other.to_scalar()))
    }

    pub fn neg(&self) -> FieldElement {
        Self::from_scalar(&(-self.to_scalar()))
    }

    pub fn square(&self) -> FieldElement {
        self.mul(self)
    }

    pub(crate) fn to_scalar(self) -> Scalar {
        // Canonical by construction.
        Scalar::from_repr(FieldBytes::from(self.0)).expect("canonical field element")
    }

    pub(crate) fn from_scalar(scalar: &Scalar) -> Self {
        FieldElement(scalar.to_bytes().into())
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(&self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, PrimitiveError> {
        Self::from_be_bytes(hexfmt::decode_fixed::<32>(text)?)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElement({})", self.to_hex())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<FieldElement> for String {
    fn from(value: FieldElement) -> Self {
        value.to_hex()
    }
}

impl TryFrom<String> for FieldElement {
    type Error = PrimitiveError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        FieldElement::from_hex(&value)
    }
}

/// SHA-256 of `data`, read as a big-endian integer and reduced mod p.
pub fn hash_to_field(data: &[u8]) -> FieldElement {
    FieldElement::from_be_bytes_reduced(Sha256::digest(data).into())
}

/// [`hash_to_field`] over the concatenation of `parts`.
pub fn hash_to_field_parts(parts: &[&[u8]]) -> FieldElement {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    FieldElement::from_be_bytes_reduced(hasher.finalize().into())
}

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    Keccak256::digest(data).into()
}

/// 20-byte account identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Address([u8; ADDRESS_LEN]);

impl Address {
    pub fn new(bytes: [u8; ADDRESS_LEN]) -> Self {
        Address(bytes)
    }

    /// Account derivation: last 20 bytes of keccak256 over the 64-byte
    /// uncompressed public key (x || y, without the 0x04 tag).
    pub fn from_public_key_xy(xy: &[u8; 64]) -> Self {
        let digest = keccak256(xy);
        let mut bytes = [0u8; ADDRESS_LEN];
        bytes.copy_from_slice(&digest[32 - ADDRESS_LEN..]);
        Address(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; ADDRESS_LEN] {
        &self.0
    }

    /// Index of this address in the participants tree.
    pub fn registry_index(&self) -> FieldElement {
        hash_to_field(&self.0)
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(&self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, PrimitiveError> {
        Ok(Address(hexfmt::decode_fixed(text)?))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<Address> for String {
    fn from(value: Address) -> Self {
        value.to_hex()
    }
}

impl TryFrom<String> for Address {
    type Error = PrimitiveError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Address::from_hex(&value)
    }
}

/// Game identifier: `contract address || nonce`, nonce as 32 big-endian bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EventId {
    contract: Address,
    nonce: [u8; NONCE_LEN],
}

impl EventId {
    pub fn new(contract: Address, nonce: u128) -> Self {
        let mut bytes = [0u8; NONCE_LEN];
        bytes[NONCE_LEN - 16..].copy_from_slice(&nonce.to_be_bytes());
        EventId { contract, nonce: bytes }
    }

    /// Builds an event id from a big-endian nonce of arbitrary length;
    /// leading zero bytes are ignored, anything wider than 256 bits is a
    /// range error.
    pub fn from_nonce_bytes(contract: Address, nonce: &[u8]) -> Result<Self, PrimitiveError> {
        let significant = nonce.iter().position(|&b| b != 0).map_or(&[][..], |i| &nonce[i..]);
        if significant.len() > NONCE_LEN {
            return Err(PrimitiveError::NonceOutOfRange);
        }
        let mut bytes = [0u8; NONCE_LEN];
        bytes[NONCE_LEN - significant.len()..].copy_from_slice(significant);
        Ok(EventId { contract, nonce: bytes })
    }

    pub fn contract(&self) -> Address {
        self.contract
    }

    pub fn nonce_bytes(&self) -> &[u8; NONCE_LEN] {
        &self.nonce
    }

    pub fn encode(&self) -> [u8; EVENT_ID_LEN] {
        let mut out = [0u8; EVENT_ID_LEN];
        out[..ADDRESS_LEN].copy_from_slice(self.contract.as_bytes());
        out[ADDRESS_LEN..].copy_from_slice(&self.nonce);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PrimitiveError> {
        if bytes.len() != EVENT_ID_LEN {
            return Err(PrimitiveError::InvalidLength {
                expected: EVENT_ID_LEN,
                got: bytes.len(),
            });
        }
        let mut contract = [0u8; ADDRESS_LEN];
        contract.copy_from_slice(&bytes[..ADDRESS_LEN]);
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(&bytes[ADDRESS_LEN..]);
        Ok(EventId {
            contract: Address(contract),
            nonce,
        })
    }

    /// The id of the following game on the same contract.
    pub fn next(&self) -> Result<Self, PrimitiveError> {
        let mut nonce = self.nonce;
        for byte in nonce.iter_mut().rev() {
            let (sum, carry) = byte.overflowing_add(1);
            *byte = sum;
            if !carry {
                return Ok(EventId {
                    contract: self.contract,
                    nonce,
                });
            }
        }
        Err(PrimitiveError::NonceOutOfRange)
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(&self.encode())
    }
}

impl fmt::Debug for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EventId({})", self.to_hex())
    }
}

impl From<EventId> for String {
    fn from(value: EventId) -> Self {
        value.to_hex()
    }
}

impl TryFrom<String> for EventId {
    type Error = PrimitiveError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        EventId::decode(&hexfmt::decode(&value)?)
    }
}

/// The signed message `address || eventId`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Message([u8; MESSAGE_LEN]);

impl Message {
    pub fn new(address: &Address, event_id: &EventId) -> Self {
        let mut bytes = [0u8; MESSAGE_LEN];
        bytes[..ADDRESS_LEN].copy_from_slice(address.as_bytes());
        bytes[ADDRESS_LEN..].copy_from_slice(&event_id.encode());
        Message(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; MESSAGE_LEN] {
        &self.0
    }

    /// The 32-byte hash that gets signed and fed to ecrecover.
    pub fn digest(&self) -> [u8; 32] {
        keccak256(&self.0)
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Message({})", hexfmt::encode(&self.0))
    }
}
