//! RSA-2048 keys used as sender randomness, and OAEP envelopes carrying a
//! receiver's delivery address to the matched sender.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rsa::traits::PublicKeyParts;
use rsa::{BigUint, Oaep, RsaPrivateKey, RsaPublicKey};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

use crate::primitives::{hash_to_field, FieldElement};

pub const MODULUS_BITS: usize = 2048;
pub const MODULUS_LEN: usize = MODULUS_BITS / 8;
pub const PUBLIC_EXPONENT: u32 = 65537;
/// Encoded public key: 256-byte modulus || 4-byte exponent, both big-endian.
pub const PUBLIC_KEY_LEN: usize = MODULUS_LEN + 4;
/// Largest OAEP-SHA256 plaintext for a 2048-bit modulus: k - 2*hLen - 2.
pub const MAX_PLAINTEXT_LEN: usize = MODULUS_LEN - 2 * 32 - 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("plaintext of {got} bytes exceeds the {MAX_PLAINTEXT_LEN}-byte capacity")]
    TooLarge { got: usize },
    #[error("decryption failed (padding check)")]
    Padding,
    #[error("malformed public key encoding: {0}")]
    MalformedKey(String),
}

/// RSA public key in its fixed wire encoding.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PublicKeyBytes(Vec<u8>);

impl PublicKeyBytes {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, EnvelopeError> {
        if bytes.len() != PUBLIC_KEY_LEN {
            return Err(EnvelopeError::MalformedKey(format!(
                "expected {PUBLIC_KEY_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        Ok(PublicKeyBytes(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// `hash(key bytes)`: the field-sized randomness `r` this key stands for.
    pub fn anchor(&self) -> FieldElement {
        hash_to_field(&self.0)
    }

    fn to_rsa(&self) -> Result<RsaPublicKey, EnvelopeError> {
        let n = BigUint::from_bytes_be(&self.0[..MODULUS_LEN]);
        let e = BigUint::from_bytes_be(&self.0[MODULUS_LEN..]);
        RsaPublicKey::new(n, e).map_err(|e| EnvelopeError::MalformedKey(e.to_string()))
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(&self.0)
    }
}

impl std::fmt::Debug for PublicKeyBytes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKeyBytes({})", self.anchor())
    }
}

impl From<PublicKeyBytes> for String {
    fn from(value: PublicKeyBytes) -> Self {
        value.to_base64()
    }
}

impl TryFrom<String> for PublicKeyBytes {
    type Error = EnvelopeError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let bytes = STANDARD
            .decode(value)
            .map_err(|e| EnvelopeError::MalformedKey(e.to_string()))?;
        PublicKeyBytes::from_bytes(bytes)
    }
}

#[derive(Clone)]
pub struct RsaKeyPair {
    private: RsaPrivateKey,
    public: PublicKeyBytes,
}

impl RsaKeyPair {
    pub fn public_key(&self) -> &PublicKeyBytes {
        &self.public
    }

    pub fn modulus_bits(&self) -> usize {
        self.private.n().bits()
    }

    pub fn public_exponent(&self) -> u32 {
        let bytes = self.private.e().to_bytes_be();
        bytes.iter().fold(0u32, |acc, b| (acc << 8) | u32::from(*b))
    }
}

impl std::fmt::Debug for RsaKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RsaKeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

fn encode_public(key: &RsaPublicKey) -> PublicKeyBytes {
    let mut out = vec![0u8; PUBLIC_KEY_LEN];
    let n = key.n().to_bytes_be();
    out[MODULUS_LEN - n.len()..MODULUS_LEN].copy_from_slice(&n);
    let e = key.e().to_bytes_be();
    out[PUBLIC_KEY_LEN - e.len()..].copy_from_slice(&e);
    PublicKeyBytes(out)
}

/// Deterministic 2048-bit keypair (e = 65537) from a 32-byte seed.
pub fn generate_rsa_keypair(seed: [u8; 32]) -> RsaKeyPair {
    let mut rng = ChaCha20Rng::from_seed(seed);
    loop {
        // prime generation failures are retried on the same stream
        if let Ok(private) = RsaPrivateKey::new(&mut rng, MODULUS_BITS) {
            if private.n().bits() == MODULUS_BITS {
                let public = encode_public(&private.to_public_key());
                return RsaKeyPair { private, public };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryEnvelope {
    #[serde(with = "b64")]
    pub ciphertext: Vec<u8>,
    pub recipient_key_fingerprint: FieldElement,
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(de)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

pub fn encrypt_delivery_address<R: RngCore + CryptoRng>(
    plaintext: &[u8],
    key: &PublicKeyBytes,
    rng: &mut R,
) -> Result<DeliveryEnvelope, EnvelopeError> {
    if plaintext.len() > MAX_PLAINTEXT_LEN {
        return Err(EnvelopeError::TooLarge { got: plaintext.len() });
    }
    let ciphertext = key
        .to_rsa()?
        .encrypt(rng, Oaep::new::<Sha256>(), plaintext)
        .map_err(|_| EnvelopeError::TooLarge { got: plaintext.len() })?;
    Ok(DeliveryEnvelope {
        ciphertext,
        recipient_key_fingerprint: key.anchor(),
    })
}

pub fn decrypt_delivery_address(envelope: &DeliveryEnvelope, key: &RsaKeyPair) -> Result<Vec<u8>, EnvelopeError> {
    decrypt_raw(&envelope.ciphertext, key)
}

pub fn decrypt_raw(ciphertext: &[u8], key: &RsaKeyPair) -> Result<Vec<u8>, EnvelopeError> {
    key.private
        .decrypt(Oaep::new::<Sha256>(), ciphertext)
        .map_err(|_| EnvelopeError::Padding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn keys() -> &'static (RsaKeyPair, RsaKeyPair) {
        static KEYS: OnceLock<(RsaKeyPair, RsaKeyPair)> = OnceLock::new();
        KEYS.get_or_init(|| (generate_rsa_keypair([1; 32]), generate_rsa_keypair([2; 32])))
    }

    #[test]
    fn key_shape() {
        let (a, _) = keys();
        assert_eq!(a.modulus_bits(), 2048);
        assert_eq!(a.public_exponent(), 65537);
        assert_eq!(a.public_key().as_bytes().len(), PUBLIC_KEY_LEN);
        assert_eq!(&a.public_key().as_bytes()[MODULUS_LEN..], &65537u32.to_be_bytes());
    }

    #[test]
    fn same_seed_same_key() {
        let (a, _) = keys();
        assert_eq!(generate_rsa_keypair([1; 32]).public_key(), a.public_key());
    }

    #[test]
    fn round_trip_and_wrong_key() {
        let (a, b) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let env = encrypt_delivery_address(b"12 Holly Lane", a.public_key(), &mut rng).unwrap();
        assert_eq!(env.ciphertext.len(), MODULUS_LEN);
        assert_eq!(env.recipient_key_fingerprint, a.public_key().anchor());
        assert_eq!(decrypt_delivery_address(&env, a).unwrap(), b"12 Holly Lane");
        assert_eq!(decrypt_delivery_address(&env, b), Err(EnvelopeError::Padding));
    }

    #[test]
    fn capacity_boundaries() {
        let (a, _) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        assert_eq!(MAX_PLAINTEXT_LEN, 190);
        let empty = encrypt_delivery_address(b"", a.public_key(), &mut rng).unwrap();
        assert_eq!(decrypt_delivery_address(&empty, a).unwrap(), b"");
        let full = vec![0x5a; MAX_PLAINTEXT_LEN];
        let env = encrypt_delivery_address(&full, a.public_key(), &mut rng).unwrap();
        assert_eq!(decrypt_delivery_address(&env, a).unwrap(), full);
        assert_eq!(
            encrypt_delivery_address(&[0; MAX_PLAINTEXT_LEN + 1], a.public_key(), &mut rng),
            Err(EnvelopeError::TooLarge { got: 191 })
        );
        assert_eq!(
            encrypt_delivery_address(&[0; 300], a.public_key(), &mut rng),
            Err(EnvelopeError::TooLarge { got: 300 })
        );
    }

    #[test]
    fn bit_flip_is_detected() {
        let (a, _) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut env = encrypt_delivery_address(b"North Pole", a.public_key(), &mut rng).unwrap();
        env.ciphertext[100] ^= 0x01;
        assert_eq!(decrypt_delivery_address(&env, a), Err(EnvelopeError::Padding));
    }

    #[test]
    fn public_key_base64_round_trip() {
        let (a, _) = keys();
        let json = serde_json::to_string(a.public_key()).unwrap();
        let back: PublicKeyBytes = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, a.public_key());
        assert!(PublicKeyBytes::from_bytes(vec![0; 10]).is_err());
    }
}
