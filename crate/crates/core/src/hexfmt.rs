//! `0x`-prefixed lowercase hex helpers shared by the serde impls.

use crate::primitives::PrimitiveError;

pub(crate) fn encode(bytes: &[u8]) -> String {
    format!("0x{}", hex::encode(bytes))
}

pub(crate) fn decode(text: &str) -> Result<Vec<u8>, PrimitiveError> {
    let digits = text
        .strip_prefix("0x")
        .ok_or_else(|| PrimitiveError::InvalidHex(text.to_owned()))?;
    hex::decode(digits).map_err(|_| PrimitiveError::InvalidHex(text.to_owned()))
}

pub(crate) fn decode_fixed<const N: usize>(text: &str) -> Result<[u8; N], PrimitiveError> {
    let bytes = decode(text)?;
    <[u8; N]>::try_from(bytes.as_slice()).map_err(|_| PrimitiveError::InvalidLength {
        expected: N,
        got: bytes.len(),
    })
}

/// Serde adapter for `Vec<Vec<u8>>` fields stored as arrays of hex strings.
pub(crate) mod bytes_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(items: &[Vec<u8>], ser: S) -> Result<S::Ok, S::Error> {
        let encoded: Vec<String> = items.iter().map(|b| super::encode(b)).collect();
        encoded.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Vec<u8>>, D::Error> {
        let texts = Vec::<String>::deserialize(de)?;
        texts
            .iter()
            .map(|t| super::decode(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for optional byte blobs stored as base64.
pub(crate) mod opt_base64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, ser: S) -> Result<S::Ok, S::Error> {
        bytes.as_ref().map(|b| STANDARD.encode(b)).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(de)?
            .map(|t| STANDARD.decode(t).map_err(serde::de::Error::custom))
            .transpose()
    }
}
