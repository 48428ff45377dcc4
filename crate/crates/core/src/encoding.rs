//! Canonical byte encoding for everything that gets hashed or signed.
//!
//! The rules are deliberately tiny and documented byte-exactly in
//! `docs/encoding.md`: integers are 64-bit little-endian, variable-length
//! fields carry a `u64` length prefix, and composite payloads concatenate
//! their fields in declared order. Two encoders that disagree on a single
//! byte will fail chain verification, so nothing here may change silently.

use num_bigint::BigUint;

/// Appends a `u64` as 8 little-endian bytes.
pub fn put_u64(buf: &mut Vec<u8>, value: u64) {
    buf.extend_from_slice(&value.to_le_bytes());
}

/// Appends a length-prefixed byte string.
pub fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    put_u64(buf, bytes.len() as u64);
    buf.extend_from_slice(bytes);
}

/// Appends a length-prefixed UTF-8 string.
pub fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_bytes(buf, s.as_bytes());
}

/// Appends an `f64` as its 8-byte little-endian IEEE-754 representation.
pub fn put_f64(buf: &mut Vec<u8>, value: f64) {
    buf.extend_from_slice(&value.to_le_bytes());
}

/// Appends a big unsigned integer as length-prefixed minimal big-endian bytes.
pub fn put_uint(buf: &mut Vec<u8>, value: &BigUint) {
    put_bytes(buf, &value.to_bytes_be());
}

/// Appends a list of `u64` values with a count prefix.
pub fn put_u64_list(buf: &mut Vec<u8>, values: impl IntoIterator<Item = u64>) {
    let values: Vec<u64> = values.into_iter().collect();
    put_u64(buf, values.len() as u64);
    for v in values {
        put_u64(buf, v);
    }
}

/// Serializes a flat parameter vector: count prefix, then each value as
/// little-endian `f64`. This is the wire format for model payloads in the
/// content store.
pub fn encode_f64_vec(values: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + values.len() * 8);
    put_u64(&mut buf, values.len() as u64);
    for v in values {
        put_f64(&mut buf, *v);
    }
    buf
}

/// Inverse of [`encode_f64_vec`]. Returns `None` on any length mismatch.
pub fn decode_f64_vec(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() < 8 {
        return None;
    }
    let count = u64::from_le_bytes(bytes[..8].try_into().ok()?) as usize;
    let body = &bytes[8..];
    if body.len() != count.checked_mul(8)? {
        return None;
    }
    Some(
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn u64_is_little_endian() {
        let mut buf = Vec::new();
        put_u64(&mut buf, 0x0102_0304_0506_0708);
        assert_eq!(buf, [8, 7, 6, 5, 4, 3, 2, 1]);
    }

    #[test]
    fn bytes_carry_length_prefix() {
        let mut buf = Vec::new();
        put_bytes(&mut buf, b"ab");
        assert_eq!(buf, [2, 0, 0, 0, 0, 0, 0, 0, b'a', b'b']);
    }

    #[test]
    fn uint_uses_minimal_big_endian() {
        let mut buf = Vec::new();
        put_uint(&mut buf, &BigUint::from(0x01_02u32));
        assert_eq!(buf, [2, 0, 0, 0, 0, 0, 0, 0, 1, 2]);
    }

    #[test]
    fn decode_rejects_truncated_input() {
        let encoded = encode_f64_vec(&[1.0, 2.0]);
        assert!(decode_f64_vec(&encoded[..encoded.len() - 1]).is_none());
        assert!(decode_f64_vec(&[1, 2, 3]).is_none());
    }

    proptest! {
        #[test]
        fn f64_vec_round_trips(values in proptest::collection::vec(-1e12f64..1e12, 0..64)) {
            let decoded = decode_f64_vec(&encode_f64_vec(&values)).unwrap();
            prop_assert_eq!(values, decoded);
        }
    }
}
