//! Stable hashes used for record ids, split fingerprints and RNG stream derivation.
//!
//! Everything here is xxh3, which is platform independent and fixed across
//! releases of the hash crate.

use xxhash_rust::xxh3::{xxh3_128, xxh3_64, Xxh3};

/// Lowercase hex of a 128-bit hash over length-prefixed fields.
pub fn hash_fields_128(fields: &[&[u8]]) -> String {
    let mut hasher = Xxh3::new();
    for field in fields {
        hasher.update(&(field.len() as u64).to_le_bytes());
        hasher.update(field);
    }
    format!("{:032x}", hasher.digest128())
}

pub fn record_id(dataset_id: &str, row_index: u64, raw_text: &str) -> String {
    hash_fields_128(&[
        dataset_id.as_bytes(),
        &row_index.to_le_bytes(),
        raw_text.as_bytes(),
    ])
}

/// Hash of the sorted ids, newline separated.
pub fn fingerprint<'a, I>(ids: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut sorted: Vec<&str> = ids.into_iter().collect();
    sorted.sort_unstable();
    let joined = sorted.join("\n");
    format!("{:032x}", xxh3_128(joined.as_bytes()))
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: &[u8]) -> u64 {
    let mut buf = Vec::with_capacity(8 + label.len());
    buf.extend_from_slice(&parent.to_le_bytes());
    buf.extend_from_slice(label);
    xxh3_64(&buf)
}
