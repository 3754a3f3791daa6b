use sha2::{Digest, Sha256};

/// Seed of the generator stream for one sample: the first eight bytes
/// (little-endian) of SHA-256 over the global seed and the sample id.
pub fn sample_seed(global: u64, sample_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(sample_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
