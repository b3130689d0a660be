//! Named seed derivation.
//!
//! Every random stream in the pipeline is derived from one master seed and a
//! path of labels (stage, plan id, episode index). Derivation hashes the path
//! with SHA-256, so streams never depend on the order in which they are
//! created or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

/// One component of a derivation path.
#[derive(Debug, Clone, Copy)]
pub enum Part<'a> {
    Label(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for Part<'a> {
    fn from(s: &'a str) -> Self {
        Part::Label(s)
    }
}

impl From<u64> for Part<'_> {
    fn from(i: u64) -> Self {
        Part::Index(i)
    }
}

impl From<usize> for Part<'_> {
    fn from(i: usize) -> Self {
        Part::Index(i as u64)
    }
}

pub fn derive_seed(master: u64, path: &[Part<'_>]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"riskplan-seed-v1");
    h.update(master.to_le_bytes());
    for part in path {
        match part {
            Part::Label(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Part::Index(i) => {
                h.update([1u8]);
                h.update(i.to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

pub fn stream(master: u64, path: &[Part<'_>]) -> Stream {
    ChaCha8Rng::from_seed(derive_seed(master, path))
}
