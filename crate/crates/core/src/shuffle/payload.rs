//! Intermediate values and the XOR code used for multicasts.
//!
//! A multicast combines `r` values of equal width `B` into one payload of
//! width `B`. Each receiver knows `r - 1` of the constituents from its own
//! Map outputs and recovers the last one by XOR-ing them out.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::topology::ServerRef;

/// Deterministic stand-in for a Map function: the value of `key` in
/// `subfile` is the first `width` bytes of
/// `SHA-256(seed ‖ key ‖ subfile ‖ block)` for `block = 0, 1, …`
/// (all integers little-endian `u64`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadOracle {
    seed: u64,
    width: usize,
}

impl PayloadOracle {
    pub fn new(seed: u64, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::param("payload width B must be positive"));
        }
        Ok(PayloadOracle { seed, width })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn value(&self, key: usize, subfile: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width);
        self.write_value(key, subfile, &mut out);
        out
    }

    pub(crate) fn write_value(&self, key: usize, subfile: usize, out: &mut Vec<u8>) {
        let mut block = 0u64;
        let target = out.len() + self.width;
        while out.len() < target {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update((key as u64).to_le_bytes());
            h.update((subfile as u64).to_le_bytes());
            h.update(block.to_le_bytes());
            let digest = h.finalize();
            let take = (target - out.len()).min(digest.len());
            out.extend_from_slice(&digest[..take]);
            block += 1;
        }
    }

    pub fn intermediate(&self, key: usize, subfile: usize) -> IntermediateValue {
        IntermediateValue { key, subfile, bytes: self.value(key, subfile) }
    }
}

/// One `<key, value>[subfile]` Map output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateValue {
    pub key: usize,
    pub subfile: usize,
    pub bytes: Vec<u8>,
}

/// A multicast: receiver `receivers[z]` wants key `keys[z]` of subfile
/// `subfiles[z]`; `payload` is the XOR of all those values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub sender: ServerRef,
    pub receivers: Vec<ServerRef>,
    pub keys: Vec<usize>,
    pub subfiles: Vec<usize>,
    pub payload: Vec<u8>,
}

/// Bytewise XOR of equal-width values.
pub fn encode<V: AsRef<[u8]>>(values: &[V]) -> Result<Vec<u8>> {
    let first = values
        .first()
        .ok_or_else(|| Error::param("encode needs at least one value"))?
        .as_ref();
    let mut acc = first.to_vec();
    for v in &values[1..] {
        xor_into(&mut acc, v.as_ref())?;
    }
    Ok(acc)
}

/// Recovers the one constituent of `packet` not among `known`.
pub fn decode<V: AsRef<[u8]>>(packet: &CodedPacket, known: &[V]) -> Result<Vec<u8>> {
    let mut acc = packet.payload.clone();
    for v in known {
        xor_into(&mut acc, v.as_ref())?;
    }
    Ok(acc)
}

pub(crate) fn xor_into(acc: &mut [u8], v: &[u8]) -> Result<()> {
    if acc.len() != v.len() {
        return Err(Error::WidthMismatch { expected: acc.len(), found: v.len() });
    }
    for (a, b) in acc.iter_mut().zip(v) {
        *a ^= b;
    }
    Ok(())
}
