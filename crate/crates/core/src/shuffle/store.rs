//! Map outputs held by each server and the values delivered to reducers.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;

use super::payload::PayloadOracle;
use crate::assignment::MapAssignment;
use crate::error::Result;

/// Every server's Map outputs: all `Q` keys for each subfile it maps.
#[derive(Debug, Clone)]
pub struct MapOutputs {
    oracle: PayloadOracle,
    keys: usize,
    // per server: subfile -> Q·B bytes, key-major
    per_server: Vec<BTreeMap<usize, Vec<u8>>>,
}

/// Runs the synthetic Map phase for `assignment`.
pub fn synth_map_outputs(assignment: &MapAssignment, width: usize, seed: u64) -> Result<MapOutputs> {
    let oracle = PayloadOracle::new(seed, width)?;
    let keys = assignment.keys();
    let per_server = (1..=assignment.topology().servers())
        .map(|flat| {
            assignment
                .subfiles_of(flat)
                .iter()
                .map(|&subfile| {
                    let mut bytes = Vec::with_capacity(keys * width);
                    for key in 1..=keys {
                        oracle.write_value(key, subfile, &mut bytes);
                    }
                    (subfile, bytes)
                })
                .collect()
        })
        .collect();
    Ok(MapOutputs { oracle, keys, per_server })
}

impl MapOutputs {
    pub fn oracle(&self) -> &PayloadOracle {
        &self.oracle
    }

    pub fn width(&self) -> usize {
        self.oracle.width()
    }

    /// Value of `key` in `subfile` as computed at server `flat`, if it maps the subfile.
    pub fn value(&self, flat: usize, key: usize, subfile: usize) -> Option<&[u8]> {
        let w = self.oracle.width();
        let bytes = self.per_server.get(flat - 1)?.get(&subfile)?;
        (1..=self.keys).contains(&key).then(|| &bytes[(key - 1) * w..key * w])
    }

    /// Number of stored values at server `flat`.
    pub fn count(&self, flat: usize) -> usize {
        self.per_server[flat - 1].len() * self.keys
    }
}

/// Dense `(key, subfile)` table over a contiguous key range and all `N` subfiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ValueTable {
    keys: RangeInclusive<usize>,
    subfiles: usize,
    width: usize,
    data: Vec<u8>,
    present: Vec<bool>,
}

impl ValueTable {
    pub(crate) fn new(keys: RangeInclusive<usize>, subfiles: usize, width: usize) -> Self {
        let cells = keys.clone().count() * subfiles;
        ValueTable { keys, subfiles, width, data: vec![0; cells * width], present: vec![false; cells] }
    }

    fn cell(&self, key: usize, subfile: usize) -> Option<usize> {
        if !self.keys.contains(&key) || subfile == 0 || subfile > self.subfiles {
            return None;
        }
        Some((key - self.keys.start()) * self.subfiles + subfile - 1)
    }

    pub(crate) fn get(&self, key: usize, subfile: usize) -> Option<&[u8]> {
        let c = self.cell(key, subfile)?;
        self.present[c].then(|| &self.data[c * self.width..(c + 1) * self.width])
    }

    /// Stores a value; returns false if `(key, subfile)` is outside the table.
    pub(crate) fn insert(&mut self, key: usize, subfile: usize, value: &[u8]) -> bool {
        let Some(c) = self.cell(key, subfile) else { return false };
        self.data[c * self.width..(c + 1) * self.width].copy_from_slice(value);
        self.present[c] = true;
        true
    }

    fn flip_bit(&mut self, key: usize, subfile: usize, bit: usize) -> bool {
        match self.cell(key, subfile) {
            Some(c) if self.present[c] && bit < self.width * 8 => {
                self.data[c * self.width + bit / 8] ^= 1 << (bit % 8);
                true
            }
            _ => false,
        }
    }
}

/// What each reducer ends up holding: its `Q/K` keys for every subfile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveredStore {
    tables: Vec<ValueTable>,
}

impl DeliveredStore {
    pub(crate) fn new(assignment: &MapAssignment, width: usize) -> Self {
        let tables = (1..=assignment.topology().servers())
            .map(|flat| ValueTable::new(assignment.reduce_keys(flat), assignment.subfiles(), width))
            .collect();
        DeliveredStore { tables }
    }

    pub fn get(&self, flat: usize, key: usize, subfile: usize) -> Option<&[u8]> {
        self.tables.get(flat.checked_sub(1)?)?.get(key, subfile)
    }

    pub(crate) fn insert(&mut self, flat: usize, key: usize, subfile: usize, value: &[u8]) -> bool {
        self.tables[flat - 1].insert(key, subfile, value)
    }

    /// Flips one bit of a delivered value (fault injection). Returns false
    /// if the value is not present.
    pub fn flip_bit(&mut self, flat: usize, key: usize, subfile: usize, bit: usize) -> bool {
        match self.tables.get_mut(flat.wrapping_sub(1)) {
            Some(t) => t.flip_bit(key, subfile, bit),
            None => false,
        }
    }

    /// Number of `(key, subfile)` values held by server `flat`.
    pub fn held(&self, flat: usize) -> usize {
        self.tables[flat - 1].present.iter().filter(|&&p| p).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MismatchKind {
    Missing,
    Corrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub server: usize,
    pub key: usize,
    pub subfile: usize,
    pub kind: MismatchKind,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            MismatchKind::Missing => "missing",
            MismatchKind::Corrupt => "corrupt",
        };
        write!(f, "server {} key {} subfile {}: {what}", self.server, self.key, self.subfile)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryCheck {
    pub ok: bool,
    /// Values compared before stopping.
    pub checked: usize,
    pub first_mismatch: Option<Mismatch>,
}

/// Checks that every server holds byte-correct values for every key it
/// reduces and every subfile.
pub fn verify_delivery(delivered: &DeliveredStore, assignment: &MapAssignment, oracle: &PayloadOracle) -> DeliveryCheck {
    let mut checked = 0;
    let mut expected = Vec::with_capacity(oracle.width());
    for flat in 1..=assignment.topology().servers() {
        for key in assignment.reduce_keys(flat) {
            for subfile in 1..=assignment.subfiles() {
                checked += 1;
                let kind = match delivered.get(flat, key, subfile) {
                    None => Some(MismatchKind::Missing),
                    Some(got) => {
                        expected.clear();
                        oracle.write_value(key, subfile, &mut expected);
                        (got != expected.as_slice()).then_some(MismatchKind::Corrupt)
                    }
                };
                if let Some(kind) = kind {
                    return DeliveryCheck {
                        ok: false,
                        checked,
                        first_mismatch: Some(Mismatch { server: flat, key, subfile, kind }),
                    };
                }
            }
        }
    }
    DeliveryCheck { ok: true, checked, first_mismatch: None }
}
