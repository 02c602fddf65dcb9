//! Shuffle execution with real payloads and per-switch metering.
//!
//! Every transfer is one unit: a unicast `<key, value>` pair, or a coded
//! multicast however many receivers it has. A transfer is intra-rack when the
//! sender and all receivers share a rack (it only crosses a top-of-rack
//! switch); otherwise it is cross-rack and counted once at the root switch.

mod engine;
pub mod payload;
mod store;

use std::fmt;

pub use engine::{run_coded, run_coded_with, run_hybrid, run_hybrid_with, run_uncoded, run_uncoded_with, ShuffleOptions, ShuffleRun};
pub use payload::{decode, encode, CodedPacket, IntermediateValue, PayloadOracle};
pub use store::{synth_map_outputs, verify_delivery, DeliveredStore, DeliveryCheck, MapOutputs, Mismatch, MismatchKind};

use crate::assignment::{assign_coded, assign_hybrid, assign_uncoded, join_csv, JobParams, MapAssignment, Scheme};
use crate::error::Result;
use crate::topology::ClusterTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkClass {
    Intra,
    Cross,
}

impl fmt::Display for LinkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkClass::Intra => "intra",
            LinkClass::Cross => "cross",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageCost {
    pub name: &'static str,
    pub intra: u64,
    pub cross: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleCostReport {
    pub scheme: Scheme,
    pub intra: u64,
    pub cross: u64,
    pub stages: Vec<StageCost>,
}

impl ShuffleCostReport {
    fn new(scheme: Scheme, stages: &[&'static str]) -> Self {
        ShuffleCostReport {
            scheme,
            intra: 0,
            cross: 0,
            stages: stages.iter().map(|&name| StageCost { name, intra: 0, cross: 0 }).collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.intra + self.cross
    }

    pub fn stage(&self, name: &str) -> Option<&StageCost> {
        self.stages.iter().find(|s| s.name == name)
    }

    fn count(&mut self, stage: usize, class: LinkClass) {
        let s = &mut self.stages[stage];
        match class {
            LinkClass::Intra => {
                self.intra += 1;
                s.intra += 1;
            }
            LinkClass::Cross => {
                self.cross += 1;
                s.cross += 1;
            }
        }
    }
}

impl fmt::Display for ShuffleCostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: intra {} cross {}", self.scheme, self.intra, self.cross)?;
        for s in &self.stages {
            write!(f, " [{}: intra {} cross {}]", s.name, s.intra, s.cross)?;
        }
        Ok(())
    }
}

/// One transmission in trace order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub stage: &'static str,
    pub sender: usize,
    pub receivers: Vec<usize>,
    pub keys: Vec<usize>,
    pub subfiles: Vec<usize>,
    pub class: LinkClass,
}

impl fmt::Display for TraceRecord {
    /// `stage, sender, receivers, keys, subfiles, class`, tab-separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.stage,
            self.sender,
            join_csv(&self.receivers),
            join_csv(&self.keys),
            join_csv(&self.subfiles),
            self.class
        )
    }
}

pub mod stages {
    pub const UNICAST: &str = "unicast";
    pub const MULTICAST: &str = "multicast";
    pub const CROSS_RACK: &str = "cross-rack";
    pub const INTRA_RACK: &str = "intra-rack";
}

/// One scheme run end to end: assignment, synthetic Map outputs, shuffle.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub assignment: MapAssignment,
    pub outputs: MapOutputs,
    pub run: ShuffleRun,
}

impl Simulation {
    pub fn verify(&self) -> DeliveryCheck {
        verify_delivery(&self.run.delivered, &self.assignment, self.outputs.oracle())
    }
}

/// Builds the default assignment for `params.scheme` (identity permutation
/// for hybrid) and shuffles values of `width` bytes derived from `seed`.
pub fn simulate(topology: &ClusterTopology, params: &JobParams, width: usize, seed: u64) -> Result<Simulation> {
    params.check_shuffle(topology)?;
    let (assignment, run, outputs) = match params.scheme {
        Scheme::Uncoded => {
            let a = assign_uncoded(topology, params)?;
            let out = synth_map_outputs(&a, width, seed)?;
            let run = run_uncoded(topology, &a, &out)?;
            (a, run, out)
        }
        Scheme::Coded => {
            let a = assign_coded(topology, params)?;
            let out = synth_map_outputs(&a, width, seed)?;
            let run = run_coded(topology, &a, &out)?;
            (a, run, out)
        }
        Scheme::Hybrid => {
            let h = assign_hybrid(topology, params, None)?;
            let out = synth_map_outputs(h.as_map(), width, seed)?;
            let run = run_hybrid(topology, &h, &out)?;
            (h.as_map().clone(), run, out)
        }
    };
    Ok(Simulation { assignment, outputs, run })
}
