use std::collections::BTreeMap;

use super::payload::{decode, encode, CodedPacket};
use super::store::{DeliveredStore, MapOutputs, ValueTable};
use super::{stages, LinkClass, ShuffleCostReport, TraceRecord};
use crate::assignment::{flats, HybridAssignment, JobParams, MapAssignment, Scheme};
use crate::combinatorics::subsets;
use crate::error::{Error, Result};
use crate::topology::{ClusterTopology, ServerRef};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShuffleOptions {
    /// Record every transmission in [`ShuffleRun::trace`].
    pub trace: bool,
}

#[derive(Debug, Clone)]
pub struct ShuffleRun {
    pub delivered: DeliveredStore,
    pub report: ShuffleCostReport,
    /// Multicast packets sent (0 for purely unicast runs).
    pub packets: u64,
    pub trace: Vec<TraceRecord>,
}

struct Meter {
    report: ShuffleCostReport,
    trace: Option<Vec<TraceRecord>>,
}

impl Meter {
    fn new(scheme: Scheme, stages: &[&'static str], options: ShuffleOptions) -> Self {
        Meter { report: ShuffleCostReport::new(scheme, stages), trace: options.trace.then(Vec::new) }
    }

    fn record(&mut self, stage: usize, class: LinkClass, sender: usize, make: impl FnOnce() -> (Vec<usize>, Vec<usize>, Vec<usize>)) {
        self.report.count(stage, class);
        if let Some(trace) = &mut self.trace {
            let (receivers, keys, subfiles) = make();
            trace.push(TraceRecord { stage: self.report.stages[stage].name, sender, receivers, keys, subfiles, class });
        }
    }

    fn finish(self, delivered: DeliveredStore, packets: u64) -> ShuffleRun {
        ShuffleRun { delivered, report: self.report, packets, trace: self.trace.unwrap_or_default() }
    }
}

fn class_of(servers: impl IntoIterator<Item = ServerRef>) -> LinkClass {
    let mut it = servers.into_iter();
    let first = it.next().map(|s| s.rack);
    if it.all(|s| Some(s.rack) == first) {
        LinkClass::Intra
    } else {
        LinkClass::Cross
    }
}

fn check_inputs(topology: &ClusterTopology, assignment: &MapAssignment, outputs: &MapOutputs, scheme: Scheme) -> Result<JobParams> {
    if assignment.scheme() != scheme {
        return Err(Error::param(format!("{scheme} shuffle given a {} assignment", assignment.scheme())));
    }
    if assignment.topology() != topology {
        return Err(Error::param("assignment was built for a different topology"));
    }
    let params = JobParams {
        subfiles: assignment.subfiles(),
        keys: assignment.keys(),
        replication: assignment.replication(),
        scheme,
    };
    params.check_shuffle(topology)?;
    for flat in 1..=topology.servers() {
        if outputs.count(flat) != assignment.subfiles_of(flat).len() * assignment.keys() {
            return Err(Error::param(format!("Map outputs at server {flat} do not match the assignment")));
        }
    }
    Ok(params)
}

/// Copies each reducer's own keys from its local Map outputs; no transfer.
fn keep_local(assignment: &MapAssignment, outputs: &MapOutputs, delivered: &mut DeliveredStore) {
    for flat in 1..=assignment.topology().servers() {
        for &subfile in assignment.subfiles_of(flat) {
            for key in assignment.reduce_keys(flat) {
                let v = outputs.value(flat, key, subfile).expect("server maps subfile");
                delivered.insert(flat, key, subfile, v);
            }
        }
    }
}

fn missing_value(flat: usize, key: usize, subfile: usize) -> Error {
    Error::Shuffle(format!("server {flat} lacks key {key} of subfile {subfile}"))
}

pub fn run_uncoded(topology: &ClusterTopology, assignment: &MapAssignment, outputs: &MapOutputs) -> Result<ShuffleRun> {
    run_uncoded_with(topology, assignment, outputs, ShuffleOptions::default())
}

/// Every mapper unicasts each value to the server reducing its key.
pub fn run_uncoded_with(
    topology: &ClusterTopology,
    assignment: &MapAssignment,
    outputs: &MapOutputs,
    options: ShuffleOptions,
) -> Result<ShuffleRun> {
    check_inputs(topology, assignment, outputs, Scheme::Uncoded)?;
    let mut delivered = DeliveredStore::new(assignment, outputs.width());
    keep_local(assignment, outputs, &mut delivered);
    let mut meter = Meter::new(Scheme::Uncoded, &[stages::UNICAST], options);

    for sender in topology.all_servers() {
        for &subfile in assignment.subfiles_of(sender.flat) {
            for receiver in topology.all_servers().filter(|z| *z != sender) {
                let class = class_of([sender, receiver]);
                for key in assignment.reduce_keys(receiver.flat) {
                    let v = outputs.value(sender.flat, key, subfile).ok_or_else(|| missing_value(sender.flat, key, subfile))?;
                    delivered.insert(receiver.flat, key, subfile, v);
                    meter.record(0, class, sender.flat, || (vec![receiver.flat], vec![key], vec![subfile]));
                }
            }
        }
    }
    Ok(meter.finish(delivered, 0))
}

/// Subfiles of each `r`-subset of senders, split into `r` chunks: the sender
/// at sorted position `p` in the subset transmits chunk `p`.
struct SubsetChunks<K: Ord> {
    groups: BTreeMap<K, Vec<usize>>,
    chunk: usize,
}

impl<K: Ord> SubsetChunks<K> {
    fn subfile(&self, subset: &K, sender_pos: usize, w: usize) -> usize {
        self.groups[subset][sender_pos * self.chunk + w]
    }
}

/// Builds the multicast for one `(sender, w, u)` and decodes it at every receiver.
///
/// `wants[z] = (receiver, key, subfile)`; the sender must know every wanted
/// value, and receiver `z` must know every value wanted by the others.
fn multicast(
    outputs: &MapOutputs,
    sender: ServerRef,
    wants: &[(ServerRef, usize, usize)],
    mut deliver: impl FnMut(usize, usize, usize, &[u8]) -> Result<()>,
) -> Result<CodedPacket> {
    let values = wants
        .iter()
        .map(|&(_, key, subfile)| outputs.value(sender.flat, key, subfile).ok_or_else(|| missing_value(sender.flat, key, subfile)))
        .collect::<Result<Vec<_>>>()?;
    let packet = CodedPacket {
        sender,
        receivers: wants.iter().map(|w| w.0).collect(),
        keys: wants.iter().map(|w| w.1).collect(),
        subfiles: wants.iter().map(|w| w.2).collect(),
        payload: encode(&values)?,
    };
    for (z, &(receiver, key, subfile)) in wants.iter().enumerate() {
        let known = wants
            .iter()
            .enumerate()
            .filter(|(other, _)| *other != z)
            .map(|(_, &(_, k, f))| outputs.value(receiver.flat, k, f).ok_or_else(|| missing_value(receiver.flat, k, f)))
            .collect::<Result<Vec<_>>>()?;
        let value = decode(&packet, &known)?;
        deliver(receiver.flat, key, subfile, &value)?;
    }
    Ok(packet)
}

pub fn run_coded(topology: &ClusterTopology, assignment: &MapAssignment, outputs: &MapOutputs) -> Result<ShuffleRun> {
    run_coded_with(topology, assignment, outputs, ShuffleOptions::default())
}

/// For every `(r+1)`-subset `S` of servers, each member multicasts
/// `(Q/K)(J/r)` XOR packets to the other `r` members of `S`.
pub fn run_coded_with(
    topology: &ClusterTopology,
    assignment: &MapAssignment,
    outputs: &MapOutputs,
    options: ShuffleOptions,
) -> Result<ShuffleRun> {
    let params = check_inputs(topology, assignment, outputs, Scheme::Coded)?;
    let (k, r) = (topology.servers(), params.replication);
    let j = params.per_subset(topology);
    let groups = assignment.groups_by_server_set();
    if groups.len() != subsets(k, r).count() || groups.values().any(|g| g.len() != j) {
        return Err(Error::param("assignment does not give every r-subset of servers exactly J subfiles"));
    }
    let chunks = SubsetChunks { groups, chunk: j / r };
    let mut delivered = DeliveredStore::new(assignment, outputs.width());
    keep_local(assignment, outputs, &mut delivered);
    let mut meter = Meter::new(Scheme::Coded, &[stages::MULTICAST], options);
    let mut packets = 0u64;
    let per_server = assignment.keys_per_server();

    for group in subsets(k, r + 1) {
        let members: Vec<ServerRef> = group.iter().map(|&f| topology.server_unchecked(f)).collect();
        let class = class_of(members.iter().copied());
        for sender in &members {
            let receivers: Vec<ServerRef> = members.iter().copied().filter(|z| z != sender).collect();
            // T_z = S \ {z}, and the sender's position inside it
            let targets: Vec<(Vec<usize>, usize)> = receivers
                .iter()
                .map(|z| {
                    let t: Vec<usize> = group.iter().copied().filter(|&f| f != z.flat).collect();
                    let pos = t.iter().position(|&f| f == sender.flat).expect("sender in T_z");
                    (t, pos)
                })
                .collect();
            for w in 0..chunks.chunk {
                for u in 0..per_server {
                    let wants: Vec<(ServerRef, usize, usize)> = receivers
                        .iter()
                        .zip(&targets)
                        .map(|(z, (t, pos))| (*z, assignment.reduce_keys(z.flat).start() + u, chunks.subfile(t, *pos, w)))
                        .collect();
                    let packet = multicast(outputs, *sender, &wants, |flat, key, subfile, v| {
                        if delivered.insert(flat, key, subfile, v) {
                            Ok(())
                        } else {
                            Err(Error::Shuffle(format!("server {flat} received key {key} it does not reduce")))
                        }
                    })?;
                    packets += 1;
                    meter.record(0, class, sender.flat, || (flats(&packet.receivers), packet.keys, packet.subfiles));
                }
            }
        }
    }
    Ok(meter.finish(delivered, packets))
}

pub fn run_hybrid(topology: &ClusterTopology, assignment: &HybridAssignment, outputs: &MapOutputs) -> Result<ShuffleRun> {
    run_hybrid_with(topology, assignment, outputs, ShuffleOptions::default())
}

/// Two stages. Cross-rack: inside each layer, coded multicasts among the
/// layer's servers deliver to every server its rack's `Q/P` keys for all
/// subfiles of the layer. Intra-rack: each server unicasts to its rack-mates
/// their `Q/K` keys for the `NP/K` subfiles of its layer.
pub fn run_hybrid_with(
    topology: &ClusterTopology,
    assignment: &HybridAssignment,
    outputs: &MapOutputs,
    options: ShuffleOptions,
) -> Result<ShuffleRun> {
    let map = assignment.as_map();
    let params = check_inputs(topology, map, outputs, Scheme::Hybrid)?;
    let (p, r) = (topology.racks(), params.replication);
    let grouping = assignment.grouping();
    let m = assignment.per_subset();

    // (layer, rack subset) -> subfiles ordered by w
    let mut slots: BTreeMap<(usize, Vec<usize>), Vec<(usize, usize)>> = BTreeMap::new();
    let mut layer_subfiles = vec![Vec::new(); topology.layers()];
    for subfile in 1..=map.subfiles() {
        let label = assignment.label(subfile);
        let mut expected: Vec<ServerRef> = label.subset.iter().map(|&t| grouping.server(topology, label.layer, t)).collect();
        expected.sort();
        if expected.as_slice() != map.servers_of(subfile) {
            return Err(Error::param(format!("subfile {subfile} is not mapped where its label says")));
        }
        slots.entry((label.layer, label.subset.clone())).or_default().push((label.w, subfile));
        layer_subfiles[label.layer - 1].push(subfile);
    }
    if slots.values().any(|s| s.len() != m) {
        return Err(Error::param("hybrid slots do not each hold M subfiles"));
    }
    let chunks = SubsetChunks {
        groups: slots
            .into_iter()
            .map(|(key, mut subs)| {
                subs.sort();
                (key, subs.into_iter().map(|(_, f)| f).collect())
            })
            .collect(),
        chunk: m / r,
    };

    // each server's rack keys for every subfile, filled by the cross stage
    let mut rack_tables: Vec<ValueTable> = topology
        .all_servers()
        .map(|s| ValueTable::new(map.rack_keys(s.rack), map.subfiles(), outputs.width()))
        .collect();
    for s in topology.all_servers() {
        for &subfile in map.subfiles_of(s.flat) {
            for key in map.rack_keys(s.rack) {
                rack_tables[s.flat - 1].insert(key, subfile, outputs.value(s.flat, key, subfile).expect("server maps subfile"));
            }
        }
    }

    let mut meter = Meter::new(Scheme::Hybrid, &[stages::CROSS_RACK, stages::INTRA_RACK], options);
    let mut packets = 0u64;
    let rack_key_count = map.keys() / p;

    for layer in 1..=topology.layers() {
        for group in subsets(p, r + 1) {
            for &sender_rack in &group {
                let sender = grouping.server(topology, layer, sender_rack);
                let targets: Vec<(ServerRef, usize, (usize, Vec<usize>), usize)> = group
                    .iter()
                    .copied()
                    .filter(|&z| z != sender_rack)
                    .map(|z| {
                        let t: Vec<usize> = group.iter().copied().filter(|&x| x != z).collect();
                        let pos = t.iter().position(|&x| x == sender_rack).expect("sender rack in T_z");
                        (grouping.server(topology, layer, z), *map.rack_keys(z).start(), (layer, t), pos)
                    })
                    .collect();
                let class = class_of(std::iter::once(sender).chain(targets.iter().map(|t| t.0)));
                for w in 0..chunks.chunk {
                    for u in 0..rack_key_count {
                        let wants: Vec<(ServerRef, usize, usize)> = targets
                            .iter()
                            .map(|(z, first_key, slot, pos)| (*z, first_key + u, chunks.subfile(slot, *pos, w)))
                            .collect();
                        let packet = multicast(outputs, sender, &wants, |flat, key, subfile, v| {
                            if rack_tables[flat - 1].insert(key, subfile, v) {
                                Ok(())
                            } else {
                                Err(Error::Shuffle(format!("server {flat} received key {key} outside its rack")))
                            }
                        })?;
                        packets += 1;
                        meter.record(0, class, sender.flat, || (flats(&packet.receivers), packet.keys, packet.subfiles));
                    }
                }
            }
        }
    }

    let mut delivered = DeliveredStore::new(map, outputs.width());
    for sender in topology.all_servers() {
        let table = &rack_tables[sender.flat - 1];
        let layer = grouping.layer_of(sender);
        let mates = topology.rack_members(sender.rack)?;
        for &subfile in &layer_subfiles[layer - 1] {
            for key in map.reduce_keys(sender.flat) {
                let v = table.get(key, subfile).ok_or_else(|| missing_value(sender.flat, key, subfile))?;
                delivered.insert(sender.flat, key, subfile, v);
            }
            for receiver in mates.iter().filter(|z| **z != sender) {
                for key in map.reduce_keys(receiver.flat) {
                    let v = table.get(key, subfile).ok_or_else(|| missing_value(sender.flat, key, subfile))?;
                    delivered.insert(receiver.flat, key, subfile, v);
                    meter.record(1, LinkClass::Intra, sender.flat, || (vec![receiver.flat], vec![key], vec![subfile]));
                }
            }
        }
    }
    Ok(meter.finish(delivered, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{assign_coded, assign_hybrid, assign_uncoded};
    use crate::shuffle::{synth_map_outputs, verify_delivery};

    fn topo(k: usize, p: usize) -> ClusterTopology {
        ClusterTopology::new(k, p).unwrap()
    }

    #[test]
    fn uncoded_table_one_rows() {
        for (k, p, q, n, cross, intra) in [(9, 3, 18, 72, 864, 288), (16, 4, 16, 240, 2880, 720)] {
            let t = topo(k, p);
            let a = assign_uncoded(&t, &JobParams::uncoded(n, q)).unwrap();
            let out = synth_map_outputs(&a, 1, 5).unwrap();
            let run = run_uncoded(&t, &a, &out).unwrap();
            assert_eq!((run.report.cross, run.report.intra), (cross, intra));
            assert!(verify_delivery(&run.delivered, &a, out.oracle()).ok);
        }
    }

    #[test]
    fn uncoded_one_server_per_rack_has_no_intra() {
        let t = topo(4, 4);
        let a = assign_uncoded(&t, &JobParams::uncoded(8, 4)).unwrap();
        let out = synth_map_outputs(&a, 2, 0).unwrap();
        let run = run_uncoded(&t, &a, &out).unwrap();
        assert_eq!(run.report.intra, 0);
        assert!(verify_delivery(&run.delivered, &a, out.oracle()).ok);
    }

    #[test]
    fn coded_table_one_rows() {
        for (k, p, q, n, cross, intra) in [(9, 3, 18, 72, 486, 18), (16, 4, 16, 240, 1632, 48)] {
            let t = topo(k, p);
            let a = assign_coded(&t, &JobParams::coded(n, q, 2)).unwrap();
            let out = synth_map_outputs(&a, 8, 5).unwrap();
            let run = run_coded(&t, &a, &out).unwrap();
            assert_eq!((run.report.cross, run.report.intra), (cross, intra));
            assert!(verify_delivery(&run.delivered, &a, out.oracle()).ok);
        }
    }

    #[test]
    fn hybrid_table_one_rows() {
        for (k, p, q, n, cross, intra) in [(9, 3, 18, 72, 216, 864), (16, 4, 16, 240, 960, 2880)] {
            let t = topo(k, p);
            let a = assign_hybrid(&t, &JobParams::hybrid(n, q, 2), None).unwrap();
            let out = synth_map_outputs(a.as_map(), 8, 5).unwrap();
            let run = run_hybrid(&t, &a, &out).unwrap();
            assert_eq!((run.report.cross, run.report.intra), (cross, intra));
            assert_eq!(run.report.stage(stages::CROSS_RACK).unwrap().intra, 0);
            assert_eq!(run.report.stage(stages::INTRA_RACK).unwrap().cross, 0);
            assert!(verify_delivery(&run.delivered, a.as_map(), out.oracle()).ok);
        }
    }

    #[test]
    fn hybrid_full_replication_has_no_cross_traffic() {
        let t = topo(6, 3);
        let a = assign_hybrid(&t, &JobParams::hybrid(6, 6, 3), None).unwrap();
        let out = synth_map_outputs(a.as_map(), 4, 1).unwrap();
        let run = run_hybrid(&t, &a, &out).unwrap();
        assert_eq!(run.report.cross, 0);
        assert!(verify_delivery(&run.delivered, a.as_map(), out.oracle()).ok);
    }

    #[test]
    fn scheme_mismatch_is_rejected() {
        let t = topo(4, 2);
        let a = assign_uncoded(&t, &JobParams::uncoded(4, 4)).unwrap();
        let out = synth_map_outputs(&a, 1, 0).unwrap();
        assert!(run_coded(&t, &a, &out).is_err());
    }

    #[test]
    fn coded_rejects_odd_split() {
        // K=4, r=2: C(4,2)=6, N=6 gives J=1, not divisible by r
        let t = topo(4, 2);
        let a = assign_coded(&t, &JobParams::coded(6, 4, 2)).unwrap();
        let out = synth_map_outputs(&a, 1, 0).unwrap();
        let err = run_coded(&t, &a, &out).unwrap_err();
        assert!(err.to_string().contains("r ∤ J"), "{err}");
    }

    #[test]
    fn trace_lines_follow_format() {
        let t = topo(4, 2);
        let a = assign_hybrid(&t, &JobParams::hybrid(4, 4, 2), None).unwrap();
        let out = synth_map_outputs(a.as_map(), 1, 0).unwrap();
        let run = run_hybrid_with(&t, &a, &out, ShuffleOptions { trace: true }).unwrap();
        assert_eq!(run.trace.len() as u64, run.report.total());
        let first = run.trace[0].to_string();
        assert_eq!(first.split('\t').count(), 6);
        assert!(first.starts_with("intra-rack\t"), "{first}");
    }
}
