//! Replica placement and the data-locality measure.
//!
//! A subfile stored on `r_f` servers scores, for a server pair `(j, k)`,
//! `C(i,j,k) = λ·NodeLocality + (1−λ)·RackLocality` where both terms count
//! how many of the two servers (resp. their racks) hold a replica.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assignment::{join_csv, HybridAssignment, MapAssignment};
use crate::error::{Error, Result};
use crate::topology::ClusterTopology;

/// How replica servers are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementPolicy {
    /// Uniform over server sets, but replicas of a subfile span at least two
    /// racks whenever `r_f >= 2`.
    #[default]
    RackSpread,
    /// Uniform over all `r_f`-sets of distinct servers.
    Uniform,
}

impl PlacementPolicy {
    pub fn name(self) -> &'static str {
        match self {
            PlacementPolicy::RackSpread => "rack-spread",
            PlacementPolicy::Uniform => "uniform",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rack-spread" => Some(PlacementPolicy::RackSpread),
            "uniform" => Some(PlacementPolicy::Uniform),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaPlacement {
    topology: ClusterTopology,
    replicas: usize,
    // stores[i-1] sorted flat ids
    stores: Vec<Vec<usize>>,
    // on_server[i-1][flat-1], on_rack[i-1][rack-1]
    on_server: Vec<Vec<bool>>,
    on_rack: Vec<Vec<u8>>,
}

impl ReplicaPlacement {
    /// Builds a placement from explicit server sets (flat ids, 1-based).
    pub fn from_sets(topology: &ClusterTopology, sets: Vec<Vec<usize>>) -> Result<Self> {
        let replicas = sets.first().map_or(0, Vec::len);
        let mut stores = Vec::with_capacity(sets.len());
        for (i, set) in sets.into_iter().enumerate() {
            let sorted: BTreeSet<usize> = set.iter().copied().collect();
            if sorted.len() != set.len() {
                return Err(Error::param(format!("subfile {} has a repeated replica server", i + 1)));
            }
            if set.len() != replicas || replicas == 0 {
                return Err(Error::param(format!("subfile {} has {} replicas, expected {replicas}", i + 1, set.len())));
            }
            if let Some(&bad) = sorted.iter().find(|&&f| f == 0 || f > topology.servers()) {
                return Err(Error::Range { what: "flat index", value: bad, max: topology.servers() });
            }
            stores.push(sorted.into_iter().collect());
        }
        Ok(Self::build(*topology, replicas, stores))
    }

    fn build(topology: ClusterTopology, replicas: usize, stores: Vec<Vec<usize>>) -> Self {
        let mut on_server = vec![vec![false; topology.servers()]; stores.len()];
        let mut on_rack = vec![vec![0u8; topology.racks()]; stores.len()];
        for (i, set) in stores.iter().enumerate() {
            for &f in set {
                on_server[i][f - 1] = true;
                on_rack[i][topology.rack_of(f) - 1] = 1;
            }
        }
        ReplicaPlacement { topology, replicas, stores, on_server, on_rack }
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topology
    }

    pub fn subfiles(&self) -> usize {
        self.stores.len()
    }

    /// `r_f`.
    pub fn replicas(&self) -> usize {
        self.replicas
    }

    /// Sorted flat ids of the servers storing `subfile`.
    pub fn stores(&self, subfile: usize) -> &[usize] {
        &self.stores[subfile - 1]
    }

    pub fn stored_on(&self, subfile: usize, flat: usize) -> bool {
        self.on_server[subfile - 1][flat - 1]
    }

    pub fn stored_in_rack(&self, subfile: usize, rack: usize) -> bool {
        self.on_rack[subfile - 1][rack - 1] != 0
    }

    /// One `subfile<TAB>servers` line per subfile.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, set) in self.stores.iter().enumerate() {
            out.push_str(&format!("{}\t{}\n", i + 1, join_csv(set)));
        }
        out
    }

    pub fn from_text(topology: &ClusterTopology, text: &str) -> Result<Self> {
        let mut sets = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (id, servers) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("line {}: expected subfile<TAB>servers", n + 1)))?;
            let id: usize = id.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad subfile id", n + 1)))?;
            if id != sets.len() + 1 {
                return Err(Error::Parse(format!("line {}: subfile ids must be 1..N in order", n + 1)));
            }
            let set = servers
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad server id {s:?}", n + 1))))
                .collect::<Result<Vec<usize>>>()?;
            sets.push(set);
        }
        Self::from_sets(topology, sets)
    }
}

/// Seeded placement of `subfiles` subfiles with `replicas` replicas each,
/// using [`PlacementPolicy::RackSpread`].
pub fn place_replicas(topology: &ClusterTopology, subfiles: usize, replicas: usize, seed: u64) -> Result<ReplicaPlacement> {
    place_replicas_with(topology, subfiles, replicas, seed, PlacementPolicy::RackSpread)
}

pub fn place_replicas_with(
    topology: &ClusterTopology,
    subfiles: usize,
    replicas: usize,
    seed: u64,
    policy: PlacementPolicy,
) -> Result<ReplicaPlacement> {
    let k = topology.servers();
    if replicas == 0 || replicas > k {
        return Err(Error::param(format!("need 1 <= r_f <= K (r_f={replicas}, K={k})")));
    }
    let spread = policy == PlacementPolicy::RackSpread && replicas >= 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stores = Vec::with_capacity(subfiles);
    for _ in 0..subfiles {
        let set = loop {
            let mut set: Vec<usize> = sample(&mut rng, k, replicas).into_iter().map(|x| x + 1).collect();
            set.sort_unstable();
            // a uniform set lies in one rack with probability < 1/2, so this terminates quickly
            if !spread || set.iter().any(|&f| !topology.same_rack(topology.server_unchecked(f), topology.server_unchecked(set[0]))) {
                break set;
            }
        };
        stores.push(set);
    }
    Ok(ReplicaPlacement::build(*topology, replicas, stores))
}

/// `λ` of the locality measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalityWeights {
    lambda: f64,
}

impl LocalityWeights {
    pub const DEFAULT_LAMBDA: f64 = 0.75;

    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.5 && lambda <= 1.0) {
            return Err(Error::param(format!("λ must lie in (0.5, 1] (λ={lambda})")));
        }
        Ok(LocalityWeights { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Score of a single server for `subfile`: `λ·node + (1−λ)·rack`.
    pub fn server_score(&self, placement: &ReplicaPlacement, subfile: usize, flat: usize) -> f64 {
        let node = placement.stored_on(subfile, flat) as u8 as f64;
        let rack = placement.stored_in_rack(subfile, placement.topology().rack_of(flat)) as u8 as f64;
        self.lambda * node + (1.0 - self.lambda) * rack
    }
}

impl Default for LocalityWeights {
    fn default() -> Self {
        LocalityWeights { lambda: Self::DEFAULT_LAMBDA }
    }
}

impl fmt::Display for LocalityWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "λ={}", self.lambda)
    }
}

/// `C(i, j, k)`; zero when `j == k`.
pub fn locality_measure(placement: &ReplicaPlacement, weights: &LocalityWeights, subfile: usize, j: usize, k: usize) -> f64 {
    if j == k {
        return 0.0;
    }
    let topo = placement.topology();
    let node = [j, k].iter().filter(|&&s| placement.stored_on(subfile, s)).count();
    let rack = [j, k].iter().filter(|&&s| placement.stored_in_rack(subfile, topo.rack_of(s))).count();
    weights.lambda * node as f64 + (1.0 - weights.lambda) * rack as f64
}

/// Node and rack locality, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalityStats {
    pub node_pct: f64,
    pub rack_pct: f64,
}

/// Share of `(subfile, mapping server)` pairs where the server (resp. its
/// rack) stores the subfile.
pub fn locality_stats(assignment: &HybridAssignment, placement: &ReplicaPlacement) -> LocalityStats {
    map_locality_stats(assignment.as_map(), placement)
}

pub fn map_locality_stats(map: &MapAssignment, placement: &ReplicaPlacement) -> LocalityStats {
    let mut node = 0usize;
    let mut rack = 0usize;
    let mut total = 0usize;
    for i in 1..=map.subfiles() {
        for s in map.servers_of(i) {
            total += 1;
            node += placement.stored_on(i, s.flat) as usize;
            rack += placement.stored_in_rack(i, s.rack) as usize;
        }
    }
    let pct = |x: usize| if total == 0 { 0.0 } else { 100.0 * x as f64 / total as f64 };
    LocalityStats { node_pct: pct(node), rack_pct: pct(rack) }
}
