//! Random baseline, structured search and brute-force oracle.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::transport::Transport;
use crate::assignment::{assign_hybrid_grouped, HybridAssignment, JobParams, LayerGrouping, Scheme};
use crate::combinatorics::subsets;
use crate::error::{Error, Result};
use crate::placement::{locality_measure, locality_stats, LocalityStats, LocalityWeights, ReplicaPlacement};
use crate::topology::ClusterTopology;

/// Largest candidate count the oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    BruteForce,
    Structured,
    Random,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BruteForce => "brute-force",
            Method::Structured => "structured",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Search effort of the structured solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Local search from this many starting groupings.
    Restarts(usize),
    /// Every layer grouping, each with the exact inner assignment.
    Exhaustive,
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Restarts(50)
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Restarts(n) => write!(f, "{n}"),
            Budget::Exhaustive => f.write_str("exhaustive"),
        }
    }
}

impl std::str::FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exhaustive" {
            return Ok(Budget::Exhaustive);
        }
        let n: i64 = s.trim().parse().map_err(|_| Error::Parse(format!("bad budget {s:?}")))?;
        if n <= 0 {
            return Err(Error::param(format!("budget must be positive (budget={n})")));
        }
        Ok(Budget::Restarts(n as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub assignment: HybridAssignment,
    /// Ordered-pair objective `Σ X·C`.
    pub objective: f64,
    pub feasible: bool,
    pub method: Method,
    pub seed: Option<u64>,
    /// Inner assignments solved (structured) or candidates scored (oracle).
    pub evaluations: u64,
    pub stats: LocalityStats,
}

impl SolverResult {
    /// `objective=<v> method=<name> seed=<n> node_pct=<p> rack_pct=<p>`.
    pub fn summary(&self) -> String {
        format!(
            "objective={} method={} seed={} node_pct={:.2} rack_pct={:.2}",
            self.objective,
            self.method,
            self.seed.map_or_else(|| "-".to_string(), |s| s.to_string()),
            self.stats.node_pct,
            self.stats.rack_pct
        )
    }
}

/// An `r = 2` hybrid job together with a replica placement and `λ`.
#[derive(Debug, Clone)]
pub struct LocalityProblem<'a> {
    topology: ClusterTopology,
    params: JobParams,
    placement: &'a ReplicaPlacement,
    weights: LocalityWeights,
    // score[i * K + (flat-1)]: λ·node + (1−λ)·rack of one server
    score: Vec<f64>,
    // (rack a, rack b) pairs of each bin within a layer, lexicographic
    pairs: Vec<(usize, usize)>,
}

impl<'a> LocalityProblem<'a> {
    pub fn new(
        topology: &ClusterTopology,
        params: &JobParams,
        placement: &'a ReplicaPlacement,
        weights: &LocalityWeights,
    ) -> Result<Self> {
        check_params(topology, params)?;
        if placement.subfiles() != params.subfiles || placement.topology() != topology {
            return Err(Error::param(format!(
                "placement covers {} subfiles on K={}, job has N={} on K={}",
                placement.subfiles(),
                placement.topology().servers(),
                params.subfiles,
                topology.servers()
            )));
        }
        let k = topology.servers();
        let mut score = Vec::with_capacity(params.subfiles * k);
        for i in 1..=params.subfiles {
            for flat in 1..=k {
                score.push(weights.server_score(placement, i, flat));
            }
        }
        let pairs = subsets(topology.racks(), 2).map(|s| (s[0], s[1])).collect();
        Ok(LocalityProblem { topology: *topology, params: *params, placement, weights: *weights, score, pairs })
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topology
    }

    pub fn params(&self) -> &JobParams {
        &self.params
    }

    fn bins(&self) -> usize {
        self.topology.layers() * self.pairs.len()
    }

    fn capacity(&self) -> usize {
        self.params.per_subset(&self.topology)
    }

    /// Per-(subfile, bin) weight `2·C(i, j, k)` under `grouping`.
    fn weights_for(&self, grouping: &LayerGrouping) -> Vec<f64> {
        let k = self.topology.servers();
        let servers: Vec<(usize, usize)> = (1..=self.topology.layers())
            .flat_map(|layer| {
                self.pairs.iter().map(move |&(a, b)| {
                    (grouping.server(&self.topology, layer, a).flat, grouping.server(&self.topology, layer, b).flat)
                })
            })
            .collect();
        let mut w = Vec::with_capacity(self.params.subfiles * servers.len());
        for i in 0..self.params.subfiles {
            let row = &self.score[i * k..(i + 1) * k];
            w.extend(servers.iter().map(|&(j, l)| 2.0 * (row[j - 1] + row[l - 1])));
        }
        w
    }

    /// Hybrid assignment putting subfiles of bin `b` (ascending) at the
    /// structural positions of bin `b`.
    fn assignment_from_bins(&self, grouping: &LayerGrouping, bin_of: &[usize]) -> HybridAssignment {
        let mut by_bin = vec![Vec::new(); self.bins()];
        for (i, &b) in bin_of.iter().enumerate() {
            by_bin[b].push(i + 1);
        }
        let perm: Vec<usize> = by_bin.into_iter().flatten().collect();
        assign_hybrid_grouped(&self.topology, &self.params, Some(&perm), grouping)
            .expect("bins of equal capacity form a valid permutation")
    }

    /// Best assignment with the layers fixed to `grouping`.
    pub fn solve_grouping(&self, grouping: &LayerGrouping) -> HybridAssignment {
        let mut t = Transport::new(self.params.subfiles, self.bins(), self.capacity(), self.weights_for(grouping));
        t.optimize();
        self.assignment_from_bins(grouping, t.bin_of())
    }

    /// Ordered-pair objective of an assignment, computed from `C` directly.
    pub fn objective_of(&self, assignment: &HybridAssignment) -> f64 {
        let map = assignment.as_map();
        (1..=map.subfiles())
            .map(|i| {
                let s = map.servers_of(i);
                locality_measure(self.placement, &self.weights, i, s[0].flat, s[1].flat)
                    + locality_measure(self.placement, &self.weights, i, s[1].flat, s[0].flat)
            })
            .sum()
    }

    fn result(&self, assignment: HybridAssignment, method: Method, seed: Option<u64>, evaluations: u64) -> SolverResult {
        let feasible = super::is_feasible(&assignment);
        SolverResult {
            objective: self.objective_of(&assignment),
            stats: locality_stats(&assignment, self.placement),
            assignment,
            feasible,
            method,
            seed,
            evaluations,
        }
    }
}

fn check_params(topology: &ClusterTopology, params: &JobParams) -> Result<()> {
    if params.scheme != Scheme::Hybrid {
        return Err(Error::param(format!("locality optimization needs hybrid parameters, got {}", params.scheme)));
    }
    if params.replication != 2 {
        return Err(Error::Unsupported(format!(
            "locality optimization is defined for r = 2 only (r={})",
            params.replication
        )));
    }
    params.check_map(topology)
}

/// Uniformly random grouping, rack by rack, then a uniformly random
/// permutation, both from `seed`.
fn random_layout(topology: &ClusterTopology, subfiles: usize, seed: u64) -> (LayerGrouping, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grouping = random_grouping(topology, &mut rng);
    let mut perm: Vec<usize> = (1..=subfiles).collect();
    perm.shuffle(&mut rng);
    (grouping, perm)
}

fn random_grouping(topology: &ClusterTopology, rng: &mut ChaCha8Rng) -> LayerGrouping {
    let slots = (0..topology.racks())
        .map(|_| {
            let mut row: Vec<usize> = (1..=topology.layers()).collect();
            row.shuffle(rng);
            row
        })
        .collect();
    LayerGrouping::from_slots(topology, slots).expect("shuffled rows are permutations")
}

/// The seeded random assignment used as the baseline.
pub fn random_assignment(topology: &ClusterTopology, params: &JobParams, seed: u64) -> Result<HybridAssignment> {
    check_params(topology, params)?;
    let (grouping, perm) = random_layout(topology, params.subfiles, seed);
    assign_hybrid_grouped(topology, params, Some(&perm), &grouping)
}

/// Random assignment scored against `placement`.
pub fn solve_random(
    topology: &ClusterTopology,
    params: &JobParams,
    placement: &ReplicaPlacement,
    weights: &LocalityWeights,
    seed: u64,
) -> Result<SolverResult> {
    let problem = LocalityProblem::new(topology, params, placement, weights)?;
    let assignment = random_assignment(topology, params, seed)?;
    Ok(problem.result(assignment, Method::Random, Some(seed), 0))
}

/// Relabels layers so that rack 1 has slot `l` in layer `l`.
fn canonical(topology: &ClusterTopology, grouping: &LayerGrouping) -> LayerGrouping {
    let kr = topology.layers();
    let order: Vec<usize> = (1..=kr)
        .map(|slot| grouping.layer_of(topology.server_unchecked(slot)))
        .collect();
    let slots = grouping
        .slots()
        .iter()
        .map(|row| order.iter().map(|&layer| row[layer - 1]).collect())
        .collect();
    LayerGrouping::from_slots(topology, slots).expect("relabeling keeps rows permutations")
}

/// Maps bins of `from` to the bins of the same servers under `to`, where
/// `to` is a relabeling of `from`'s layers.
fn relabel_bins(topology: &ClusterTopology, from: &LayerGrouping, to: &LayerGrouping, pairs: usize, bin_of: &mut [usize]) {
    let new_layer: Vec<usize> = (1..=topology.layers())
        .map(|layer| to.layer_of(from.server(topology, layer, 1)))
        .collect();
    for b in bin_of.iter_mut() {
        let (layer, pair) = (*b / pairs, *b % pairs);
        *b = (new_layer[layer] - 1) * pairs + pair;
    }
}

struct Search<'p, 'a> {
    problem: &'p LocalityProblem<'a>,
    evaluations: u64,
}

impl Search<'_, '_> {
    fn solve(&mut self, grouping: &LayerGrouping, warm: &mut Option<Transport>) -> f64 {
        let w = self.problem.weights_for(grouping);
        let t = match warm {
            Some(t) => {
                t.reweight(w);
                t
            }
            None => warm.insert(Transport::new(
                self.problem.params.subfiles,
                self.problem.bins(),
                self.problem.capacity(),
                w,
            )),
        };
        t.optimize();
        self.evaluations += 1;
        t.value()
    }

    /// Steepest ascent over single same-rack swaps.
    fn climb(&mut self, mut grouping: LayerGrouping, state: &mut Option<Transport>) -> (LayerGrouping, f64) {
        let topo = self.problem.topology;
        let mut value = self.solve(&grouping, state);
        loop {
            let mut best: Option<(f64, LayerGrouping, Transport)> = None;
            for rack in 1..=topo.racks() {
                for a in 1..=topo.layers() {
                    for b in a + 1..=topo.layers() {
                        let mut cand = grouping.clone();
                        cand.swap(rack, a, b);
                        let mut t = state.clone();
                        let v = self.solve(&cand, &mut t);
                        if v <= value + 1e-9 {
                            continue;
                        }
                        let better = match &best {
                            None => true,
                            Some((bv, bg, _)) => {
                                v > bv + 1e-9 || (v > bv - 1e-9 && canonical(&topo, &cand) < canonical(&topo, bg))
                            }
                        };
                        if better {
                            best = Some((v, cand, t.expect("solved")));
                        }
                    }
                }
            }
            match best {
                Some((v, g, t)) => {
                    value = v;
                    grouping = g;
                    *state = Some(t);
                }
                None => return (grouping, value),
            }
        }
    }
}

/// Local search over layer groupings with an exact inner assignment.
///
/// The first start is the grouping [`solve_random`] uses for `seed`, so the
/// result is never worse than that baseline.
pub fn solve_structured(
    topology: &ClusterTopology,
    params: &JobParams,
    placement: &ReplicaPlacement,
    weights: &LocalityWeights,
    budget: Budget,
    seed: u64,
) -> Result<SolverResult> {
    let problem = LocalityProblem::new(topology, params, placement, weights)?;
    let mut search = Search { problem: &problem, evaluations: 0 };
    let mut best: Option<(f64, LayerGrouping, Vec<usize>)> = None;
    let mut consider = |value: f64, grouping: &LayerGrouping, bin_of: &[usize]| {
        let canon = canonical(topology, grouping);
        let better = match &best {
            None => true,
            Some((bv, bg, _)) => value > bv + 1e-9 || (value > bv - 1e-9 && canon < *bg),
        };
        if better {
            let mut bins = bin_of.to_vec();
            relabel_bins(topology, grouping, &canon, problem.pairs.len(), &mut bins);
            best = Some((value, canon, bins));
        }
    };
    match budget {
        Budget::Restarts(0) => return Err(Error::param("budget must be positive (budget=0)")),
        Budget::Restarts(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_1a7e_c0de);
            for restart in 0..n {
                let start = if restart == 0 {
                    random_layout(topology, params.subfiles, seed).0
                } else {
                    random_grouping(topology, &mut rng)
                };
                let mut state = None;
                let (g, v) = search.climb(start, &mut state);
                consider(v, &g, state.expect("solved").bin_of());
            }
        }
        Budget::Exhaustive => {
            let mut state = None;
            for g in all_groupings(topology) {
                let v = search.solve(&g, &mut state);
                consider(v, &g, state.as_ref().expect("solved").bin_of());
            }
        }
    }
    let (_, grouping, bin_of) = best.expect("at least one grouping is evaluated");
    let assignment = problem.assignment_from_bins(&grouping, &bin_of);
    let evaluations = search.evaluations;
    Ok(problem.result(assignment, Method::Structured, Some(seed), evaluations))
}

/// Every grouping with rack 1 in canonical order, lexicographically.
pub fn all_groupings(topology: &ClusterTopology) -> Vec<LayerGrouping> {
    let kr = topology.layers();
    let perms = permutations(kr);
    let mut out = Vec::new();
    let mut idx = vec![0usize; topology.racks() - 1];
    loop {
        let mut slots = vec![(1..=kr).collect::<Vec<_>>()];
        slots.extend(idx.iter().map(|&i| perms[i].clone()));
        out.push(LayerGrouping::from_slots(topology, slots).expect("permutation rows"));
        // odometer, last rack fastest
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < perms.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Permutations of `1..=n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (1..=n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot has a successor");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

/// Number of candidates the oracle would enumerate:
/// `(K_r!)^(P−1) · N! / (M!)^bins`.
pub fn oracle_candidates(topology: &ClusterTopology, params: &JobParams) -> Result<f64> {
    check_params(topology, params)?;
    let ln_fact = |n: usize| (2..=n).map(|x| (x as f64).ln()).sum::<f64>();
    let bins = topology.layers() * topology.racks() * (topology.racks() - 1) / 2;
    let m = params.per_subset(topology);
    let ln = (topology.racks() - 1) as f64 * ln_fact(topology.layers()) + ln_fact(params.subfiles)
        - bins as f64 * ln_fact(m);
    Ok(ln.exp())
}

/// Exhaustive optimum: every grouping (rack 1 canonical) times every split
/// of subfiles into the `(layer, rack pair)` bins.
pub fn brute_force_oracle(
    topology: &ClusterTopology,
    params: &JobParams,
    placement: &ReplicaPlacement,
    weights: &LocalityWeights,
) -> Result<SolverResult> {
    let estimate = oracle_candidates(topology, params)?;
    if estimate > ORACLE_LIMIT {
        return Err(Error::TooLarge { estimate, limit: ORACLE_LIMIT });
    }
    let problem = LocalityProblem::new(topology, params, placement, weights)?;
    let n = params.subfiles;
    let m = params.per_subset(topology);
    let pairs: Vec<Vec<usize>> = subsets(topology.racks(), 2).collect();

    struct Best {
        value: f64,
        grouping: Option<LayerGrouping>,
        bin_of: Vec<usize>,
        count: u64,
    }
    fn split(i: usize, n: usize, c: &[Vec<f64>], room: &mut [usize], cur: &mut Vec<usize>, acc: f64, best: &mut Best, g: &LayerGrouping) {
        if i == n {
            best.count += 1;
            if acc > best.value + 1e-9 {
                best.value = acc;
                best.grouping = Some(g.clone());
                best.bin_of = cur.clone();
            }
            return;
        }
        for b in 0..room.len() {
            if room[b] > 0 {
                room[b] -= 1;
                cur.push(b);
                split(i + 1, n, c, room, cur, acc + c[i][b], best, g);
                cur.pop();
                room[b] += 1;
            }
        }
    }

    let mut best = Best { value: f64::NEG_INFINITY, grouping: None, bin_of: Vec::new(), count: 0 };
    for g in all_groupings(topology) {
        // c[i][bin] = C(i,j,k) + C(i,k,j) for the bin's two servers
        let bins: Vec<(usize, usize)> = (1..=topology.layers())
            .flat_map(|layer| {
                pairs
                    .iter()
                    .map(|p| (g.server(topology, layer, p[0]).flat, g.server(topology, layer, p[1]).flat))
                    .collect::<Vec<_>>()
            })
            .collect();
        let c: Vec<Vec<f64>> = (1..=n)
            .map(|i| {
                bins.iter()
                    .map(|&(j, k)| locality_measure(placement, weights, i, j, k) + locality_measure(placement, weights, i, k, j))
                    .collect()
            })
            .collect();
        split(0, n, &c, &mut vec![m; bins.len()], &mut Vec::with_capacity(n), 0.0, &mut best, &g);
    }
    let grouping = best.grouping.expect("at least one candidate");
    let assignment = problem.assignment_from_bins(&grouping, &best.bin_of);
    Ok(problem.result(assignment, Method::BruteForce, None, best.count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::place_replicas;

    fn topo(k: usize, p: usize) -> ClusterTopology {
        ClusterTopology::new(k, p).unwrap()
    }

    #[test]
    fn permutations_are_lexicographic() {
        assert_eq!(permutations(3), vec![vec![1, 2, 3], vec![1, 3, 2], vec![2, 1, 3], vec![2, 3, 1], vec![3, 1, 2], vec![3, 2, 1]]);
        assert_eq!(permutations(1), vec![vec![1]]);
    }

    #[test]
    fn grouping_enumeration_counts() {
        assert_eq!(all_groupings(&topo(4, 2)).len(), 2);
        assert_eq!(all_groupings(&topo(6, 3)).len(), 4);
        assert_eq!(all_groupings(&topo(9, 3)).len(), 36);
        assert_eq!(all_groupings(&topo(4, 4)).len(), 1);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let t = topo(9, 3);
        let p = JobParams::hybrid(144, 9, 2);
        let pl = place_replicas(&t, 144, 2, 1).unwrap();
        let err = brute_force_oracle(&t, &p, &pl, &LocalityWeights::default()).unwrap_err();
        assert!(matches!(err, Error::TooLarge { estimate, .. } if estimate > ORACLE_LIMIT));
        assert_eq!(oracle_candidates(&topo(4, 2), &JobParams::hybrid(4, 4, 2)).unwrap().round(), 12.0);
    }

    #[test]
    fn structured_matches_oracle_on_tiny_instance() {
        let t = topo(4, 2);
        let p = JobParams::hybrid(4, 4, 2);
        for seed in 0..5 {
            let pl = place_replicas(&t, 4, 2, seed).unwrap();
            let w = LocalityWeights::default();
            let o = brute_force_oracle(&t, &p, &pl, &w).unwrap();
            assert_eq!(o.evaluations, 12);
            let s = solve_structured(&t, &p, &pl, &w, Budget::Exhaustive, seed).unwrap();
            assert_eq!(s.objective, o.objective);
            let s = solve_structured(&t, &p, &pl, &w, Budget::Restarts(3), seed).unwrap();
            assert_eq!(s.objective, o.objective);
            assert!(s.feasible && o.feasible);
        }
    }

    #[test]
    fn structured_dominates_random() {
        let t = topo(9, 3);
        let p = JobParams::hybrid(72, 9, 2);
        let w = LocalityWeights::new(0.9).unwrap();
        for seed in 0..5 {
            let pl = place_replicas(&t, 72, 2, 100 + seed).unwrap();
            let r = solve_random(&t, &p, &pl, &w, seed).unwrap();
            let s = solve_structured(&t, &p, &pl, &w, Budget::Restarts(1), seed).unwrap();
            assert!(s.objective >= r.objective - 1e-9);
            assert!(s.stats.node_pct > r.stats.node_pct);
        }
    }

    #[test]
    fn full_replication_is_flat() {
        let t = topo(6, 3);
        let p = JobParams::hybrid(12, 6, 2);
        let pl = place_replicas(&t, 12, 6, 0).unwrap();
        let w = LocalityWeights::default();
        let s = solve_structured(&t, &p, &pl, &w, Budget::Restarts(2), 0).unwrap();
        let r = solve_random(&t, &p, &pl, &w, 7).unwrap();
        assert_eq!(s.objective, 4.0 * 12.0);
        assert_eq!(r.objective, 4.0 * 12.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = topo(9, 3);
        let pl = place_replicas(&t, 27, 2, 0).unwrap();
        let w = LocalityWeights::default();
        assert!(matches!(
            solve_structured(&t, &JobParams::hybrid(27, 9, 3), &pl, &w, Budget::Restarts(1), 0),
            Err(Error::Unsupported(_))
        ));
        assert!(solve_structured(&t, &JobParams::hybrid(27, 9, 2), &pl, &w, Budget::Restarts(0), 0).is_err());
        assert!(solve_structured(&t, &JobParams::hybrid(18, 9, 2), &pl, &w, Budget::Restarts(1), 0).is_err());
        assert!("0".parse::<Budget>().is_err());
        assert!("-3".parse::<Budget>().is_err());
        assert_eq!("exhaustive".parse::<Budget>().unwrap(), Budget::Exhaustive);
    }

    #[test]
    fn summary_line() {
        let t = topo(4, 2);
        let p = JobParams::hybrid(4, 4, 2);
        let pl = place_replicas(&t, 4, 2, 0).unwrap();
        let r = solve_random(&t, &p, &pl, &LocalityWeights::default(), 9).unwrap();
        let line = r.summary();
        assert!(line.starts_with("objective="));
        assert!(line.contains(" method=random seed=9 node_pct="));
        assert!(line.contains(" rack_pct="));
    }
}
