//! The integer program: indicator arrays `X`, `Y`, locality array `C`,
//! constraint checks and the objective.

use std::fmt;

use crate::assignment::MapAssignment;
use crate::error::{Error, Result};
use crate::placement::{locality_measure, LocalityWeights, ReplicaPlacement};
use crate::topology::ClusterTopology;

/// `X(i, j, k)`: subfile `i` is mapped at the server pair `{j, k}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairIndicator {
    subfiles: usize,
    servers: usize,
    data: Vec<bool>,
}

impl PairIndicator {
    pub fn zeros(subfiles: usize, servers: usize) -> Self {
        PairIndicator { subfiles, servers, data: vec![false; subfiles * servers * servers] }
    }

    pub fn subfiles(&self) -> usize {
        self.subfiles
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        assert!((1..=self.subfiles).contains(&i) && (1..=self.servers).contains(&j) && (1..=self.servers).contains(&k));
        ((i - 1) * self.servers + (j - 1)) * self.servers + (k - 1)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.idx(i, j, k)]
    }

    /// Sets both `X(i,j,k)` and `X(i,k,j)`.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        self.set_entry(i, j, k, value);
        self.set_entry(i, k, j, value);
    }

    /// Sets one ordered entry only.
    pub fn set_entry(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.idx(i, j, k);
        self.data[idx] = value;
    }

    /// Nonzero entries with `j < k`.
    pub fn unordered_ones(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for i in 1..=self.subfiles {
            for j in 1..=self.servers {
                for k in j + 1..=self.servers {
                    if self.get(i, j, k) {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }
}

/// `Y(j, k)`: servers `j` and `k` share at least one subfile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerGraph {
    servers: usize,
    data: Vec<bool>,
}

impl ServerGraph {
    pub fn empty(servers: usize) -> Self {
        ServerGraph { servers, data: vec![false; servers * servers] }
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    fn idx(&self, j: usize, k: usize) -> usize {
        assert!((1..=self.servers).contains(&j) && (1..=self.servers).contains(&k));
        (j - 1) * self.servers + (k - 1)
    }

    pub fn get(&self, j: usize, k: usize) -> bool {
        self.data[self.idx(j, k)]
    }

    /// Sets both `Y(j,k)` and `Y(k,j)`.
    pub fn set(&mut self, j: usize, k: usize, value: bool) {
        self.set_entry(j, k, value);
        self.set_entry(k, j, value);
    }

    pub fn set_entry(&mut self, j: usize, k: usize, value: bool) {
        let idx = self.idx(j, k);
        self.data[idx] = value;
    }

    pub fn degree(&self, k: usize) -> usize {
        (1..=self.servers).filter(|&j| self.get(j, k)).count()
    }
}

/// `C(i, j, k)` for every subfile and ordered server pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityCosts {
    subfiles: usize,
    servers: usize,
    data: Vec<f64>,
}

impl LocalityCosts {
    pub fn from_placement(placement: &ReplicaPlacement, weights: &LocalityWeights) -> Self {
        let (n, k) = (placement.subfiles(), placement.topology().servers());
        let mut data = Vec::with_capacity(n * k * k);
        for i in 1..=n {
            for j in 1..=k {
                for l in 1..=k {
                    data.push(locality_measure(placement, weights, i, j, l));
                }
            }
        }
        LocalityCosts { subfiles: n, servers: k, data }
    }

    /// Array from explicit values, indexed `[(i-1)·K + (j-1)]·K + (k-1)`.
    pub fn from_values(subfiles: usize, servers: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != subfiles * servers * servers {
            return Err(Error::Shape(format!(
                "C has {} entries, expected {subfiles}·{servers}·{servers}",
                data.len()
            )));
        }
        Ok(LocalityCosts { subfiles, servers, data })
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[((i - 1) * self.servers + (j - 1)) * self.servers + (k - 1)]
    }
}

/// `(X, Y)` induced by an `r = 2` assignment.
pub fn xy_from_assignment(assignment: &impl AsRef<MapAssignment>) -> Result<(PairIndicator, ServerGraph)> {
    let map = assignment.as_ref();
    if map.replication() != 2 {
        return Err(Error::Unsupported(format!(
            "locality program is defined for r = 2 only (r={})",
            map.replication()
        )));
    }
    let k = map.topology().servers();
    let mut x = PairIndicator::zeros(map.subfiles(), k);
    let mut y = ServerGraph::empty(k);
    for i in 1..=map.subfiles() {
        let s = map.servers_of(i);
        if s.len() != 2 || s[0].flat == s[1].flat {
            return Err(Error::Shape(format!("subfile {i} is not mapped at two distinct servers")));
        }
        x.set(i, s[0].flat, s[1].flat, true);
        y.set(s[0].flat, s[1].flat, true);
    }
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    /// (1) no `X` or `Y` entry inside a rack.
    NoCommonFilesInRack,
    /// (2) `Σ_i X(i,j,k) = M·Y(j,k)`.
    CommonSubfiles,
    /// (3) `Σ_j Y(j,k) = P − 1`.
    Degree,
    /// (4) `Y(i,j) + Y(j,k) + Y(i,k) ≠ 2`.
    Transitivity,
}

impl Constraint {
    pub const ALL: [Constraint; 4] =
        [Constraint::NoCommonFilesInRack, Constraint::CommonSubfiles, Constraint::Degree, Constraint::Transitivity];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::NoCommonFilesInRack => "no common files in a rack",
            Constraint::CommonSubfiles => "common subfiles condition",
            Constraint::Degree => "degree condition",
            Constraint::Transitivity => "transitivity",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintResult {
    pub constraint: Constraint,
    pub violations: usize,
    /// Description of the first violation found.
    pub first: Option<String>,
}

impl ConstraintResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintReport {
    pub results: Vec<ConstraintResult>,
}

impl ConstraintReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(ConstraintResult::passed)
    }

    pub fn get(&self, constraint: Constraint) -> &ConstraintResult {
        self.results.iter().find(|r| r.constraint == constraint).expect("all constraints are reported")
    }

    pub fn failed(&self) -> Vec<Constraint> {
        self.results.iter().filter(|r| !r.passed()).map(|r| r.constraint).collect()
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            write!(f, "{}: {}", r.constraint, if r.passed() { "pass" } else { "FAIL" })?;
            if let Some(first) = &r.first {
                write!(f, " ({} violations, first: {first})", r.violations)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Tally {
    violations: usize,
    first: Option<String>,
}

impl Tally {
    fn hit(&mut self, what: impl FnOnce() -> String) {
        self.violations += 1;
        if self.first.is_none() {
            self.first = Some(what());
        }
    }

    fn finish(self, constraint: Constraint) -> ConstraintResult {
        ConstraintResult { constraint, violations: self.violations, first: self.first }
    }
}

/// Evaluates all four constraints; constraint (2) is checked for every
/// ordered pair, same-rack pairs included.
pub fn check_constraints(
    x: &PairIndicator,
    y: &ServerGraph,
    topology: &ClusterTopology,
    per_subset: usize,
) -> Result<ConstraintReport> {
    let k = topology.servers();
    if x.servers != k || y.servers != k {
        return Err(Error::Shape(format!(
            "X has {} servers and Y has {}, topology has {k}",
            x.servers, y.servers
        )));
    }
    let n = x.subfiles;
    let kr = topology.servers_per_rack();
    let same_rack = |a: usize, b: usize| (a - 1) / kr == (b - 1) / kr;

    let mut c1 = Tally::default();
    let mut c2 = Tally::default();
    for j in 1..=k {
        for l in 1..=k {
            let shared = (1..=n).filter(|&i| x.get(i, j, l)).count();
            if same_rack(j, l) {
                if y.get(j, l) {
                    c1.hit(|| format!("Y({j},{l}) = 1 inside a rack"));
                }
                if shared > 0 {
                    c1.hit(|| format!("X(·,{j},{l}) has {shared} ones inside a rack"));
                }
            }
            let expected = per_subset * y.get(j, l) as usize;
            if shared != expected {
                c2.hit(|| format!("Σ_i X(i,{j},{l}) = {shared}, M·Y({j},{l}) = {expected}"));
            }
        }
    }
    let mut c3 = Tally::default();
    for l in 1..=k {
        let d = y.degree(l);
        if d != topology.racks() - 1 {
            c3.hit(|| format!("Σ_j Y(j,{l}) = {d}, expected {}", topology.racks() - 1));
        }
    }
    let mut c4 = Tally::default();
    for a in 1..=k {
        for b in a + 1..=k {
            for c in b + 1..=k {
                let sum = y.get(a, b) as u8 + y.get(b, c) as u8 + y.get(a, c) as u8;
                if sum == 2 {
                    c4.hit(|| format!("Y({a},{b}) + Y({b},{c}) + Y({a},{c}) = 2"));
                }
            }
        }
    }
    Ok(ConstraintReport {
        results: vec![
            c1.finish(Constraint::NoCommonFilesInRack),
            c2.finish(Constraint::CommonSubfiles),
            c3.finish(Constraint::Degree),
            c4.finish(Constraint::Transitivity),
        ],
    })
}

/// `Σ_i Σ_j Σ_k X(i,j,k)·C(i,j,k)`.
pub fn objective(x: &PairIndicator, c: &LocalityCosts) -> Result<f64> {
    if x.subfiles != c.subfiles || x.servers != c.servers {
        return Err(Error::Shape(format!(
            "X is {}×{k}×{k}, C is {}×{l}×{l}",
            x.subfiles,
            c.subfiles,
            k = x.servers,
            l = c.servers
        )));
    }
    Ok(x.data.iter().zip(&c.data).filter(|(on, _)| **on).map(|(_, v)| v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{assign_hybrid, JobParams, LayerGrouping};
    use crate::assignment::assign_hybrid_grouped;

    fn topo(k: usize, p: usize) -> ClusterTopology {
        ClusterTopology::new(k, p).unwrap()
    }

    #[test]
    fn hybrid_assignment_induces_layer_cliques() {
        let t = topo(9, 3);
        let a = assign_hybrid(&t, &JobParams::hybrid(72, 18, 2), None).unwrap();
        let (x, y) = xy_from_assignment(&a).unwrap();
        for j in 1..=9 {
            for l in 1..=9 {
                let sj = t.unflatten(j).unwrap();
                let sl = t.unflatten(l).unwrap();
                assert_eq!(y.get(j, l), j != l && sj.slot == sl.slot, "({j},{l})");
                assert!(!x.get(1, j, j));
            }
            assert_eq!(y.degree(j), 2);
        }
        assert!(check_constraints(&x, &y, &t, 8).unwrap().passed());
    }

    #[test]
    fn single_layer_has_one_subfile_per_pair() {
        let t = topo(3, 3);
        let a = assign_hybrid(&t, &JobParams::hybrid(3, 3, 2), None).unwrap();
        let (x, _) = xy_from_assignment(&a).unwrap();
        assert_eq!(x.unordered_ones(), vec![(1, 1, 2), (2, 1, 3), (3, 2, 3)]);
    }

    #[test]
    fn rejects_other_replication() {
        let t = topo(9, 3);
        let a = assign_hybrid(&t, &JobParams::hybrid(27, 9, 3), None).unwrap();
        assert!(matches!(xy_from_assignment(&a), Err(Error::Unsupported(_))));
    }

    #[test]
    fn detects_each_violation() {
        let t = topo(6, 3);
        let a = assign_hybrid(&t, &JobParams::hybrid(12, 6, 2), None).unwrap();
        let (x, y) = xy_from_assignment(&a).unwrap();
        assert!(check_constraints(&x, &y, &t, 2).unwrap().passed());

        let mut y1 = y.clone();
        y1.set(1, 2, true);
        assert!(check_constraints(&x, &y1, &t, 2).unwrap().failed().contains(&Constraint::NoCommonFilesInRack));

        // servers 1 (rack 1) and 4 (rack 2, slot 2) are in different layers
        let mut y4 = y.clone();
        y4.set(1, 4, true);
        let report = check_constraints(&x, &y4, &t, 2).unwrap();
        assert!(report.failed().contains(&Constraint::Transitivity));
        assert!(report.get(Constraint::Transitivity).first.as_ref().unwrap().contains("= 2"));

        let mut x2 = x.clone();
        x2.set(1, 1, 5, true);
        assert!(check_constraints(&x2, &y, &t, 2).unwrap().failed().contains(&Constraint::CommonSubfiles));

        assert!(check_constraints(&x, &y, &topo(9, 3), 2).is_err());
    }

    #[test]
    fn objective_examples() {
        let t = topo(4, 2);
        let c = LocalityCosts::from_values(2, 4, vec![2.0; 32]).unwrap();
        assert_eq!(objective(&PairIndicator::zeros(2, 4), &c).unwrap(), 0.0);
        let a = assign_hybrid(&t, &JobParams::hybrid(2, 4, 2), None).unwrap();
        let (x, _) = xy_from_assignment(&a).unwrap();
        assert_eq!(objective(&x, &c).unwrap(), 8.0);
        assert!(objective(&x, &LocalityCosts::from_values(1, 4, vec![0.0; 16]).unwrap()).is_err());
    }

    #[test]
    fn hand_instance() {
        // K=4, P=2, N=2: layers {1,3} and {2,4} (identity) or {1,4} and {2,3}
        let t = topo(4, 2);
        let params = JobParams::hybrid(2, 4, 2);
        let mut values = vec![0.0; 2 * 16];
        let mut put = |i: usize, j: usize, k: usize, v: f64| {
            values[((i - 1) * 4 + j - 1) * 4 + k - 1] = v;
            values[((i - 1) * 4 + k - 1) * 4 + j - 1] = v;
        };
        put(1, 1, 3, 1.0);
        put(1, 2, 4, 0.5);
        put(2, 1, 3, 0.25);
        put(2, 2, 4, 2.0);
        put(1, 1, 4, 1.5);
        put(2, 2, 3, 0.0);
        let c = LocalityCosts::from_values(2, 4, values).unwrap();
        let eval = |perm: &[usize], g: &LayerGrouping| {
            let a = assign_hybrid_grouped(&t, &params, Some(perm), g).unwrap();
            objective(&xy_from_assignment(&a).unwrap().0, &c).unwrap()
        };
        let id = LayerGrouping::identity(&t);
        let crossed = LayerGrouping::from_slots(&t, vec![vec![1, 2], vec![2, 1]]).unwrap();
        assert_eq!(eval(&[1, 2], &id), 2.0 * (1.0 + 2.0));
        assert_eq!(eval(&[2, 1], &id), 2.0 * (0.25 + 0.5));
        assert_eq!(eval(&[1, 2], &crossed), 2.0 * 1.5);
        assert_eq!(eval(&[2, 1], &crossed), 0.0);
    }
}
