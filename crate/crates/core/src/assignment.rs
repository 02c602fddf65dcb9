//! Map-task assignment for the uncoded, coded and hybrid schemes.
//!
//! * Uncoded: server `s` maps the block of `N/K` consecutive subfiles
//!   `((s-1)N/K, sN/K]`.
//! * Coded: the `C(K,r)` server subsets of size `r`, in lexicographic order of
//!   flat indices, each receive `J = N/C(K,r)` consecutive subfiles, mapped at
//!   all `r` members.
//! * Hybrid: subfiles (after an optional permutation) are split into `K/P`
//!   layers of `NP/K`; inside layer `i` each `r`-subset `T` of racks receives
//!   `M = (NP/K)/C(P,r)` subfiles, mapped at the layer-`i` server of every
//!   rack in `T`. No subfile is mapped twice inside a rack.
//!
//! Reduce keys are contiguous blocks of `Q/K` ids by flat server index, so
//! rack `i` reduces the contiguous block of `Q/P` keys `((i-1)Q/P, iQ/P]`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;

use crate::combinatorics::{binomial, binomial_usize, subsets};
use crate::error::{Error, Result};
use crate::topology::{ClusterTopology, ServerRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Uncoded,
    Coded,
    Hybrid,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Uncoded, Scheme::Coded, Scheme::Hybrid];

    /// Short column tag: `Unc`, `Cod`, `Hyb`.
    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Uncoded => "Unc",
            Scheme::Coded => "Cod",
            Scheme::Hybrid => "Hyb",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Scheme> {
        match tag.to_ascii_lowercase().as_str() {
            "unc" | "uncoded" => Some(Scheme::Uncoded),
            "cod" | "coded" => Some(Scheme::Coded),
            "hyb" | "hybrid" => Some(Scheme::Hybrid),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Job shape: `N` subfiles, `Q` keys, Map replication `r`, and the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JobParams {
    pub subfiles: usize,
    pub keys: usize,
    pub replication: usize,
    pub scheme: Scheme,
}

impl JobParams {
    pub fn uncoded(subfiles: usize, keys: usize) -> Self {
        JobParams { subfiles, keys, replication: 1, scheme: Scheme::Uncoded }
    }

    pub fn coded(subfiles: usize, keys: usize, replication: usize) -> Self {
        JobParams { subfiles, keys, replication, scheme: Scheme::Coded }
    }

    pub fn hybrid(subfiles: usize, keys: usize, replication: usize) -> Self {
        JobParams { subfiles, keys, replication, scheme: Scheme::Hybrid }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        let replication = if scheme == Scheme::Uncoded { 1 } else { self.replication };
        JobParams { scheme, replication, ..self }
    }

    /// Conditions needed to build the Map assignment and the reduce-key blocks.
    pub fn check_map(&self, topology: &ClusterTopology) -> Result<()> {
        let (k, p) = (topology.servers(), topology.racks());
        let (n, q, r) = (self.subfiles, self.keys, self.replication);
        if n == 0 {
            return Err(Error::param("N must be positive"));
        }
        if q == 0 {
            return Err(Error::param("Q must be positive"));
        }
        if r == 0 {
            return Err(Error::param("r must be positive"));
        }
        divides(k, q, "K ∤ Q")?;
        match self.scheme {
            Scheme::Uncoded => {
                if r != 1 {
                    return Err(Error::param(format!("uncoded scheme requires r = 1 (r={r})")));
                }
                divides(k, n, "K ∤ N")?;
            }
            Scheme::Coded => {
                if r > k {
                    return Err(Error::param(format!("r > K ({r} > {k})")));
                }
                divides_u128(binomial(k, r), n, "C(K,r) ∤ N")?;
            }
            Scheme::Hybrid => {
                if r > p {
                    return Err(Error::param(format!("r > P ({r} > {p})")));
                }
                divides(p, q, "P ∤ Q")?;
                divides(k, n * p, "K ∤ NP")?;
                divides_u128(binomial(p, r), n * p / k, "C(P,r) ∤ NP/K")?;
            }
        }
        Ok(())
    }

    /// Map conditions plus `r | J` (coded) or `r | M` (hybrid), which the
    /// multicast shuffles need to split each subset's subfiles among senders.
    pub fn check_shuffle(&self, topology: &ClusterTopology) -> Result<()> {
        self.check_map(topology)?;
        match self.scheme {
            Scheme::Uncoded => Ok(()),
            Scheme::Coded => divides(self.replication, self.per_subset(topology), "r ∤ J"),
            Scheme::Hybrid => divides(self.replication, self.per_subset(topology), "r ∤ M"),
        }
    }

    /// Subfiles per mapping group: `N/K` uncoded, `J` coded, `M` hybrid.
    /// Only meaningful once [`check_map`](Self::check_map) passes.
    pub fn per_subset(&self, topology: &ClusterTopology) -> usize {
        let (k, p) = (topology.servers(), topology.racks());
        match self.scheme {
            Scheme::Uncoded => self.subfiles / k,
            Scheme::Coded => self.subfiles / binomial_usize(k, self.replication),
            Scheme::Hybrid => self.subfiles * p / k / binomial_usize(p, self.replication),
        }
    }
}

fn divides(d: usize, n: usize, what: &str) -> Result<()> {
    if d == 0 || n % d != 0 {
        return Err(Error::param(format!("{what} ({d} ∤ {n})")));
    }
    Ok(())
}

fn divides_u128(d: u128, n: usize, what: &str) -> Result<()> {
    if d == 0 || n as u128 % d != 0 {
        return Err(Error::param(format!("{what} ({d} ∤ {n})")));
    }
    Ok(())
}

/// Subfile → mapping servers, plus the reduce-key layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapAssignment {
    topology: ClusterTopology,
    scheme: Scheme,
    replication: usize,
    keys: usize,
    mapping: Vec<Vec<ServerRef>>,
    by_server: Vec<Vec<usize>>,
}

impl MapAssignment {
    /// Wraps a raw mapping without checking it; use [`validate`](Self::validate).
    pub fn from_mapping(
        topology: ClusterTopology,
        scheme: Scheme,
        replication: usize,
        keys: usize,
        mut mapping: Vec<Vec<ServerRef>>,
    ) -> Self {
        for servers in &mut mapping {
            servers.sort();
        }
        let by_server = index_by_server(&topology, &mapping);
        MapAssignment { topology, scheme, replication, keys, mapping, by_server }
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topology
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn replication(&self) -> usize {
        self.replication
    }

    pub fn subfiles(&self) -> usize {
        self.mapping.len()
    }

    pub fn keys(&self) -> usize {
        self.keys
    }

    /// Servers mapping `subfile`, sorted by flat index.
    pub fn servers_of(&self, subfile: usize) -> &[ServerRef] {
        &self.mapping[subfile - 1]
    }

    /// Subfiles mapped at the server with flat index `flat`, ascending.
    pub fn subfiles_of(&self, flat: usize) -> &[usize] {
        &self.by_server[flat - 1]
    }

    pub fn maps(&self, flat: usize, subfile: usize) -> bool {
        self.mapping[subfile - 1].iter().any(|s| s.flat == flat)
    }

    pub fn keys_per_server(&self) -> usize {
        self.keys / self.topology.servers()
    }

    /// The `Q/K` keys reduced by server `flat`.
    pub fn reduce_keys(&self, flat: usize) -> RangeInclusive<usize> {
        let per = self.keys_per_server();
        (flat - 1) * per + 1..=flat * per
    }

    /// The `Q/P` keys reduced inside `rack`.
    pub fn rack_keys(&self, rack: usize) -> RangeInclusive<usize> {
        let per = self.keys / self.topology.racks();
        (rack - 1) * per + 1..=rack * per
    }

    /// Replaces the servers of one subfile. Intended for building corrupted
    /// assignments in tests and for tools that edit assignments by hand.
    pub fn set_servers(&mut self, subfile: usize, servers: Vec<ServerRef>) {
        self.mapping[subfile - 1] = servers;
        self.mapping[subfile - 1].sort();
        self.by_server = index_by_server(&self.topology, &self.mapping);
    }

    /// Groups subfiles by their (sorted) set of mapping servers.
    pub fn groups_by_server_set(&self) -> BTreeMap<Vec<usize>, Vec<usize>> {
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (idx, servers) in self.mapping.iter().enumerate() {
            let key = servers.iter().map(|s| s.flat).collect();
            groups.entry(key).or_default().push(idx + 1);
        }
        groups
    }

    pub fn validate(&self, params: &JobParams) -> ValidationReport {
        let mut report = ValidationReport::default();
        self.base_checks(params, &mut report);
        match self.scheme {
            Scheme::Uncoded => self.uncoded_checks(params, &mut report),
            Scheme::Coded => self.coded_checks(params, &mut report),
            Scheme::Hybrid => {}
        }
        report
    }

    fn base_checks(&self, params: &JobParams, report: &mut ValidationReport) {
        let matches = params.scheme == self.scheme
            && params.replication == self.replication
            && params.subfiles == self.subfiles()
            && params.keys == self.keys;
        let detail = match params.check_map(&self.topology) {
            Err(e) => Some(e.to_string()),
            Ok(()) if !matches => Some(format!(
                "assignment is {} r={} N={} Q={}, params are {} r={} N={} Q={}",
                self.scheme,
                self.replication,
                self.subfiles(),
                self.keys,
                params.scheme,
                params.replication,
                params.subfiles,
                params.keys
            )),
            Ok(()) => None,
        };
        report.push(checks::PARAMETERS, detail);

        let k = self.topology.servers();
        let bad = self.mapping.iter().enumerate().find_map(|(idx, servers)| {
            let mut flats: Vec<_> = servers.iter().map(|s| s.flat).collect();
            flats.dedup();
            if servers.len() != self.replication || flats.len() != servers.len() {
                Some(format!(
                    "subfile {} mapped at {} distinct of {} servers, expected {}",
                    idx + 1,
                    flats.len(),
                    servers.len(),
                    self.replication
                ))
            } else if servers.iter().any(|s| self.topology.flat_index(*s).is_err()) {
                Some(format!("subfile {} mapped at a server outside the topology", idx + 1))
            } else {
                None
            }
        });
        report.push(checks::MULTIPLICITY, bad);

        let detail = if self.keys % k != 0 {
            Some(format!("Q={} not divisible by K={k}", self.keys))
        } else {
            let covered: usize = (1..=k).map(|s| self.reduce_keys(s).count()).sum();
            let contiguous = (1..k).all(|s| *self.reduce_keys(s).end() + 1 == *self.reduce_keys(s + 1).start());
            (covered != self.keys || !contiguous).then(|| "reduce blocks do not partition [1,Q]".into())
        };
        report.push(checks::REDUCE_PARTITION, detail);

        let expected = self.subfiles() * self.replication / k;
        let uneven = self
            .by_server
            .iter()
            .enumerate()
            .find(|(_, subs)| subs.len() != expected)
            .map(|(s, subs)| format!("server {} maps {} subfiles, expected {expected}", s + 1, subs.len()));
        report.push(checks::UNIFORM_LOAD, uneven);
    }

    fn uncoded_checks(&self, params: &JobParams, report: &mut ValidationReport) {
        let block = params.subfiles / self.topology.servers();
        let bad = (1..=self.topology.servers()).find_map(|s| {
            let expected: Vec<usize> = ((s - 1) * block + 1..=s * block).collect();
            (self.subfiles_of(s) != expected.as_slice())
                .then(|| format!("server {s} does not map its block of {block} subfiles"))
        });
        report.push(checks::BLOCK_STRUCTURE, bad);
    }

    fn coded_checks(&self, params: &JobParams, report: &mut ValidationReport) {
        let k = self.topology.servers();
        let j = params.per_subset(&self.topology);
        let groups = self.groups_by_server_set();
        let mut detail = None;
        if groups.len() as u128 != binomial(k, self.replication) {
            detail = Some(format!(
                "{} distinct server sets, expected C({k},{}) = {}",
                groups.len(),
                self.replication,
                binomial(k, self.replication)
            ));
        } else if let Some((set, subs)) = groups.iter().find(|(_, subs)| subs.len() != j) {
            detail = Some(format!("server set {set:?} shares {} subfiles, expected {j}", subs.len()));
        }
        report.push(checks::SUBSET_SHARING, detail);
    }
}

fn index_by_server(topology: &ClusterTopology, mapping: &[Vec<ServerRef>]) -> Vec<Vec<usize>> {
    let mut by_server = vec![Vec::new(); topology.servers()];
    for (idx, servers) in mapping.iter().enumerate() {
        for s in servers {
            if (1..=topology.servers()).contains(&s.flat) {
                by_server[s.flat - 1].push(idx + 1);
            }
        }
    }
    by_server
}

/// Which server of each rack belongs to each layer.
///
/// The identity grouping puts slot `j` of every rack in layer `j`. The
/// locality optimizer searches over other groupings; any grouping with one
/// server per rack in every layer yields a valid hybrid assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerGrouping {
    // slot_of[rack-1][layer-1]
    slot_of: Vec<Vec<usize>>,
    // layer_of[rack-1][slot-1]
    layer_of: Vec<Vec<usize>>,
}

impl LayerGrouping {
    pub fn identity(topology: &ClusterTopology) -> Self {
        let row: Vec<usize> = (1..=topology.layers()).collect();
        LayerGrouping {
            slot_of: vec![row.clone(); topology.racks()],
            layer_of: vec![row; topology.racks()],
        }
    }

    /// `slots[rack-1][layer-1]` is the slot of that rack's server in that layer.
    pub fn from_slots(topology: &ClusterTopology, slots: Vec<Vec<usize>>) -> Result<Self> {
        let kr = topology.layers();
        if slots.len() != topology.racks() {
            return Err(Error::param(format!("grouping has {} racks, expected {}", slots.len(), topology.racks())));
        }
        let mut layer_of = vec![vec![0; kr]; slots.len()];
        for (rack, row) in slots.iter().enumerate() {
            if row.len() != kr {
                return Err(Error::param(format!("grouping row for rack {} has {} layers", rack + 1, row.len())));
            }
            for (layer, &slot) in row.iter().enumerate() {
                if slot == 0 || slot > kr || layer_of[rack][slot - 1] != 0 {
                    return Err(Error::param(format!("grouping row for rack {} is not a permutation", rack + 1)));
                }
                layer_of[rack][slot - 1] = layer + 1;
            }
        }
        Ok(LayerGrouping { slot_of: slots, layer_of })
    }

    pub fn slots(&self) -> &[Vec<usize>] {
        &self.slot_of
    }

    pub fn slot(&self, layer: usize, rack: usize) -> usize {
        self.slot_of[rack - 1][layer - 1]
    }

    pub fn server(&self, topology: &ClusterTopology, layer: usize, rack: usize) -> ServerRef {
        topology.server_unchecked((rack - 1) * topology.layers() + self.slot(layer, rack))
    }

    pub fn layer_of(&self, server: ServerRef) -> usize {
        self.layer_of[server.rack - 1][server.slot - 1]
    }

    pub fn layer_members(&self, topology: &ClusterTopology, layer: usize) -> Vec<ServerRef> {
        (1..=topology.racks()).map(|rack| self.server(topology, layer, rack)).collect()
    }

    /// Exchanges the layers of two servers of `rack`.
    pub fn swap(&mut self, rack: usize, layer_a: usize, layer_b: usize) {
        let row = &mut self.slot_of[rack - 1];
        row.swap(layer_a - 1, layer_b - 1);
        let (sa, sb) = (row[layer_a - 1], row[layer_b - 1]);
        self.layer_of[rack - 1][sa - 1] = layer_a;
        self.layer_of[rack - 1][sb - 1] = layer_b;
    }
}

/// Structural position of a hybrid subfile: `F_{T,w}^{(i)}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubfileLabel {
    pub layer: usize,
    /// Sorted rack ids of the `r`-subset `T`.
    pub subset: Vec<usize>,
    pub w: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridAssignment {
    map: MapAssignment,
    labels: Vec<SubfileLabel>,
    permutation: Vec<usize>,
    grouping: LayerGrouping,
    per_subset: usize,
}

impl HybridAssignment {
    pub fn as_map(&self) -> &MapAssignment {
        &self.map
    }

    pub fn map_mut(&mut self) -> &mut MapAssignment {
        &mut self.map
    }

    /// Label of `subfile` (1-based).
    pub fn label(&self, subfile: usize) -> &SubfileLabel {
        &self.labels[subfile - 1]
    }

    /// `permutation[p]` is the subfile placed at structural position `p + 1`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn grouping(&self) -> &LayerGrouping {
        &self.grouping
    }

    /// `M`.
    pub fn per_subset(&self) -> usize {
        self.per_subset
    }

    pub fn layer_size(&self) -> usize {
        self.map.subfiles() * self.map.topology().racks() / self.map.topology().servers()
    }

    pub fn validate(&self, params: &JobParams) -> ValidationReport {
        let mut report = self.map.validate(params);
        let topo = *self.map.topology();
        let r = self.map.replication();
        let n = self.map.subfiles();

        let perm_ok = self.permutation.len() == n && {
            let mut seen = vec![false; n + 1];
            self.permutation.iter().all(|&s| s >= 1 && s <= n && !std::mem::replace(&mut seen[s], true))
        };
        report.push(checks::PERMUTATION, (!perm_ok).then(|| "permutation is not a bijection on [1,N]".into()));

        let grouping_ok = LayerGrouping::from_slots(&topo, self.grouping.slots().to_vec()).is_ok();
        report.push(checks::GROUPING, (!grouping_ok).then(|| "layer grouping is not one server per rack per layer".into()));

        let mut rack_clash = None;
        'outer: for (idx, servers) in (1..=n).map(|s| (s, self.map.servers_of(s))) {
            for (a, sa) in servers.iter().enumerate() {
                for sb in &servers[a + 1..] {
                    if sa.rack == sb.rack {
                        rack_clash = Some(format!("subfile {idx} mapped at {sa} and {sb}"));
                        break 'outer;
                    }
                }
            }
        }
        report.push(checks::NO_COMMON_FILES_IN_RACK, rack_clash);

        let mut layer_counts = vec![0usize; topo.layers()];
        let mut slot_counts: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut label_bad = None;
        for subfile in 1..=n {
            let label = &self.labels[subfile - 1];
            if label.layer == 0 || label.layer > topo.layers() || label.subset.len() != r {
                label_bad.get_or_insert_with(|| format!("subfile {subfile} has malformed label {label:?}"));
                continue;
            }
            layer_counts[label.layer - 1] += 1;
            *slot_counts.entry((label.layer, label.subset.clone())).or_default() += 1;
            let mut expected: Vec<ServerRef> =
                label.subset.iter().map(|&t| self.grouping.server(&topo, label.layer, t)).collect();
            expected.sort();
            if expected.as_slice() != self.map.servers_of(subfile) {
                label_bad.get_or_insert_with(|| {
                    format!("subfile {subfile} labelled layer {} racks {:?} but mapped elsewhere", label.layer, label.subset)
                });
            }
        }
        report.push(checks::LABELS, label_bad);

        let layer_size = self.layer_size();
        let bad_layer = layer_counts
            .iter()
            .enumerate()
            .find(|(_, &c)| c != layer_size)
            .map(|(l, c)| format!("layer {} holds {c} subfiles, expected {layer_size}", l + 1));
        report.push(checks::LAYER_SIZE, bad_layer);

        let expected_slots = topo.layers() as u128 * binomial(topo.racks(), r);
        let bad_slot = if slot_counts.len() as u128 != expected_slots {
            Some(format!("{} occupied (layer, subset) pairs, expected {expected_slots}", slot_counts.len()))
        } else {
            slot_counts
                .iter()
                .find(|(_, &c)| c != self.per_subset)
                .map(|((l, t), c)| format!("layer {l} subset {t:?} holds {c} subfiles, expected M={}", self.per_subset))
        };
        report.push(checks::SLOT_OCCUPANCY, bad_slot);

        let per_server = binomial_usize(topo.racks() - 1, r - 1) * self.per_subset;
        let bad_load = (1..=topo.servers())
            .find(|&s| self.map.subfiles_of(s).len() != per_server)
            .map(|s| format!("server {s} maps {} subfiles, expected C(P-1,r-1)·M = {per_server}", self.map.subfiles_of(s).len()));
        report.push(checks::HYBRID_LOAD, bad_load);
        report
    }

    /// Tab-separated lines `subfile, layer, subset, w, servers`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for subfile in 1..=self.map.subfiles() {
            let label = &self.labels[subfile - 1];
            out.push_str(&format!(
                "{subfile}\t{}\t{}\t{}\t{}\n",
                label.layer,
                join_csv(&label.subset),
                label.w,
                join_csv(&flats(self.map.servers_of(subfile)))
            ));
        }
        out
    }
}

impl AsRef<MapAssignment> for HybridAssignment {
    fn as_ref(&self) -> &MapAssignment {
        &self.map
    }
}

impl AsRef<MapAssignment> for MapAssignment {
    fn as_ref(&self) -> &MapAssignment {
        self
    }
}

impl MapAssignment {
    /// Tab-separated lines; non-hybrid assignments carry `-` in the
    /// layer, subset and `w` columns.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for subfile in 1..=self.subfiles() {
            out.push_str(&format!("{subfile}\t-\t-\t-\t{}\n", join_csv(&flats(self.servers_of(subfile)))));
        }
        out
    }
}

/// One parsed line of the assignment text format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentLine {
    pub subfile: usize,
    pub label: Option<SubfileLabel>,
    pub servers: Vec<usize>,
}

pub fn parse_assignment_text(text: &str) -> Result<Vec<AssignmentLine>> {
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("line {}: expected 5 tab-separated fields, got {}", no + 1, fields.len())));
        }
        let subfile = parse_num(fields[0], no)?;
        let label = if fields[1] == "-" {
            None
        } else {
            Some(SubfileLabel {
                layer: parse_num(fields[1], no)?,
                subset: parse_csv(fields[2], no)?,
                w: parse_num(fields[3], no)?,
            })
        };
        lines.push(AssignmentLine { subfile, label, servers: parse_csv(fields[4], no)? });
    }
    Ok(lines)
}

/// Rebuilds a [`MapAssignment`] from parsed lines (subfile ids must be `1..=N`).
pub fn assignment_from_lines(
    topology: &ClusterTopology,
    scheme: Scheme,
    replication: usize,
    keys: usize,
    lines: &[AssignmentLine],
) -> Result<MapAssignment> {
    let mut mapping = vec![Vec::new(); lines.len()];
    for line in lines {
        if line.subfile == 0 || line.subfile > lines.len() {
            return Err(Error::Parse(format!("subfile id {} outside 1..={}", line.subfile, lines.len())));
        }
        mapping[line.subfile - 1] = line.servers.iter().map(|&f| topology.unflatten(f)).collect::<Result<_>>()?;
    }
    Ok(MapAssignment::from_mapping(*topology, scheme, replication, keys, mapping))
}

fn parse_num(field: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: bad integer {field:?}", line + 1)))
}

fn parse_csv(field: &str, line: usize) -> Result<Vec<usize>> {
    field.split(',').map(|f| parse_num(f, line)).collect()
}

pub(crate) fn join_csv(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn flats(servers: &[ServerRef]) -> Vec<usize> {
    servers.iter().map(|s| s.flat).collect()
}

pub fn assign_uncoded(topology: &ClusterTopology, params: &JobParams) -> Result<MapAssignment> {
    expect_scheme(params, Scheme::Uncoded)?;
    params.check_map(topology)?;
    let block = params.subfiles / topology.servers();
    let mapping = (0..params.subfiles)
        .map(|idx| vec![topology.server_unchecked(idx / block + 1)])
        .collect();
    Ok(MapAssignment::from_mapping(*topology, Scheme::Uncoded, 1, params.keys, mapping))
}

pub fn assign_coded(topology: &ClusterTopology, params: &JobParams) -> Result<MapAssignment> {
    expect_scheme(params, Scheme::Coded)?;
    params.check_map(topology)?;
    let j = params.per_subset(topology);
    let mut mapping = Vec::with_capacity(params.subfiles);
    for subset in subsets(topology.servers(), params.replication) {
        let servers: Vec<ServerRef> = subset.iter().map(|&f| topology.server_unchecked(f)).collect();
        for _ in 0..j {
            mapping.push(servers.clone());
        }
    }
    Ok(MapAssignment::from_mapping(*topology, Scheme::Coded, params.replication, params.keys, mapping))
}

/// Hybrid assignment with the identity layer grouping.
pub fn assign_hybrid(
    topology: &ClusterTopology,
    params: &JobParams,
    permutation: Option<&[usize]>,
) -> Result<HybridAssignment> {
    assign_hybrid_grouped(topology, params, permutation, &LayerGrouping::identity(topology))
}

/// Hybrid assignment where structural position `p` holds subfile
/// `permutation[p-1]` and layer `i` consists of the servers `grouping` puts there.
pub fn assign_hybrid_grouped(
    topology: &ClusterTopology,
    params: &JobParams,
    permutation: Option<&[usize]>,
    grouping: &LayerGrouping,
) -> Result<HybridAssignment> {
    expect_scheme(params, Scheme::Hybrid)?;
    params.check_map(topology)?;
    let n = params.subfiles;
    let permutation: Vec<usize> = match permutation {
        Some(p) => {
            check_permutation(p, n)?;
            p.to_vec()
        }
        None => (1..=n).collect(),
    };
    if grouping.slots().len() != topology.racks() || grouping.slots().iter().any(|row| row.len() != topology.layers()) {
        return Err(Error::param("layer grouping does not match the topology"));
    }
    let r = params.replication;
    let m = params.per_subset(topology);
    let layer_size = n * topology.racks() / topology.servers();
    let rack_subsets: Vec<Vec<usize>> = subsets(topology.racks(), r).collect();

    let mut mapping = vec![Vec::new(); n];
    let mut labels = vec![SubfileLabel { layer: 0, subset: Vec::new(), w: 0 }; n];
    for (pos, &subfile) in permutation.iter().enumerate() {
        let layer = pos / layer_size + 1;
        let within = pos % layer_size;
        let subset = &rack_subsets[within / m];
        mapping[subfile - 1] = subset.iter().map(|&t| grouping.server(topology, layer, t)).collect();
        labels[subfile - 1] = SubfileLabel { layer, subset: subset.clone(), w: within % m + 1 };
    }
    Ok(HybridAssignment {
        map: MapAssignment::from_mapping(*topology, Scheme::Hybrid, r, params.keys, mapping),
        labels,
        permutation,
        grouping: grouping.clone(),
        per_subset: m,
    })
}

fn expect_scheme(params: &JobParams, scheme: Scheme) -> Result<()> {
    if params.scheme != scheme {
        return Err(Error::param(format!("expected {scheme} parameters, got {}", params.scheme)));
    }
    Ok(())
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::param(format!("permutation has length {}, expected N={n}", perm.len())));
    }
    let mut seen = vec![false; n + 1];
    for &s in perm {
        if s == 0 || s > n || seen[s] {
            return Err(Error::param("permutation is not a bijection on [1,N]"));
        }
        seen[s] = true;
    }
    Ok(())
}

/// Names of the checks reported by `validate`.
pub mod checks {
    pub const PARAMETERS: &str = "parameters";
    pub const MULTIPLICITY: &str = "subfile multiplicity";
    pub const REDUCE_PARTITION: &str = "reduce keys partition";
    pub const UNIFORM_LOAD: &str = "uniform map load";
    pub const BLOCK_STRUCTURE: &str = "uncoded block structure";
    pub const SUBSET_SHARING: &str = "r-subset sharing";
    pub const PERMUTATION: &str = "permutation";
    pub const GROUPING: &str = "layer grouping";
    pub const NO_COMMON_FILES_IN_RACK: &str = "no common files in a rack";
    pub const LABELS: &str = "label consistency";
    pub const LAYER_SIZE: &str = "layer size";
    pub const SLOT_OCCUPANCY: &str = "slot occupancy";
    pub const HYBRID_LOAD: &str = "per-server load";
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: &'static str, failure: Option<String>) {
        self.checks.push(Check {
            name,
            passed: failure.is_none(),
            detail: failure.unwrap_or_default(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed {
                writeln!(f, "pass  {}", c.name)?;
            } else {
                writeln!(f, "FAIL  {}: {}", c.name, c.detail)?;
            }
        }
        Ok(())
    }
}
