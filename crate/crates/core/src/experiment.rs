//! Experiment runner: cost tables, end-to-end shuffle verification and
//! locality comparisons, configured from `key=value` text.
//!
//! ```text
//! # costs.conf
//! mode=costs
//! tuples=9,3,18,72,2;16,4,16,240,2
//! format=table
//! ```
//!
//! Output is a pure function of the configuration, so two runs with the
//! same configuration produce identical bytes.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::analysis::{self, compare, parse_usizes, published, ComparisonRow, CostTuple, CSV_HEADER};
use crate::assignment::{JobParams, Scheme};
use crate::error::{Error, Result};
use crate::optimizer::{brute_force_oracle, oracle_candidates, solve_random, solve_structured, Budget, Method, ORACLE_LIMIT};
use crate::placement::{place_replicas_with, LocalityWeights, PlacementPolicy};
use crate::shuffle::simulate;
use crate::topology::ClusterTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Costs,
    ShuffleVerify,
    Locality,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "costs" => Ok(Mode::Costs),
            "shuffle-verify" => Ok(Mode::ShuffleVerify),
            "locality" => Ok(Mode::Locality),
            _ => Err(Error::Parse(format!("unknown mode {s:?} (costs, shuffle-verify, locality)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            _ => Err(Error::Parse(format!("unknown format {s:?} (csv, table)"))),
        }
    }
}

/// A `(K, P, r_f, N)` locality experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalityTuple {
    pub servers: usize,
    pub racks: usize,
    pub replicas: usize,
    pub subfiles: usize,
}

impl LocalityTuple {
    pub const fn new(servers: usize, racks: usize, replicas: usize, subfiles: usize) -> Self {
        LocalityTuple { servers, racks, replicas, subfiles }
    }

    /// The `r = 2` hybrid job; keys play no role here so `Q = K`.
    pub fn params(&self) -> JobParams {
        JobParams::hybrid(self.subfiles, self.servers, 2)
    }

    pub fn csv(&self) -> String {
        format!("{},{},{},{}", self.servers, self.racks, self.replicas, self.subfiles)
    }

    fn check(&self) -> Result<ClusterTopology> {
        let topology = ClusterTopology::new(self.servers, self.racks)?;
        if self.replicas == 0 || self.replicas > self.servers {
            return Err(Error::param(format!("need 1 <= r_f <= K (r_f={}, K={})", self.replicas, self.servers)));
        }
        self.params().check_map(&topology)?;
        Ok(topology)
    }
}

impl fmt::Display for LocalityTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.csv())
    }
}

impl FromStr for LocalityTuple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match parse_usizes(s)?[..] {
            [k, p, rf, n] => Ok(LocalityTuple::new(k, p, rf, n)),
            _ => Err(Error::Parse(format!("expected K,P,r_f,N, got {s:?}"))),
        }
    }
}

/// Published random/optimized locality percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedLocality {
    pub tuple: LocalityTuple,
    pub node_random: f64,
    pub node_opt: f64,
    pub rack_random: f64,
    pub rack_opt: f64,
}

const fn pl(k: usize, p: usize, rf: usize, n: usize, nr: f64, no: f64, rr: f64, ro: f64) -> PublishedLocality {
    PublishedLocality { tuple: LocalityTuple::new(k, p, rf, n), node_random: nr, node_opt: no, rack_random: rr, rack_opt: ro }
}

pub const TABLE_II: [PublishedLocality; 10] = [
    pl(8, 2, 2, 160, 25.0, 60.0, 80.0, 80.0),
    pl(8, 2, 3, 100, 39.0, 76.0, 95.0, 95.0),
    pl(9, 3, 2, 144, 17.0, 64.0, 57.0, 86.0),
    pl(9, 3, 3, 90, 33.0, 87.0, 77.0, 98.0),
    pl(10, 5, 2, 100, 19.0, 80.0, 41.0, 92.5),
    pl(16, 4, 2, 192, 10.0, 64.0, 45.0, 90.0),
    pl(16, 4, 3, 192, 19.0, 84.0, 63.0, 99.0),
    pl(18, 3, 2, 180, 11.0, 60.0, 57.0, 83.0),
    pl(20, 5, 2, 200, 13.0, 66.0, 38.0, 90.0),
    pl(21, 3, 2, 84, 12.0, 63.0, 56.0, 81.0),
];

pub fn published_locality(tuple: &LocalityTuple) -> Option<&'static PublishedLocality> {
    TABLE_II.iter().find(|p| p.tuple == *tuple)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Raw tuples; `None` selects the mode's default set.
    pub tuples: Option<Vec<Vec<usize>>>,
    pub lambda: f64,
    pub seeds: Vec<u64>,
    pub trials: usize,
    pub budget: Budget,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Flip one delivered bit per run in shuffle-verify mode.
    pub fault_inject: bool,
    /// Payload widths `B` in bytes for shuffle runs.
    pub widths: Vec<usize>,
    /// Run the shuffle for metered columns in costs mode.
    pub meter: bool,
    /// Rejected tuples do not affect the exit status.
    pub warn_rejected: bool,
    pub placement: PlacementPolicy,
    /// Also run the brute-force oracle where it is small enough.
    pub oracle: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Costs,
            tuples: None,
            lambda: LocalityWeights::DEFAULT_LAMBDA,
            seeds: vec![1],
            trials: 10,
            budget: Budget::default(),
            out: None,
            format: Format::Csv,
            fault_inject: false,
            widths: vec![1, 8],
            meter: true,
            warn_rejected: false,
            placement: PlacementPolicy::RackSpread,
            oracle: true,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("{key}: bad entry {s:?}"))))
        .collect()
}

/// `a,b,c;d,e,f` (also newline- or `|`-separated).
pub fn parse_tuples(value: &str) -> Result<Vec<Vec<usize>>> {
    value
        .split([';', '|', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_usizes)
        .collect()
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "mode" => self.mode = value.parse()?,
            "tuples" => self.tuples = Some(parse_tuples(value)?),
            "lambda" => {
                self.lambda = value.parse().map_err(|_| Error::Parse(format!("lambda: bad number {value:?}")))?;
                LocalityWeights::new(self.lambda)?;
            }
            "seeds" => self.seeds = parse_list("seeds", value)?,
            "trials" => self.trials = value.parse().map_err(|_| Error::Parse(format!("trials: bad count {value:?}")))?,
            "budget" => self.budget = value.parse()?,
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "fault_inject" => self.fault_inject = parse_bool(key, value)?,
            "widths" | "width" => self.widths = parse_list("widths", value)?,
            "meter" => self.meter = parse_bool(key, value)?,
            "warn_rejected" => self.warn_rejected = parse_bool(key, value)?,
            "placement" => {
                self.placement = PlacementPolicy::from_name(value)
                    .ok_or_else(|| Error::Parse(format!("placement: expected rack-spread or uniform, got {value:?}")))?
            }
            "oracle" => self.oracle = parse_bool(key, value)?,
            other => return Err(Error::Parse(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", n + 1)))?;
            self.set(key, value).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    /// Seed of trial `t`: the listed seeds, continued by counting up from the last.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        match self.seeds.get(trial) {
            Some(&s) => s,
            None => {
                let last = self.seeds.last().copied().unwrap_or(0);
                last + (trial + 1 - self.seeds.len()) as u64
            }
        }
    }

    fn first_seed(&self) -> u64 {
        self.trial_seed(0)
    }

    fn cost_tuples(&self, default: impl FnOnce() -> Vec<CostTuple>) -> Result<Vec<CostTuple>> {
        match &self.tuples {
            None => Ok(default()),
            Some(raw) => raw
                .iter()
                .map(|v| match v[..] {
                    [k, p, q, n, r] => Ok(CostTuple::new(k, p, q, n, r)),
                    _ => Err(Error::Parse(format!("expected K,P,Q,N,r tuples, got {v:?}"))),
                })
                .collect(),
        }
    }

    fn locality_tuples(&self) -> Result<Vec<LocalityTuple>> {
        match &self.tuples {
            None => Ok(TABLE_II.iter().map(|p| p.tuple).collect()),
            Some(raw) => raw
                .iter()
                .map(|v| match v[..] {
                    [k, p, rf, n] => Ok(LocalityTuple::new(k, p, rf, n)),
                    _ => Err(Error::Parse(format!("expected K,P,r_f,N tuples, got {v:?}"))),
                })
                .collect(),
        }
    }
}

/// Tuples that are shuffle-valid for all schemes: the valid published rows
/// followed by a generated sweep.
pub fn verification_tuples() -> Vec<CostTuple> {
    let mut tuples: Vec<CostTuple> = published::tuples().into_iter().filter(analysis::shuffle_valid).collect();
    tuples.extend(analysis::valid_tuple_sweep(30, 20, 30_000));
    tuples
}

/// A tuple (or tuple/scheme) excluded from a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub tuple: String,
    pub scheme: Option<Scheme>,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "# rejected {}", self.tuple)?;
        if let Some(s) = self.scheme {
            write!(f, " scheme={s}")?;
        }
        write!(f, " reason={}", self.reason)
    }
}

/// Rendered output plus the counts that decide the exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub failures: usize,
    pub rejected: usize,
    pub warn_rejected: bool,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.failures == 0 && (self.rejected == 0 || self.warn_rejected)
    }

    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }
}

/// Runs the configured mode and writes the output file if one is set.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let outcome = match config.mode {
        Mode::Costs => run_costs(config)?.outcome(config),
        Mode::ShuffleVerify => run_verify(config)?.outcome(config),
        Mode::Locality => run_locality(config)?.outcome(config),
    };
    if let Some(path) = &config.out {
        std::fs::write(path, &outcome.text).map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))?;
    }
    Ok(outcome)
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - cell.chars().count();
            s.push_str(&" ".repeat(pad));
            s.push_str(cell);
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&mut header.iter().copied());
    out.push_str(&line(&mut widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str)));
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

fn csv_or_table(format: Format, header: &str, rows: &[String]) -> String {
    match format {
        Format::Csv => {
            let mut out = format!("{header}\n");
            for r in rows {
                out.push_str(r);
                out.push('\n');
            }
            out
        }
        Format::Table => {
            let head: Vec<&str> = header.split(',').collect();
            let cells: Vec<Vec<String>> = rows.iter().map(|r| r.split(',').map(String::from).collect()).collect();
            render_table(&head, &cells)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub rows: Vec<ComparisonRow>,
    pub rejected: Vec<Rejection>,
    /// Published cells that disagree with the formulas, for tuples in the run.
    pub anomalies: Vec<published::Cell>,
    /// Rows whose meters disagree with the formulas.
    pub failures: Vec<String>,
}

impl CostReport {
    pub fn render(&self, format: Format) -> String {
        let rows: Vec<String> = self.rows.iter().map(ComparisonRow::csv).collect();
        let mut out = csv_or_table(format, CSV_HEADER, &rows);
        for r in &self.rejected {
            writeln!(out, "{r}").unwrap();
        }
        for a in &self.anomalies {
            writeln!(out, "# anomaly {a}").unwrap();
        }
        for f in &self.failures {
            writeln!(out, "# FAIL {f}").unwrap();
        }
        out
    }

    fn outcome(&self, config: &ExperimentConfig) -> Outcome {
        Outcome {
            text: self.render(config.format),
            failures: self.failures.len(),
            rejected: self.rejected.len(),
            warn_rejected: config.warn_rejected,
        }
    }
}

/// Analytic costs per `(tuple, scheme)`, with shuffle meters when enabled.
pub fn run_costs(config: &ExperimentConfig) -> Result<CostReport> {
    let tuples = config.cost_tuples(published::tuples)?;
    let width = config.widths.first().copied().unwrap_or(1);
    let mut report = CostReport { rows: Vec::new(), rejected: Vec::new(), anomalies: Vec::new(), failures: Vec::new() };
    let mut valid = Vec::new();
    for t in &tuples {
        let (rows, rejected) = compare(t);
        for (scheme, e) in rejected {
            report.rejected.push(Rejection { tuple: t.csv(), scheme: Some(scheme), reason: e.to_string() });
        }
        valid.push(rows);
    }
    for mut rows in valid {
        for row in &mut rows {
            if !config.meter {
                continue;
            }
            let t = row.tuple;
            let topology = ClusterTopology::new(t.servers, t.racks)?;
            let params = t.params(row.scheme());
            if params.check_shuffle(&topology).is_err() {
                continue;
            }
            let sim = simulate(&topology, &params, width, config.first_seed())?;
            row.meter = Some((sim.run.report.intra, sim.run.report.cross));
            if row.delta().is_some_and(|d| d != num_rational::BigRational::from_integer(0.into())) {
                report.failures.push(format!("{} {} meter differs from formula", t.csv(), row.scheme()));
            }
        }
        report.rows.extend(rows);
    }
    for t in &tuples {
        if !report.anomalies.iter().any(|a| a.tuple == *t) {
            report.anomalies.extend(published::anomalies_for(t));
        }
    }
    Ok(report)
}

/// One `(tuple, scheme, B)` verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyCheck {
    pub tuple: CostTuple,
    pub scheme: Scheme,
    pub width: usize,
    pub meter: (u64, u64),
    pub meter_ok: bool,
    pub decode_ok: bool,
    pub diagnostic: Option<String>,
}

impl VerifyCheck {
    pub fn passed(&self) -> bool {
        self.meter_ok && self.decode_ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
    pub rejected: Vec<Rejection>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    pub fn render(&self, format: Format) -> String {
        let header = "K,P,Q,N,r,scheme,B,meter_int,meter_cro,meter,decode";
        let rows: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{},{},{},{},{},{},{}",
                    c.tuple.csv(),
                    c.scheme,
                    c.width,
                    c.meter.0,
                    c.meter.1,
                    if c.meter_ok { "ok" } else { "MISMATCH" },
                    if c.decode_ok { "ok" } else { "FAIL" }
                )
            })
            .collect();
        let mut out = csv_or_table(format, header, &rows);
        for c in &self.checks {
            if let Some(d) = &c.diagnostic {
                writeln!(out, "# FAIL {} {} B={}: {d}", c.tuple.csv(), c.scheme, c.width).unwrap();
            }
        }
        for r in &self.rejected {
            writeln!(out, "{r}").unwrap();
        }
        writeln!(
            out,
            "# summary checks={} failed={} rejected={}",
            self.checks.len(),
            self.failures(),
            self.rejected.len()
        )
        .unwrap();
        out
    }

    fn outcome(&self, config: &ExperimentConfig) -> Outcome {
        Outcome {
            text: self.render(config.format),
            failures: self.failures(),
            rejected: self.rejected.len(),
            warn_rejected: config.warn_rejected,
        }
    }
}

/// Shuffles every tuple under every scheme and width, comparing meters to
/// the formulas and every delivered value to the payload oracle.
pub fn run_verify(config: &ExperimentConfig) -> Result<VerifyReport> {
    let tuples = config.cost_tuples(verification_tuples)?;
    if config.widths.is_empty() || config.widths.contains(&0) {
        return Err(Error::param("payload widths must be positive"));
    }
    let mut report = VerifyReport { checks: Vec::new(), rejected: Vec::new() };
    let mut runnable = Vec::new();
    for t in &tuples {
        for scheme in Scheme::ALL {
            let checked = ClusterTopology::new(t.servers, t.racks).and_then(|topo| {
                analysis::cost(t, scheme)?;
                t.params(scheme).check_shuffle(&topo)?;
                Ok(topo)
            });
            match checked {
                Ok(topo) => runnable.push((*t, scheme, topo)),
                Err(e) => report.rejected.push(Rejection { tuple: t.csv(), scheme: Some(scheme), reason: e.to_string() }),
            }
        }
    }
    for (t, scheme, topology) in runnable {
        let formula = analysis::cost(&t, scheme)?;
        for &width in &config.widths {
            let params = t.params(scheme);
            let mut sim = simulate(&topology, &params, width, config.first_seed())?;
            let meter = (sim.run.report.intra, sim.run.report.cross);
            let meter_ok = ComparisonRow { tuple: t, analytic: formula.clone(), meter: Some(meter) }
                .delta()
                .is_some_and(|d| d == num_rational::BigRational::from_integer(0.into()));
            if config.fault_inject {
                let key = *sim.assignment.reduce_keys(1).start();
                sim.run.delivered.flip_bit(1, key, t.subfiles, 0);
            }
            let check = sim.verify();
            let mut diagnostic = check.first_mismatch.map(|m| format!("decode mismatch at {m}"));
            if !meter_ok {
                let m = format!(
                    "meter intra {} cross {} vs formula intra {} cross {}",
                    meter.0,
                    meter.1,
                    analysis::format_rational(&formula.intra),
                    analysis::format_rational(&formula.cross)
                );
                diagnostic = Some(diagnostic.map_or(m.clone(), |d| format!("{d}; {m}")));
            }
            report.checks.push(VerifyCheck { tuple: t, scheme, width, meter, meter_ok, decode_ok: check.ok, diagnostic });
        }
    }
    Ok(report)
}

/// Per-trial percentages of one method on one tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalitySeries {
    pub tuple: LocalityTuple,
    pub method: Method,
    pub node: Vec<f64>,
    pub rack: Vec<f64>,
    pub objective: Vec<f64>,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

impl LocalitySeries {
    fn new(tuple: LocalityTuple, method: Method) -> Self {
        LocalitySeries { tuple, method, node: Vec::new(), rack: Vec::new(), objective: Vec::new() }
    }

    pub fn node_mean(&self) -> f64 {
        mean(&self.node)
    }

    pub fn rack_mean(&self) -> f64 {
        mean(&self.rack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub series: Vec<LocalitySeries>,
    pub rejected: Vec<Rejection>,
    pub failures: Vec<String>,
    pub trials: usize,
    pub lambda: f64,
}

impl LocalityReport {
    pub fn get(&self, tuple: &LocalityTuple, method: Method) -> Option<&LocalitySeries> {
        self.series.iter().find(|s| s.tuple == *tuple && s.method == method)
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = match format {
            Format::Csv => {
                let mut out =
                    String::from("K,P,r_f,N,method,trials,node_mean,node_std,rack_mean,rack_std,published_node,published_rack\n");
                for s in &self.series {
                    let published = published_locality(&s.tuple).map(|p| match s.method {
                        Method::Random => (p.node_random, p.rack_random),
                        _ => (p.node_opt, p.rack_opt),
                    });
                    let (pn, pr) = published.map_or((String::new(), String::new()), |(n, r)| (format!("{n:.2}"), format!("{r:.2}")));
                    writeln!(
                        out,
                        "{},{},{},{:.2},{:.2},{:.2},{:.2},{pn},{pr}",
                        s.tuple.csv(),
                        s.method,
                        s.node.len(),
                        s.node_mean(),
                        std_dev(&s.node),
                        s.rack_mean(),
                        std_dev(&s.rack)
                    )
                    .unwrap();
                }
                out
            }
            Format::Table => self.render_table(),
        };
        for r in &self.rejected {
            writeln!(out, "{r}").unwrap();
        }
        for f in &self.failures {
            writeln!(out, "# FAIL {f}").unwrap();
        }
        writeln!(out, "# trials={} lambda={}", self.trials, self.lambda).unwrap();
        out
    }

    /// Published layout: node and rack locality, random beside optimized.
    fn render_table(&self) -> String {
        let header = ["K", "P", "r_f", "N", "node Ran", "node Opt", "node Orc", "rack Ran", "rack Opt", "rack Orc"];
        let mut tuples: Vec<LocalityTuple> = Vec::new();
        for s in &self.series {
            if !tuples.contains(&s.tuple) {
                tuples.push(s.tuple);
            }
        }
        let cell = |t: &LocalityTuple, m: Method, node: bool| {
            self.get(t, m).map_or("-".to_string(), |s| {
                let v = if node { &s.node } else { &s.rack };
                format!("{:.2}±{:.2}", mean(v), std_dev(v))
            })
        };
        let rows: Vec<Vec<String>> = tuples
            .iter()
            .map(|t| {
                vec![
                    t.servers.to_string(),
                    t.racks.to_string(),
                    t.replicas.to_string(),
                    t.subfiles.to_string(),
                    cell(t, Method::Random, true),
                    cell(t, Method::Structured, true),
                    cell(t, Method::BruteForce, true),
                    cell(t, Method::Random, false),
                    cell(t, Method::Structured, false),
                    cell(t, Method::BruteForce, false),
                ]
            })
            .collect();
        render_table(&header, &rows)
    }

    fn outcome(&self, config: &ExperimentConfig) -> Outcome {
        Outcome {
            text: self.render(config.format),
            failures: self.failures.len(),
            rejected: self.rejected.len(),
            warn_rejected: config.warn_rejected,
        }
    }
}

/// Random versus optimized locality over `trials` seeded placements.
pub fn run_locality(config: &ExperimentConfig) -> Result<LocalityReport> {
    if config.trials == 0 {
        return Err(Error::param("trials must be positive"));
    }
    let weights = LocalityWeights::new(config.lambda)?;
    let tuples = config.locality_tuples()?;
    let mut report =
        LocalityReport { series: Vec::new(), rejected: Vec::new(), failures: Vec::new(), trials: config.trials, lambda: config.lambda };
    let mut runnable = Vec::new();
    for t in tuples {
        match t.check() {
            Ok(topo) => runnable.push((t, topo)),
            Err(e) => report.rejected.push(Rejection { tuple: t.csv(), scheme: None, reason: e.to_string() }),
        }
    }
    for (t, topology) in runnable {
        let params = t.params();
        let use_oracle = config.oracle && oracle_candidates(&topology, &params)? <= ORACLE_LIMIT;
        let mut random = LocalitySeries::new(t, Method::Random);
        let mut structured = LocalitySeries::new(t, Method::Structured);
        let mut oracle = LocalitySeries::new(t, Method::BruteForce);
        for trial in 0..config.trials {
            let seed = config.trial_seed(trial);
            let placement = place_replicas_with(&topology, t.subfiles, t.replicas, seed, config.placement)?;
            let r = solve_random(&topology, &params, &placement, &weights, seed)?;
            let s = solve_structured(&topology, &params, &placement, &weights, config.budget, seed)?;
            if !r.feasible || !s.feasible {
                report.failures.push(format!("{} seed={seed}: infeasible result", t.csv()));
            }
            if s.objective < r.objective - 1e-9 {
                report.failures.push(format!("{} seed={seed}: structured objective below random", t.csv()));
            }
            for (series, res) in [(&mut random, &r), (&mut structured, &s)] {
                series.node.push(res.stats.node_pct);
                series.rack.push(res.stats.rack_pct);
                series.objective.push(res.objective);
            }
            if use_oracle {
                let o = brute_force_oracle(&topology, &params, &placement, &weights)?;
                if s.objective > o.objective + 1e-9 {
                    report.failures.push(format!("{} seed={seed}: structured objective above oracle", t.csv()));
                }
                oracle.node.push(o.stats.node_pct);
                oracle.rack.push(o.stats.rack_pct);
                oracle.objective.push(o.objective);
            }
        }
        report.series.push(random);
        report.series.push(structured);
        if use_oracle {
            report.series.push(oracle);
        }
    }
    Ok(report)
}
