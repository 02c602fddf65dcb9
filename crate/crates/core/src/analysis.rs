//! Closed-form shuffle costs, ratio bounds and scheme comparison.
//!
//! All costs are exact rationals in units of `<key, value>` pairs:
//!
//! | scheme  | intra-rack                               | cross-rack           |
//! |---------|------------------------------------------|----------------------|
//! | uncoded | `QN(1/P − 1/K)`                          | `QN(1 − 1/P)`        |
//! | coded   | `L·P·C(K/P, r+1)/C(K, r+1)`              | `L − intra`          |
//! | hybrid  | `QN(1 − P/K)`                            | `(QN/r)(1 − r/P)`    |
//!
//! where `L = (QN/r)(1 − r/K)` is the coded total.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::assignment::{JobParams, Scheme};
use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::topology::ClusterTopology;

/// A `(K, P, Q, N, r)` parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CostTuple {
    pub servers: usize,
    pub racks: usize,
    pub keys: usize,
    pub subfiles: usize,
    pub replication: usize,
}

impl CostTuple {
    pub const fn new(servers: usize, racks: usize, keys: usize, subfiles: usize, replication: usize) -> Self {
        CostTuple { servers, racks, keys, subfiles, replication }
    }

    pub fn params(&self, scheme: Scheme) -> JobParams {
        match scheme {
            Scheme::Uncoded => JobParams::uncoded(self.subfiles, self.keys),
            Scheme::Coded => JobParams::coded(self.subfiles, self.keys, self.replication),
            Scheme::Hybrid => JobParams::hybrid(self.subfiles, self.keys, self.replication),
        }
    }

    /// `K,P,Q,N,r` as it appears in CSV output.
    pub fn csv(&self) -> String {
        format!("{},{},{},{},{}", self.servers, self.racks, self.keys, self.subfiles, self.replication)
    }
}

impl fmt::Display for CostTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.csv())
    }
}

impl FromStr for CostTuple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = parse_usizes(s)?;
        match v[..] {
            [k, p, q, n, r] => Ok(CostTuple::new(k, p, q, n, r)),
            _ => Err(Error::Parse(format!("expected K,P,Q,N,r, got {s:?}"))),
        }
    }
}

pub(crate) fn parse_usizes(s: &str) -> Result<Vec<usize>> {
    s.trim_matches(|c| c == '(' || c == ')' || char::is_whitespace(c))
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Parse(format!("bad integer {x:?} in {s:?}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostBreakdown {
    pub scheme: Scheme,
    pub intra: BigRational,
    pub cross: BigRational,
    pub total: BigRational,
}

impl CostBreakdown {
    fn new(scheme: Scheme, intra: BigRational, cross: BigRational) -> Self {
        let total = &intra + &cross;
        CostBreakdown { scheme, intra, cross, total }
    }

    pub fn is_integral(&self) -> bool {
        self.intra.is_integer() && self.cross.is_integer()
    }
}

fn int(v: u128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn frac(n: u128, d: u128) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Renders a rational as an integer when it is one, else `num/den`.
pub fn format_rational(v: &BigRational) -> String {
    if v.is_integer() {
        v.to_integer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn rational_to_f64(v: &BigRational) -> f64 {
    v.numer().to_f64().unwrap_or(f64::NAN) / v.denom().to_f64().unwrap_or(f64::NAN)
}

/// Uncoded costs, evaluated without checking divisibility.
pub fn formula_uncoded(k: usize, p: usize, q: usize, n: usize) -> CostBreakdown {
    let qn = int((q * n) as u128);
    let intra = &qn * (frac(1, p as u128) - frac(1, k as u128));
    let cross = &qn * (int(1) - frac(1, p as u128));
    CostBreakdown::new(Scheme::Uncoded, intra, cross)
}

/// Coded costs, evaluated without checking divisibility.
pub fn formula_coded(k: usize, p: usize, q: usize, n: usize, r: usize) -> CostBreakdown {
    let total = frac((q * n) as u128, r as u128) * (int(1) - frac(r as u128, k as u128));
    let same_rack = binomial(k / p, r + 1);
    let all = binomial(k, r + 1);
    let intra = if all == 0 { BigRational::zero() } else { &total * frac(same_rack * p as u128, all) };
    let cross = &total - &intra;
    CostBreakdown::new(Scheme::Coded, intra, cross)
}

/// Hybrid costs, evaluated without checking divisibility.
pub fn formula_hybrid(k: usize, p: usize, q: usize, n: usize, r: usize) -> CostBreakdown {
    let qn = int((q * n) as u128);
    let cross = frac((q * n) as u128, r as u128) * (int(1) - frac(r as u128, p as u128));
    let intra = &qn * (int(1) - frac(p as u128, k as u128));
    CostBreakdown::new(Scheme::Hybrid, intra, cross)
}

fn need(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Parameter(msg()))
    }
}

fn base_checks(k: usize, p: usize, q: usize, n: usize) -> Result<()> {
    ClusterTopology::new(k, p)?;
    need(q > 0 && n > 0, || "Q and N must be positive".into())
}

/// Requires `K | N`, `P | K`, `K | Q`.
pub fn cost_uncoded(k: usize, p: usize, q: usize, n: usize) -> Result<CostBreakdown> {
    base_checks(k, p, q, n)?;
    need(n % k == 0, || format!("K ∤ N ({k} ∤ {n})"))?;
    need(q % k == 0, || format!("K ∤ Q ({k} ∤ {q})"))?;
    Ok(formula_uncoded(k, p, q, n))
}

/// Requires `C(K,r) | N`, `P | K`, `K | Q` and `1 <= r < K`.
pub fn cost_coded(k: usize, p: usize, q: usize, n: usize, r: usize) -> Result<CostBreakdown> {
    base_checks(k, p, q, n)?;
    need(r >= 1 && r < k, || format!("need 1 <= r < K (r={r}, K={k})"))?;
    let c = binomial(k, r);
    need(n as u128 % c == 0, || format!("C(K,r) ∤ N ({c} ∤ {n})"))?;
    need(q % k == 0, || format!("K ∤ Q ({k} ∤ {q})"))?;
    Ok(formula_coded(k, p, q, n, r))
}

/// Requires `C(P,r) | NP/K`, `P | K`, `P | Q` and `1 <= r <= P`.
pub fn cost_hybrid(k: usize, p: usize, q: usize, n: usize, r: usize) -> Result<CostBreakdown> {
    base_checks(k, p, q, n)?;
    need(r >= 1 && r <= p, || format!("need 1 <= r <= P (r={r}, P={p})"))?;
    need((n * p) % k == 0, || format!("K ∤ NP ({k} ∤ {})", n * p))?;
    let c = binomial(p, r);
    need((n * p / k) as u128 % c == 0, || format!("C(P,r) ∤ NP/K ({c} ∤ {})", n * p / k))?;
    need(q % p == 0, || format!("P ∤ Q ({p} ∤ {q})"))?;
    Ok(formula_hybrid(k, p, q, n, r))
}

pub fn cost(tuple: &CostTuple, scheme: Scheme) -> Result<CostBreakdown> {
    let CostTuple { servers: k, racks: p, keys: q, subfiles: n, replication: r } = *tuple;
    match scheme {
        Scheme::Uncoded => cost_uncoded(k, p, q, n),
        Scheme::Coded => cost_coded(k, p, q, n, r),
        Scheme::Hybrid => cost_hybrid(k, p, q, n, r),
    }
}

/// Bounds on how hybrid and coded compare, next to the exact ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioBounds {
    /// Lower bound on `L_cro^Cod / L_cro^Hyb`:
    /// `(1 − r/K)/(1 − r/P) · (1 − e^{r+1}/P^r)`.
    pub cross_lower: f64,
    /// Upper bound on `L_int^Hyb / L_int^Cod`: `r(K−P)/(K−r) · e^{r+1} P^r`.
    pub intra_upper: f64,
    pub exact_cross_ratio: BigRational,
    /// `None` when the coded scheme has no intra-rack traffic.
    pub exact_intra_ratio: Option<BigRational>,
}

impl RatioBounds {
    pub fn cross_holds(&self) -> bool {
        self.cross_lower <= 0.0 || rational_to_f64(&self.exact_cross_ratio) >= self.cross_lower
    }

    pub fn intra_holds(&self) -> bool {
        self.exact_intra_ratio
            .as_ref()
            .map_or(true, |x| rational_to_f64(x) <= self.intra_upper)
    }
}

/// Both ratios are independent of `Q` and `N`. Requires `r < P` and `P | K`.
pub fn ratio_bounds(k: usize, p: usize, r: usize) -> Result<RatioBounds> {
    ClusterTopology::new(k, p)?;
    need(r >= 1 && r < p, || format!("ratio bounds need 1 <= r < P (r={r}, P={p})"))?;
    let (kf, pf, rf) = (k as f64, p as f64, r as f64);
    let e_pow = (rf + 1.0).exp();
    let cross_lower = (1.0 - rf / kf) / (1.0 - rf / pf) * (1.0 - e_pow / pf.powi(r as i32));
    let intra_upper = rf * (kf - pf) / (kf - rf) * e_pow * pf.powi(r as i32);
    let cod = formula_coded(k, p, 1, 1, r);
    let hyb = formula_hybrid(k, p, 1, 1, r);
    let exact_cross_ratio = &cod.cross / &hyb.cross;
    let exact_intra_ratio = (!cod.intra.is_zero()).then(|| &hyb.intra / &cod.intra);
    Ok(RatioBounds { cross_lower, intra_upper, exact_cross_ratio, exact_intra_ratio })
}

/// One `(tuple, scheme)` line of a comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRow {
    pub tuple: CostTuple,
    pub analytic: CostBreakdown,
    /// Metered `(intra, cross)` units from a simulated shuffle, if one was run.
    pub meter: Option<(u64, u64)>,
}

impl ComparisonRow {
    pub fn scheme(&self) -> Scheme {
        self.analytic.scheme
    }

    /// `|meter_int − L_int| + |meter_cro − L_cro|`.
    pub fn delta(&self) -> Option<BigRational> {
        self.meter.map(|(mi, mc)| {
            (int(mi as u128) - &self.analytic.intra).abs() + (int(mc as u128) - &self.analytic.cross).abs()
        })
    }

    /// `K,P,Q,N,r,scheme,L_int,L_cro,L_tot,meter_int,meter_cro,delta`.
    pub fn csv(&self) -> String {
        let (mi, mc) = match self.meter {
            Some((i, c)) => (i.to_string(), c.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.tuple.csv(),
            self.scheme(),
            format_rational(&self.analytic.intra),
            format_rational(&self.analytic.cross),
            format_rational(&self.analytic.total),
            mi,
            mc,
            self.delta().map(|d| format_rational(&d)).unwrap_or_default()
        )
    }
}

pub const CSV_HEADER: &str = "K,P,Q,N,r,scheme,L_int,L_cro,L_tot,meter_int,meter_cro,delta";

/// Analytic rows for every scheme the tuple is valid for, plus the
/// per-scheme parameter errors for the others.
pub fn compare(tuple: &CostTuple) -> (Vec<ComparisonRow>, Vec<(Scheme, Error)>) {
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for scheme in Scheme::ALL {
        match cost(tuple, scheme) {
            Ok(analytic) => rows.push(ComparisonRow { tuple: *tuple, analytic, meter: None }),
            Err(e) => rejected.push((scheme, e)),
        }
    }
    (rows, rejected)
}

/// Whether every scheme can be both assigned and shuffled for this tuple.
pub fn shuffle_valid(tuple: &CostTuple) -> bool {
    let Ok(topology) = ClusterTopology::new(tuple.servers, tuple.racks) else {
        return false;
    };
    Scheme::ALL.iter().all(|&s| tuple.params(s).check_shuffle(&topology).is_ok())
}

/// Deterministic set of tuples (not from the published table) that are
/// shuffle-valid for all three schemes, with `K <= max_servers`, `2 <= r <= 3`,
/// `Q = K` and the smallest valid `N`, keeping `Q·N <= max_work`. `count`
/// tuples are taken evenly spaced from the candidates ordered by `K`.
pub fn valid_tuple_sweep(max_servers: usize, count: usize, max_work: usize) -> Vec<CostTuple> {
    let mut candidates = Vec::new();
    for k in 4..=max_servers {
        for p in (2..=k).filter(|p| k % p == 0) {
            for r in 2..=p.min(3) {
                let found = (1..)
                    .map(|m| m * k)
                    .take_while(|&n| n * k <= max_work)
                    .map(|n| CostTuple::new(k, p, k, n, r))
                    .find(shuffle_valid);
                if let Some(t) = found {
                    if published::row_of(&t).is_none() {
                        candidates.push(t);
                    }
                }
            }
        }
    }
    if candidates.len() <= count {
        return candidates;
    }
    (0..count).map(|i| candidates[i * (candidates.len() - 1) / (count - 1).max(1)]).collect()
}

/// Reference copy of the published cost comparison table (values ×1000),
/// with each cell checked against the formulas.
pub mod published {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct PublishedRow {
        pub tuple: CostTuple,
        /// Unc, Cod, Hyb.
        pub cross: [&'static str; 3],
        /// Unc, Cod, Hyb.
        pub intra: [&'static str; 3],
    }

    pub const SCALE: u128 = 1000;

    pub const TABLE_I: [PublishedRow; 9] = [
        PublishedRow { tuple: CostTuple::new(9, 3, 18, 72, 2), cross: ["0.864", "0.486", "0.216"], intra: ["0.288", "0.018", "0.864"] },
        PublishedRow { tuple: CostTuple::new(16, 4, 16, 240, 2), cross: ["2.88", "1.632", "0.96"], intra: ["0.72", "0.048", "2.88"] },
        PublishedRow { tuple: CostTuple::new(16, 4, 16, 1680, 3), cross: ["20.16", "6.976", "2.24"], intra: ["5.04", "0.304", "20.16"] },
        PublishedRow { tuple: CostTuple::new(15, 3, 15, 210, 2), cross: ["2.1", "1.275", "0.525"], intra: ["0.84", "0.09", "2.520"] },
        PublishedRow { tuple: CostTuple::new(20, 4, 20, 380, 2), cross: ["5.7", "3.3", "1.9"], intra: ["1.52", "0.12", "0.608"] },
        PublishedRow { tuple: CostTuple::new(25, 5, 25, 600, 2), cross: ["12", "6.75", "4.5"], intra: ["2.4", "1.5", "12"] },
        PublishedRow { tuple: CostTuple::new(25, 5, 25, 6900, 3), cross: ["138", "50.6", "23"], intra: ["27.6", "0.1", "13.8"] },
        PublishedRow { tuple: CostTuple::new(30, 5, 30, 870, 2), cross: ["16.56", "11.88", "7.83"], intra: ["3.45", "0.3", "17.25"] },
        PublishedRow { tuple: CostTuple::new(30, 6, 30, 870, 2), cross: ["21.75", "12", "8.7"], intra: ["3.48", "0.18", "20.88"] },
    ];

    pub fn tuples() -> Vec<CostTuple> {
        TABLE_I.iter().map(|r| r.tuple).collect()
    }

    /// 1-based row number of `tuple` in the published table.
    pub fn row_of(tuple: &CostTuple) -> Option<usize> {
        TABLE_I.iter().position(|r| r.tuple == *tuple).map(|i| i + 1)
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
    pub enum Metric {
        Cross,
        Intra,
    }

    impl fmt::Display for Metric {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str(match self {
                Metric::Cross => "L_cro",
                Metric::Intra => "L_int",
            })
        }
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct Cell {
        pub row: usize,
        pub tuple: CostTuple,
        pub scheme: Scheme,
        pub metric: Metric,
        /// Published value scaled back to units.
        pub published: BigRational,
        /// Formula value, without divisibility checks.
        pub formula: BigRational,
    }

    impl Cell {
        pub fn consistent(&self) -> bool {
            self.published == self.formula
        }
    }

    impl fmt::Display for Cell {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(
                f,
                "row={} tuple={} scheme={} metric={} published={} formula={} status={}",
                self.row,
                self.tuple,
                self.scheme,
                self.metric,
                format_rational(&self.published),
                format_rational(&self.formula),
                if self.consistent() { "consistent" } else { "typo-suspect" }
            )
        }
    }

    /// Parses a plain decimal string exactly.
    pub fn parse_decimal(s: &str) -> Result<BigRational> {
        let (whole, fraction) = s.split_once('.').unwrap_or((s, ""));
        let digits = format!("{whole}{fraction}");
        let numer: BigInt = digits.parse().map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let denom = BigInt::from(10u32).pow(fraction.len() as u32);
        Ok(BigRational::new(numer, denom))
    }

    fn cells_of(row: usize, entry: &PublishedRow) -> Vec<Cell> {
        let CostTuple { servers: k, racks: p, keys: q, subfiles: n, replication: r } = entry.tuple;
        let formulas = [formula_uncoded(k, p, q, n), formula_coded(k, p, q, n, r), formula_hybrid(k, p, q, n, r)];
        let mut cells = Vec::new();
        for (metric, values) in [(Metric::Cross, &entry.cross), (Metric::Intra, &entry.intra)] {
            for (i, scheme) in Scheme::ALL.into_iter().enumerate() {
                let published = parse_decimal(values[i]).expect("embedded table is well-formed") * int(SCALE);
                let formula = match metric {
                    Metric::Cross => formulas[i].cross.clone(),
                    Metric::Intra => formulas[i].intra.clone(),
                };
                cells.push(Cell { row, tuple: entry.tuple, scheme, metric, published, formula });
            }
        }
        cells
    }

    /// All 54 published cells, annotated.
    pub fn cells() -> Vec<Cell> {
        TABLE_I.iter().enumerate().flat_map(|(i, e)| cells_of(i + 1, e)).collect()
    }

    /// Published cells that disagree with the formulas.
    pub fn anomalies() -> Vec<Cell> {
        cells().into_iter().filter(|c| !c.consistent()).collect()
    }

    /// Anomalies in the published row matching `tuple`, if any.
    pub fn anomalies_for(tuple: &CostTuple) -> Vec<Cell> {
        match row_of(tuple) {
            Some(row) => cells_of(row, &TABLE_I[row - 1]).into_iter().filter(|c| !c.consistent()).collect(),
            None => Vec::new(),
        }
    }

    /// Published cross-rack value for `(tuple, scheme)`, in units.
    pub fn value(tuple: &CostTuple, scheme: Scheme, metric: Metric) -> Option<BigRational> {
        let row = row_of(tuple)?;
        cells_of(row, &TABLE_I[row - 1])
            .into_iter()
            .find(|c| c.scheme == scheme && c.metric == metric)
            .map(|c| c.published)
    }
}
