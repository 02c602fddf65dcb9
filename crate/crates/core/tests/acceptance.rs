//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Expected values come either from the published tables or from counting
//! transmissions combinatorially here, independently of `hcmr::analysis`.

use std::collections::BTreeSet;
use std::time::Instant;

use hcmr::analysis::{self, published, CostTuple};
use hcmr::assignment::JobParams;
use hcmr::experiment::{self, ExperimentConfig, LocalityTuple, Mode, TABLE_II};
use hcmr::optimizer::{
    brute_force_oracle, check_constraints, solve_random, solve_structured, xy_from_assignment, Budget, Constraint,
};
use hcmr::placement::{place_replicas, LocalityWeights};
use hcmr::shuffle::simulate;
use hcmr::{ClusterTopology, Scheme};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = Ratio<i128>;

fn choose(n: usize, k: usize) -> i128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

fn q(v: i128) -> Q {
    Q::from_integer(v)
}

/// Transmission counts by construction: `(intra, cross)`.
fn counted_cost(t: &CostTuple, scheme: Scheme) -> (Q, Q) {
    let (k, p, qk, n, r) = (t.servers as i128, t.racks as i128, t.keys as i128, t.subfiles as i128, t.replication as i128);
    let kr = k / p;
    match scheme {
        Scheme::Uncoded => {
            // each server fetches its Q/K keys of every subfile it did not map
            let same = q(k) * (q(qk) / k) * (kr - 1) * (q(n) / k);
            let other = q(k) * (q(qk) / k) * (k - kr) * (q(n) / k);
            (same, other)
        }
        Scheme::Coded => {
            let j = q(n) / choose(t.servers, t.replication);
            let per_group = q(r + 1) * (q(qk) / k) * (j / r);
            let inside = p * choose(t.servers / t.racks, t.replication + 1);
            let all = choose(t.servers, t.replication + 1);
            (per_group * inside, per_group * (all - inside))
        }
        Scheme::Hybrid => {
            let m = q(n * p / k) / choose(t.racks, t.replication);
            let cross = q(kr) * choose(t.racks, t.replication + 1) * (r + 1) * (q(qk) / p) * (m / r);
            let intra = q(k) * (q(qk) / k) * (q(n) - q(n * p) / k);
            (intra, cross)
        }
    }
}

fn to_q(v: &num_rational::BigRational) -> Q {
    let n: i128 = v.numer().try_into().expect("fits i128");
    let d: i128 = v.denom().try_into().expect("fits i128");
    Q::new(n, d)
}

fn f(v: Q) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn ok(detail: impl Into<String>) -> Outcome {
    Outcome { passed: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { passed: false, detail: detail.into() }
}

fn exact_row(t: CostTuple, expected: [(Scheme, i128, i128); 3]) -> Outcome {
    let topo = ClusterTopology::new(t.servers, t.racks).unwrap();
    for (scheme, cross, intra) in expected {
        let analytic = analysis::cost(&t, scheme).unwrap();
        if to_q(&analytic.cross) != q(cross) || to_q(&analytic.intra) != q(intra) {
            return fail(format!("{scheme} analytic ({}, {})", analytic.cross, analytic.intra));
        }
        let sim = simulate(&topo, &t.params(scheme), 1, 1).unwrap();
        if (sim.run.report.cross as i128, sim.run.report.intra as i128) != (cross, intra) {
            return fail(format!("{scheme} metered ({}, {})", sim.run.report.cross, sim.run.report.intra));
        }
    }
    ok(format!("{t} analytic and metered counts match for Unc/Cod/Hyb"))
}

fn sweep() -> Vec<CostTuple> {
    experiment::verification_tuples()
}

fn criterion_3(tuples: &[CostTuple]) -> Outcome {
    let generated = tuples.iter().filter(|t| published::row_of(t).is_none()).count();
    if generated < 20 {
        return fail(format!("only {generated} generated tuples"));
    }
    let from_table = tuples.len() - generated;
    for t in tuples {
        let topo = ClusterTopology::new(t.servers, t.racks).unwrap();
        for scheme in Scheme::ALL {
            let (intra, cross) = counted_cost(t, scheme);
            let analytic = analysis::cost(t, scheme).unwrap();
            if (to_q(&analytic.intra), to_q(&analytic.cross)) != (intra, cross) {
                return fail(format!("{t} {scheme}: formula ({}, {}) vs count ({intra}, {cross})", analytic.intra, analytic.cross));
            }
            let sim = simulate(&topo, &t.params(scheme), 1, 7).unwrap();
            if (q(sim.run.report.intra as i128), q(sim.run.report.cross as i128)) != (intra, cross) {
                return fail(format!("{t} {scheme}: meter ({}, {}) vs ({intra}, {cross})", sim.run.report.intra, sim.run.report.cross));
            }
        }
    }
    ok(format!("{} tuples ({from_table} published, {generated} generated) x 3 schemes, zero delta", tuples.len()))
}

fn criterion_4(tuples: &[CostTuple]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut runs = 0;
    for t in tuples {
        let topo = ClusterTopology::new(t.servers, t.racks).unwrap();
        for scheme in Scheme::ALL {
            for width in [1usize, 8] {
                let sim = simulate(&topo, &t.params(scheme), width, 11).unwrap();
                if !sim.verify().ok {
                    return fail(format!("{t} {scheme} B={width}: {:?}", sim.verify().first_mismatch));
                }
                let flat = rng.gen_range(1..=t.servers);
                let keys = sim.assignment.reduce_keys(flat);
                let key = rng.gen_range(keys);
                let subfile = rng.gen_range(1..=t.subfiles);
                let bit = rng.gen_range(0..8 * width);
                let mut delivered = sim.run.delivered.clone();
                delivered.flip_bit(flat, key, subfile, bit);
                let check = hcmr::shuffle::verify_delivery(&delivered, &sim.assignment, sim.outputs.oracle());
                let caught = check.first_mismatch.is_some_and(|m| (m.server, m.key, m.subfile) == (flat, key, subfile));
                if check.ok || !caught {
                    return fail(format!("{t} {scheme} B={width}: flip at ({flat},{key},{subfile},{bit}) not detected"));
                }
                runs += 1;
            }
        }
    }
    ok(format!("{runs} runs decoded byte-exact at B in {{1, 8}}; {runs} injected bit flips all detected"))
}

fn criterion_5() -> Outcome {
    let mut expected = BTreeSet::new();
    for (row, entry) in published::TABLE_I.iter().enumerate() {
        for (s, scheme) in Scheme::ALL.into_iter().enumerate() {
            let (intra, cross) = counted_cost(&entry.tuple, scheme);
            let pub_cross = to_q(&published::parse_decimal(entry.cross[s]).unwrap()) * 1000;
            let pub_intra = to_q(&published::parse_decimal(entry.intra[s]).unwrap()) * 1000;
            if pub_cross != cross {
                expected.insert((row + 1, scheme, published::Metric::Cross));
            }
            if pub_intra != intra {
                expected.insert((row + 1, scheme, published::Metric::Intra));
            }
        }
    }
    let flagged: BTreeSet<_> = published::anomalies().iter().map(|c| (c.row, c.scheme, c.metric)).collect();
    if flagged != expected {
        return fail(format!("flagged {flagged:?}, expected {expected:?}"));
    }
    for must in [(3, Scheme::Coded), (5, Scheme::Hybrid), (7, Scheme::Hybrid)] {
        if !flagged.contains(&(must.0, must.1, published::Metric::Intra)) {
            return fail(format!("row {} {} intra not flagged", must.0, must.1));
        }
    }
    let config = ExperimentConfig { meter: false, ..Default::default() };
    let report = experiment::run_costs(&config).unwrap();
    let text = report.render(experiment::Format::Csv);
    let lines = text.lines().filter(|l| l.starts_with("# anomaly") && l.ends_with("typo-suspect")).count();
    if lines != expected.len() {
        return fail(format!("runner printed {lines} anomaly lines, expected {}", expected.len()));
    }
    ok(format!("{} typo-suspect cells flagged, exactly the formula-inconsistent set (incl. row 3 Cod intra, rows 5 and 7 Hyb intra)", expected.len()))
}

fn criterion_6(tuples: &[CostTuple]) -> Outcome {
    let mut checked = 0;
    for t in tuples.iter().filter(|t| t.replication < t.racks) {
        let (kf, pf, rf) = (t.servers as f64, t.racks as f64, t.replication as f64);
        let e = (rf + 1.0).exp();
        let lower = (1.0 - rf / kf) / (1.0 - rf / pf) * (1.0 - e / pf.powi(t.replication as i32));
        let upper = rf * (kf - pf) / (kf - rf) * e * pf.powi(t.replication as i32);
        let (cod_int, cod_cro) = counted_cost(t, Scheme::Coded);
        let (hyb_int, hyb_cro) = counted_cost(t, Scheme::Hybrid);
        if lower > 0.0 && f(cod_cro / hyb_cro) < lower {
            return fail(format!("{t}: cross ratio {} below bound {lower}", f(cod_cro / hyb_cro)));
        }
        if cod_int > q(0) && f(hyb_int / cod_int) > upper {
            return fail(format!("{t}: intra ratio {} above bound {upper}", f(hyb_int / cod_int)));
        }
        let b = analysis::ratio_bounds(t.servers, t.racks, t.replication).unwrap();
        if to_q(&b.exact_cross_ratio) != cod_cro / hyb_cro || !b.cross_holds() || !b.intra_holds() {
            return fail(format!("{t}: library ratio bounds disagree"));
        }
        checked += 1;
    }
    ok(format!("{checked} tuples with r < P, zero violations"))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let w = LocalityWeights::default();
    let instances = [(4, 2, 4), (4, 2, 8), (6, 3, 6), (6, 2, 12), (8, 2, 8)];
    for (k, p, n) in instances {
        let topo = ClusterTopology::new(k, p).unwrap();
        let params = JobParams::hybrid(n, k, 2);
        for seed in 0..3 {
            let placement = place_replicas(&topo, n, 2, 100 + seed).unwrap();
            let oracle = brute_force_oracle(&topo, &params, &placement, &w).unwrap();
            let structured = solve_structured(&topo, &params, &placement, &w, Budget::Exhaustive, seed).unwrap();
            if (structured.objective - oracle.objective).abs() > 1e-9 || !structured.feasible {
                return fail(format!("K={k} P={p} N={n} seed={seed}: structured {} vs oracle {}", structured.objective, oracle.objective));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 120.0 {
        return fail(format!("took {secs:.1}s"));
    }
    ok(format!("{} instances x 3 placement seeds match the oracle optimum ({secs:.1}s)", instances.len()))
}

fn criterion_8() -> Outcome {
    let tuples = [(4, 2, 4), (6, 3, 12), (8, 2, 16), (8, 4, 24), (9, 3, 18), (10, 5, 20), (12, 3, 24), (16, 4, 48), (20, 5, 40), (21, 3, 42)];
    let mut count = 0;
    for seed in 0..100u64 {
        for &(k, p, n) in &tuples {
            let topo = ClusterTopology::new(k, p).unwrap();
            let params = JobParams::hybrid(n, k, 2);
            let placement = place_replicas(&topo, n, 2, seed).unwrap();
            let r = solve_random(&topo, &params, &placement, &LocalityWeights::default(), seed).unwrap();
            let (x, y) = xy_from_assignment(&r.assignment).unwrap();
            let report = check_constraints(&x, &y, &topo, r.assignment.per_subset()).unwrap();
            if !report.passed() || !r.feasible {
                return fail(format!("K={k} N={n} seed={seed}: {report}"));
            }
            count += 1;
        }
    }
    // hand corruptions, one family per constraint, on several instances
    let mut caught = 0;
    let mut total = 0;
    for &(k, p, n) in &tuples[1..] {
        let topo = ClusterTopology::new(k, p).unwrap();
        let params = JobParams::hybrid(n, k, 2);
        let a = hcmr::optimizer::random_assignment(&topo, &params, 5).unwrap();
        let m = a.per_subset();
        let (x, y) = xy_from_assignment(&a).unwrap();
        let s = a.as_map().servers_of(1).to_vec();
        let (j, l) = (s[0].flat, s[1].flat);
        let kr = topo.servers_per_rack();
        let mut cases: Vec<(Constraint, hcmr::optimizer::PairIndicator, hcmr::optimizer::ServerGraph)> = Vec::new();
        // (1): a subfile and an edge inside a rack (needs two servers per rack)
        if kr >= 2 {
            let mate = if s[0].slot == 1 { j + 1 } else { j - 1 };
            let mut x1 = x.clone();
            let mut y1 = y.clone();
            x1.set(1, j, l, false);
            x1.set(1, j, mate, true);
            y1.set(j, mate, true);
            cases.push((Constraint::NoCommonFilesInRack, x1, y1));
        }
        // (2): drop one subfile from a pair
        let mut x2 = x.clone();
        x2.set(1, j, l, false);
        cases.push((Constraint::CommonSubfiles, x2, y.clone()));
        // (3): remove an edge, leaving both ends short
        let mut y3 = y.clone();
        y3.set(j, l, false);
        cases.push((Constraint::Degree, x.clone(), y3));
        // (4): connect j to a server of another layer in a third rack
        let rack_of = |o: usize| topo.unflatten(o).unwrap().rack;
        if let Some(other) = (1..=k).find(|&o| rack_of(o) != s[0].rack && o != l && !y.get(j, o)) {
            let mut y4 = y.clone();
            y4.set(j, other, true);
            cases.push((Constraint::Transitivity, x.clone(), y4));
        }
        for (constraint, xc, yc) in cases {
            total += 1;
            let report = check_constraints(&xc, &yc, &topo, m).unwrap();
            if report.get(constraint).passed() {
                return fail(format!("K={k} N={n}: {constraint} violation not caught"));
            }
            caught += 1;
        }
    }
    ok(format!("{count} random assignments feasible; {caught}/{total} hand-corrupted violations caught"))
}

fn criterion_9_and_locality_csv() -> (Outcome, String) {
    let config = ExperimentConfig {
        mode: Mode::Locality,
        trials: 100,
        seeds: vec![1],
        budget: Budget::Restarts(1),
        lambda: 0.75,
        oracle: false,
        ..Default::default()
    };
    let report = experiment::run_locality(&config).unwrap();
    let csv = report.render(experiment::Format::Csv);
    let mut worst_gap = f64::INFINITY;
    for row in TABLE_II {
        let t: LocalityTuple = row.tuple;
        let random = report.get(&t, hcmr::optimizer::Method::Random).unwrap();
        let opt = report.get(&t, hcmr::optimizer::Method::Structured).unwrap();
        let gap = opt.node_mean() - random.node_mean();
        worst_gap = worst_gap.min(gap);
        if gap < 25.0 {
            return (fail(format!("{t}: optimized node {:.2} vs random {:.2}", opt.node_mean(), random.node_mean())), csv);
        }
        if opt.rack_mean() < random.rack_mean() {
            return (fail(format!("{t}: optimized rack {:.2} < random {:.2}", opt.rack_mean(), random.rack_mean())), csv);
        }
        if (random.node_mean() - row.node_random).abs() > 10.0 {
            return (fail(format!("{t}: random node {:.2} vs published {}", random.node_mean(), row.node_random)), csv);
        }
    }
    (ok(format!("10 rows x 100 seeds: optimized node% beats random by >= {worst_gap:.1} points; rack% never lower; random node% within 10 points of published")), csv)
}

fn full_suite_csv(locality: Option<String>) -> String {
    let costs = experiment::run_costs(&ExperimentConfig::default()).unwrap().render(experiment::Format::Csv);
    let verify_config = ExperimentConfig { mode: Mode::ShuffleVerify, ..Default::default() };
    let verify = experiment::run_verify(&verify_config).unwrap().render(experiment::Format::Csv);
    let locality = locality.unwrap_or_else(|| criterion_9_and_locality_csv().1);
    format!("{costs}{verify}{locality}")
}

fn main() {
    let tuples = sweep();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut timed = |n: usize, name: &'static str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut out = run();
        out.detail.push_str(&format!(" [{:.1}s]", start.elapsed().as_secs_f64()));
        let line = format!("{} criterion {n}: {name}: {}", if out.passed { "PASS" } else { "FAIL" }, out.detail);
        println!("{line}");
        results.push((n, name, out));
    };
    timed(1, "published cost row 1 exact", &mut || {
        exact_row(CostTuple::new(9, 3, 18, 72, 2), [(Scheme::Uncoded, 864, 288), (Scheme::Coded, 486, 18), (Scheme::Hybrid, 216, 864)])
    });
    timed(2, "published cost row 2 exact", &mut || {
        exact_row(CostTuple::new(16, 4, 16, 240, 2), [(Scheme::Uncoded, 2880, 720), (Scheme::Coded, 1632, 48), (Scheme::Hybrid, 960, 2880)])
    });
    timed(3, "formula-meter equality sweep", &mut || criterion_3(&tuples));
    timed(4, "decode correctness and fault detection", &mut || criterion_4(&tuples));
    timed(5, "published cost table anomaly detection", &mut criterion_5);
    timed(6, "ratio bounds", &mut || criterion_6(&tuples));
    timed(7, "optimizer oracle equivalence", &mut criterion_7);
    timed(8, "feasibility suite", &mut criterion_8);
    let mut locality_csv = String::new();
    timed(9, "published locality table directional reproduction", &mut || {
        let (out, csv) = criterion_9_and_locality_csv();
        locality_csv = csv;
        out
    });
    timed(10, "determinism", &mut || {
        let first = full_suite_csv(Some(locality_csv.clone()));
        let second = full_suite_csv(None);
        if first == second {
            ok(format!("two full runs produced identical CSV output ({} bytes)", first.len()))
        } else {
            fail("CSV output differs between runs")
        }
    });
    let failed = results.iter().filter(|(_, _, o)| !o.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
