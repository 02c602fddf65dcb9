use hcmr::assignment::{assign_hybrid_grouped, JobParams, LayerGrouping};
use hcmr::optimizer::{
    all_groupings, brute_force_oracle, check_constraints, is_feasible, objective, random_assignment, solve_random,
    solve_structured, xy_from_assignment, Budget, Constraint, LocalityCosts, LocalityProblem, PairIndicator, ServerGraph,
};
use hcmr::placement::{place_replicas, LocalityWeights};
use hcmr::ClusterTopology;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn topo(k: usize, p: usize) -> ClusterTopology {
    ClusterTopology::new(k, p).unwrap()
}

/// Components of `adj` are cliques of size `p`, each with one vertex per rack.
fn is_layer_clique_union(adj: &[u16], k: usize, p: usize) -> bool {
    let kr = k / p;
    let closed = |v: usize| adj[v] | 1 << v;
    (0..k).all(|v| {
        let members: Vec<usize> = (0..k).filter(|&u| closed(v) >> u & 1 == 1).collect();
        let mut racks: Vec<usize> = members.iter().map(|&m| m / kr).collect();
        racks.dedup();
        members.len() == p && racks.len() == p && members.iter().all(|&u| closed(u) == closed(v))
    })
}

fn graph_from(adj: &[u16], k: usize) -> ServerGraph {
    let mut y = ServerGraph::empty(k);
    for a in 0..k {
        for b in 0..k {
            if adj[a] >> b & 1 == 1 {
                y.set_entry(a + 1, b + 1, true);
            }
        }
    }
    y
}

fn satisfies_134(adj: &[u16], t: &ClusterTopology) -> bool {
    let k = t.servers();
    let report = check_constraints(&PairIndicator::zeros(0, k), &graph_from(adj, k), t, 0).unwrap();
    [Constraint::NoCommonFilesInRack, Constraint::Degree, Constraint::Transitivity]
        .iter()
        .all(|&c| report.get(c).passed())
}

/// Every symmetric graph on `k` vertices.
fn check_all_graphs(t: &ClusterTopology) -> usize {
    let k = t.servers();
    let edges: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let mut hits = 0;
    for mask in 0u64..1 << edges.len() {
        let mut adj = vec![0u16; k];
        for (e, &(a, b)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        let lhs = satisfies_134(&adj, t);
        assert_eq!(lhs, is_layer_clique_union(&adj, k, t.racks()), "K={k} P={} mask={mask:b}", t.racks());
        hits += lhs as usize;
    }
    hits
}

/// Graphs with only cross-rack edges and every degree exactly `P − 1`;
/// all others fail (1) or (3) and, having an intra-rack edge or a wrong
/// degree, are not layer-clique unions either.
fn check_regular_cross_graphs(t: &ClusterTopology) -> usize {
    let k = t.servers();
    let d = t.racks() - 1;
    let kr = t.servers_per_rack();
    let edges: Vec<(usize, usize)> =
        (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).filter(|&(a, b)| a / kr != b / kr).collect();
    fn go(e: usize, edges: &[(usize, usize)], adj: &mut Vec<u16>, deg: &mut Vec<usize>, d: usize, t: &ClusterTopology, hits: &mut usize) {
        if e == edges.len() {
            if deg.iter().all(|&x| x == d) {
                let lhs = satisfies_134(adj, t);
                assert_eq!(lhs, is_layer_clique_union(adj, t.servers(), t.racks()));
                *hits += lhs as usize;
            }
            return;
        }
        let (a, b) = edges[e];
        // a vertex whose remaining edges cannot reach degree d is dead
        let remaining = |v: usize| edges[e..].iter().filter(|&&(x, y)| x == v || y == v).count();
        if deg[a] + remaining(a) < d || deg[b] + remaining(b) < d {
            return;
        }
        go(e + 1, edges, adj, deg, d, t, hits);
        if deg[a] < d && deg[b] < d {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
            deg[a] += 1;
            deg[b] += 1;
            go(e + 1, edges, adj, deg, d, t, hits);
            adj[a] &= !(1 << b);
            adj[b] &= !(1 << a);
            deg[a] -= 1;
            deg[b] -= 1;
        }
    }
    let mut hits = 0;
    go(0, &edges, &mut vec![0; k], &mut vec![0; k], d, t, &mut hits);
    hits
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

#[test]
fn feasible_graphs_are_exactly_layer_groupings() {
    for k in 2..=8usize {
        for p in (2..=k).filter(|p| k % p == 0) {
            let t = topo(k, p);
            let hits = if k <= 6 { check_all_graphs(&t) } else { check_regular_cross_graphs(&t) };
            // one graph per layer grouping, up to relabeling the layers
            let groupings = factorial(k / p).pow(p as u32 - 1);
            assert_eq!(hits, groupings, "K={k} P={p}");
        }
    }
}

#[test]
fn inner_assignment_beats_random_permutations() {
    let w = LocalityWeights::new(0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (k, p, n) in [(4, 2, 4), (4, 2, 8), (6, 3, 6), (6, 3, 12), (6, 2, 12), (8, 4, 12)] {
        let t = topo(k, p);
        let params = JobParams::hybrid(n, k, 2);
        let placement = place_replicas(&t, n, 2, k as u64 * 31 + n as u64).unwrap();
        let problem = LocalityProblem::new(&t, &params, &placement, &w).unwrap();
        let grouping = all_groupings(&t).pop().unwrap();
        let best = problem.objective_of(&problem.solve_grouping(&grouping));
        let mut perm: Vec<usize> = (1..=n).collect();
        let mut sampled_max = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            perm.shuffle(&mut rng);
            let a = assign_hybrid_grouped(&t, &params, Some(&perm), &grouping).unwrap();
            sampled_max = sampled_max.max(problem.objective_of(&a));
        }
        assert!(sampled_max <= best + 1e-9, "K={k} N={n}: sampled {sampled_max} > exact {best}");
        // with this many samples on tiny instances the optimum is usually hit
        if n <= 6 {
            assert!((sampled_max - best).abs() < 1e-9);
        }
    }
}

#[test]
fn objective_of_matches_triple_sum() {
    let t = topo(9, 3);
    let params = JobParams::hybrid(36, 9, 2);
    let w = LocalityWeights::new(0.6).unwrap();
    let placement = place_replicas(&t, 36, 3, 5).unwrap();
    let costs = LocalityCosts::from_placement(&placement, &w);
    let problem = LocalityProblem::new(&t, &params, &placement, &w).unwrap();
    for seed in 0..10 {
        let a = random_assignment(&t, &params, seed).unwrap();
        let (x, _) = xy_from_assignment(&a).unwrap();
        assert!((objective(&x, &costs).unwrap() - problem.objective_of(&a)).abs() < 1e-9);
    }
}

#[test]
fn structured_equals_oracle_and_dominates_random() {
    let w = LocalityWeights::default();
    for (k, p, n) in [(4, 2, 4), (4, 2, 8), (6, 3, 6), (6, 2, 12), (8, 2, 8)] {
        let t = topo(k, p);
        let params = JobParams::hybrid(n, k, 2);
        for seed in 0..3 {
            let placement = place_replicas(&t, n, 2, seed).unwrap();
            let oracle = brute_force_oracle(&t, &params, &placement, &w).unwrap();
            let exhaustive = solve_structured(&t, &params, &placement, &w, Budget::Exhaustive, seed).unwrap();
            let local = solve_structured(&t, &params, &placement, &w, Budget::Restarts(1), seed).unwrap();
            let random = solve_random(&t, &params, &placement, &w, seed).unwrap();
            assert!((exhaustive.objective - oracle.objective).abs() < 1e-9, "K={k} N={n} seed={seed}");
            assert!(local.objective <= oracle.objective + 1e-9);
            assert!(local.objective >= random.objective - 1e-9);
            assert!(oracle.feasible && exhaustive.feasible && local.feasible && random.feasible);
        }
    }
}

#[test]
fn full_replication_makes_every_assignment_optimal() {
    let t = topo(4, 2);
    let params = JobParams::hybrid(4, 4, 2);
    let placement = place_replicas(&t, 4, 4, 0).unwrap();
    let w = LocalityWeights::default();
    let oracle = brute_force_oracle(&t, &params, &placement, &w).unwrap();
    assert_eq!(oracle.objective, 16.0);
    for seed in 0..5 {
        assert_eq!(solve_random(&t, &params, &placement, &w, seed).unwrap().objective, 16.0);
    }
}

#[test]
fn feasibility_does_not_depend_on_lambda() {
    let t = topo(8, 4);
    let params = JobParams::hybrid(24, 8, 2);
    let placement = place_replicas(&t, 24, 2, 8).unwrap();
    for lambda in [0.51, 0.75, 1.0] {
        let w = LocalityWeights::new(lambda).unwrap();
        let s = solve_structured(&t, &params, &placement, &w, Budget::Restarts(2), 1).unwrap();
        assert!(s.feasible && is_feasible(&s.assignment));
        // a different grouping and permutation stays feasible regardless of weights
        let mut g = s.assignment.grouping().clone();
        g.swap(2, 1, 2);
        let mut perm = s.assignment.permutation().to_vec();
        perm.reverse();
        assert!(is_feasible(&assign_hybrid_grouped(&t, &params, Some(&perm), &g).unwrap()));
    }
}

#[test]
fn structured_node_locality_on_nine_servers() {
    let t = topo(9, 3);
    let params = JobParams::hybrid(144, 9, 2);
    let w = LocalityWeights::default();
    let good = (0..100)
        .filter(|&seed| {
            let placement = place_replicas(&t, 144, 2, seed).unwrap();
            solve_structured(&t, &params, &placement, &w, Budget::Restarts(1), seed).unwrap().stats.node_pct >= 55.0
        })
        .count();
    assert!(good >= 80, "{good} of 100 seeds reached 55% node locality");
}

#[test]
fn identity_grouping_is_first_enumerated() {
    let t = topo(6, 2);
    let all = all_groupings(&t);
    assert_eq!(all.len(), 6);
    assert_eq!(all[0], LayerGrouping::identity(&t));
    assert!(all.windows(2).all(|w| w[0] < w[1]));
}
