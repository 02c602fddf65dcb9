//! Data-locality-aware hybrid assignment: random vs optimized vs exhaustive.

use hcmr::assignment::JobParams;
use hcmr::optimizer::{brute_force_oracle, solve_random, solve_structured, Budget};
use hcmr::placement::{place_replicas, LocalityWeights};
use hcmr::ClusterTopology;

fn main() -> hcmr::Result<()> {
    let weights = LocalityWeights::new(0.75)?;

    let topo = ClusterTopology::new(9, 3)?;
    let params = JobParams::hybrid(144, 9, 2);
    let placement = place_replicas(&topo, 144, 2, 3)?;
    let random = solve_random(&topo, &params, &placement, &weights, 3)?;
    let structured = solve_structured(&topo, &params, &placement, &weights, Budget::Restarts(5), 3)?;
    println!("{}", random.summary());
    println!("{}", structured.summary());

    // small enough to enumerate every feasible assignment
    let topo = ClusterTopology::new(6, 3)?;
    let params = JobParams::hybrid(6, 6, 2);
    let placement = place_replicas(&topo, 6, 2, 1)?;
    let oracle = brute_force_oracle(&topo, &params, &placement, &weights)?;
    let exhaustive = solve_structured(&topo, &params, &placement, &weights, Budget::Exhaustive, 1)?;
    println!("{}", oracle.summary());
    println!("{}", exhaustive.summary());
    print!("{}", exhaustive.assignment.to_text());
    Ok(())
}
