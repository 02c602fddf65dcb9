//! Replica placement policies and per-server locality scores.

use hcmr::placement::{locality_measure, place_replicas_with, LocalityWeights, PlacementPolicy};
use hcmr::ClusterTopology;

fn main() -> hcmr::Result<()> {
    let topo = ClusterTopology::new(8, 2)?;
    let weights = LocalityWeights::default();
    for policy in [PlacementPolicy::RackSpread, PlacementPolicy::Uniform] {
        let placement = place_replicas_with(&topo, 200, 2, 9, policy)?;
        let single_rack = (1..=200)
            .filter(|&i| {
                let racks: Vec<usize> = placement.stores(i).iter().map(|&f| topo.rack_of(f)).collect();
                racks.iter().all(|&r| r == racks[0])
            })
            .count();
        println!("{}: {single_rack} of 200 subfiles kept in a single rack", policy.name());
        println!("  subfile 1 on {:?}; locality on servers (1, 5): {}", placement.stores(1), locality_measure(&placement, &weights, 1, 1, 5));
    }
    Ok(())
}
