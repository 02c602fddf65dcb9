//! Rack, slot and layer indexing on a 9-server, 3-rack cluster.

use hcmr::ClusterTopology;

fn main() -> hcmr::Result<()> {
    let topo = ClusterTopology::new(9, 3)?;
    println!("K={} P={} K_r={}", topo.servers(), topo.racks(), topo.servers_per_rack());
    for s in topo.all_servers() {
        println!("server (rack {}, slot {}) -> flat {}", s.rack, s.slot, topo.flat_index(s)?);
    }
    for layer in topo.all_layers() {
        println!("{layer:?}");
    }
    // racks must divide servers
    println!("{}", ClusterTopology::new(10, 3).unwrap_err());
    Ok(())
}
