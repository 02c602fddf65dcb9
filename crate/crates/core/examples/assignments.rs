//! Map assignments for the three schemes, with structural validation.

use hcmr::assignment::{assign_coded, assign_hybrid, assign_uncoded, JobParams};
use hcmr::ClusterTopology;

fn main() -> hcmr::Result<()> {
    let topo = ClusterTopology::new(6, 3)?;

    let unc = assign_uncoded(&topo, &JobParams::uncoded(6, 6))?;
    println!("uncoded: subfile 1 on {:?}", unc.servers_of(1));

    let params = JobParams::coded(15, 6, 2);
    let cod = assign_coded(&topo, &params)?;
    println!("coded: every 2-subset of servers shares {} subfiles", cod.groups_by_server_set().values().next().map_or(0, Vec::len));
    print!("{}", cod.validate(&params));

    let params = JobParams::hybrid(12, 6, 2);
    let hyb = assign_hybrid(&topo, &params, None)?;
    println!("hybrid: M={} subfiles per (layer, rack pair)", hyb.per_subset());
    print!("{}", hyb.validate(&params));
    print!("{}", hyb.to_text());
    Ok(())
}
