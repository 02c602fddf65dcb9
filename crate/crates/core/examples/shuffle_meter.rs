//! Runs each scheme's shuffle on real payloads and reports metered traffic.

use hcmr::analysis::{cost, CostTuple};
use hcmr::assignment::assign_hybrid;
use hcmr::shuffle::{run_hybrid_with, simulate, synth_map_outputs, verify_delivery, ShuffleOptions};
use hcmr::{ClusterTopology, Scheme};

fn main() -> hcmr::Result<()> {
    let t = CostTuple::new(9, 3, 18, 72, 2);
    let topo = ClusterTopology::new(t.servers, t.racks)?;
    for scheme in Scheme::ALL {
        let sim = simulate(&topo, &t.params(scheme), 8, 1)?;
        let formula = cost(&t, scheme)?;
        println!("{}", sim.run.report);
        println!("  formula intra {} cross {}; decode ok={}", formula.intra, formula.cross, sim.verify().ok);
    }

    // a traced run on a smaller job
    let small = ClusterTopology::new(4, 2)?;
    let params = hcmr::assignment::JobParams::hybrid(4, 4, 2);
    let a = assign_hybrid(&small, &params, None)?;
    let outputs = synth_map_outputs(a.as_map(), 2, 7)?;
    let run = run_hybrid_with(&small, &a, &outputs, ShuffleOptions { trace: true })?;
    println!("stage\tsender\treceivers\tkeys\tsubfiles\tclass");
    for record in &run.trace {
        println!("{record}");
    }
    println!("delivery: {:?}", verify_delivery(&run.delivered, a.as_map(), outputs.oracle()).ok);
    Ok(())
}
