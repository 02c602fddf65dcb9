//! XOR-coded multicast: one packet serves three receivers at once.

use hcmr::shuffle::{decode, encode, CodedPacket, PayloadOracle};
use hcmr::ClusterTopology;

fn main() -> hcmr::Result<()> {
    let topo = ClusterTopology::new(3, 3)?;
    let oracle = PayloadOracle::new(42, 4)?;
    // receiver z wants (key z, subfile z); it already holds the other two values
    let wanted: Vec<Vec<u8>> = (1..=3).map(|z| oracle.value(z, z)).collect();
    let packet = CodedPacket {
        sender: topo.server(1, 1)?,
        receivers: (1..=3).map(|slot| topo.server(slot, 1)).collect::<hcmr::Result<_>>()?,
        keys: vec![1, 2, 3],
        subfiles: vec![1, 2, 3],
        payload: encode(&wanted)?,
    };
    println!("payload {:02x?}", packet.payload);
    for z in 0..3 {
        let known: Vec<&Vec<u8>> = wanted.iter().enumerate().filter(|&(o, _)| o != z).map(|(_, v)| v).collect();
        let got = decode(&packet, &known)?;
        println!("receiver {} decodes {:02x?} ok={}", z + 1, got, got == wanted[z]);
    }
    Ok(())
}
