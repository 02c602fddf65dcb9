//! Server/rack layout.
//!
//! `K` servers sit in `P` racks of `K_r = K/P` servers each. Server
//! `S_{i,j}` is slot `j` of rack `i`; its flat index is `(i-1)·K_r + j`. The
//! servers sharing a slot index `j` across all racks form layer `j`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClusterTopology {
    servers: usize,
    racks: usize,
    per_rack: usize,
}

/// A server, addressed both by `(rack, slot)` and by flat index. All 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ServerRef {
    // field order gives Ord by flat index first
    pub flat: usize,
    pub rack: usize,
    pub slot: usize,
}

impl fmt::Display for ServerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S({},{})", self.rack, self.slot)
    }
}

/// One server per rack, all at the same slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRef {
    pub layer: usize,
    pub members: Vec<ServerRef>,
}

impl ClusterTopology {
    /// Builds a topology of `servers` servers split evenly over `racks` racks.
    pub fn new(servers: usize, racks: usize) -> Result<Self> {
        if servers < 2 {
            return Err(Error::param(format!("K must be at least 2 (K={servers})")));
        }
        if racks < 2 {
            return Err(Error::param(format!("P must be at least 2 (P={racks})")));
        }
        if servers % racks != 0 {
            return Err(Error::param(format!(
                "P ∤ K: P does not divide K (P={racks}, K={servers})"
            )));
        }
        Ok(ClusterTopology {
            servers,
            racks,
            per_rack: servers / racks,
        })
    }

    /// `K`.
    pub fn servers(&self) -> usize {
        self.servers
    }

    /// `P`.
    pub fn racks(&self) -> usize {
        self.racks
    }

    /// `K_r = K / P`, also the number of layers.
    pub fn servers_per_rack(&self) -> usize {
        self.per_rack
    }

    pub fn layers(&self) -> usize {
        self.per_rack
    }

    pub fn server(&self, rack: usize, slot: usize) -> Result<ServerRef> {
        check_range("rack", rack, self.racks)?;
        check_range("slot", slot, self.per_rack)?;
        Ok(ServerRef {
            flat: (rack - 1) * self.per_rack + slot,
            rack,
            slot,
        })
    }

    /// Flat index of `server`, checking that its coordinates belong to this topology.
    pub fn flat_index(&self, server: ServerRef) -> Result<usize> {
        let canonical = self.server(server.rack, server.slot)?;
        if canonical.flat != server.flat {
            return Err(Error::Range {
                what: "flat index",
                value: server.flat,
                max: self.servers,
            });
        }
        Ok(canonical.flat)
    }

    pub fn unflatten(&self, flat: usize) -> Result<ServerRef> {
        check_range("flat index", flat, self.servers)?;
        Ok(self.server_unchecked(flat))
    }

    /// Rack of a flat index via `floor((flat-1)/K_r) + 1`.
    pub fn rack_of(&self, flat: usize) -> usize {
        (flat - 1) / self.per_rack + 1
    }

    pub(crate) fn server_unchecked(&self, flat: usize) -> ServerRef {
        let rack = self.rack_of(flat);
        ServerRef {
            flat,
            rack,
            slot: flat - (rack - 1) * self.per_rack,
        }
    }

    pub fn same_rack(&self, a: ServerRef, b: ServerRef) -> bool {
        a.rack == b.rack
    }

    /// All servers in flat-index order.
    pub fn all_servers(&self) -> impl Iterator<Item = ServerRef> + '_ {
        (1..=self.servers).map(move |f| self.server_unchecked(f))
    }

    pub fn rack_members(&self, rack: usize) -> Result<Vec<ServerRef>> {
        check_range("rack", rack, self.racks)?;
        Ok((1..=self.per_rack)
            .map(|slot| self.server_unchecked((rack - 1) * self.per_rack + slot))
            .collect())
    }

    pub fn layer(&self, layer: usize) -> Result<LayerRef> {
        check_range("layer", layer, self.per_rack)?;
        Ok(LayerRef {
            layer,
            members: (1..=self.racks)
                .map(|rack| self.server_unchecked((rack - 1) * self.per_rack + layer))
                .collect(),
        })
    }

    pub fn all_layers(&self) -> Vec<LayerRef> {
        (1..=self.per_rack)
            .map(|l| self.layer(l).expect("layer in range"))
            .collect()
    }
}

fn check_range(what: &'static str, value: usize, max: usize) -> Result<()> {
    if value == 0 || value > max {
        return Err(Error::Range { what, value, max });
    }
    Ok(())
}
