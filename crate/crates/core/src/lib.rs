//! Rack-aware MapReduce shuffle simulation.
//!
//! The crate builds Map-task assignments for three shuffle schemes (uncoded,
//! coded, and hybrid coded), runs the shuffle with real payload bytes and
//! XOR-coded multicasts, meters every transfer as intra-rack (through a
//! top-of-rack switch) or cross-rack (through the root switch), and checks
//! the meters against closed-form costs. A locality optimizer chooses the
//! hybrid Map-task placement that best matches where HDFS-style replicas are
//! stored.
//!
//! Indices in every public interface are 1-based: racks, slots within a
//! rack, flat server indices, subfile ids and key ids.
//!
//! ```
//! use hcmr::{analysis, ClusterTopology, JobParams};
//!
//! let topology = ClusterTopology::new(9, 3).unwrap();
//! let hybrid = analysis::cost_hybrid(9, 3, 18, 72, 2).unwrap();
//! assert_eq!(hybrid.cross.to_string(), "216");
//!
//! let params = JobParams::hybrid(72, 18, 2);
//! let assignment = hcmr::assignment::assign_hybrid(&topology, &params, None).unwrap();
//! assert_eq!(assignment.per_subset(), 8);
//! ```

pub mod analysis;
pub mod assignment;
pub mod combinatorics;
mod error;
pub mod experiment;
pub mod optimizer;
pub mod placement;
pub mod shuffle;
pub mod topology;

pub use assignment::{HybridAssignment, JobParams, LayerGrouping, MapAssignment, Scheme};
pub use error::{Error, Result};
pub use topology::{ClusterTopology, LayerRef, ServerRef};
