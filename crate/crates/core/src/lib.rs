//! Restriction-aware route planning on partitioned road networks.
//!
//! Edges carry height, width and weight limits. Each cell of a vertex
//! partition stores shortest boundary-to-boundary paths for a filtered set
//! of restriction combinations, chosen from clustered traffic. Queries run
//! over an overlay of the two endpoint cells, the inter-cell edges and the
//! stored shortcuts, and fall back to an exact search when that fails.

pub mod bench;
pub mod clustering;
pub mod combos;
pub mod datagen;
pub mod error;
#[doc(hidden)]
pub mod fixtures;
pub mod index;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod query;
mod textio;

pub use error::{Error, Result};
pub use model::{
    dominates, edge_feasible, path_distance, path_feasible, Actor, Attr, Distance, Edge, EdgeId,
    Path, RestrictionTriple, RoadNetwork, Vehicle, VertexId,
};
pub use partition::{partition, Cell, CellDecomposition};
