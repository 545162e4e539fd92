//! Regular-vine structures and the mixed-margin vine density.

mod array;
mod model;

pub(crate) use array::UnionFind;
pub use array::{workspace_raw, Edge, VineArray, Workspace};
pub use model::{edge_v, edge_vprime, pit_pair, LevelPairs, PairObs, VineModel};
pub(crate) use model::recurse;
