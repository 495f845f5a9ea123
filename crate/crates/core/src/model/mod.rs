//! Random forest learner, cost-sensitive decisions and the model file format.

mod dataset;
mod forest;
pub mod io;
mod tree;

pub use dataset::{Dataset, FeatureRow, SparseRow, SparseVec};
pub use forest::{decide, predict, train, train_with_oob, CostMatrix, Forest, ForestParams, MaxFeatures, OobReport};
pub use io::{deserialize, serialize};
pub use tree::{Node, Tree};
