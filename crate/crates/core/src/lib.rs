//! Lock summary inference for Mini-C and translation to a guarded lock dialect.

pub mod callgraph;
pub mod cfg;
pub mod datalock;
pub mod diag;
pub mod flow;
pub mod frontend;
pub mod guardcheck;
pub mod pipeline;
pub mod propagation;
pub mod summary;
pub mod transform;
