//! Root, community and parameter inference for noisy preferential-attachment
//! network growth models.
//!
//! A graph is modelled as a latent spanning forest grown by affine
//! preferential attachment plus noise edges. The crate simulates such graphs,
//! samples the latent forest and arrival order by Gibbs sampling, and turns the
//! samples into root probabilities, credible sets and cluster summaries.

pub mod error;
pub mod estimation;
pub mod experiment;
pub mod forest;
pub mod generate;
pub mod gibbs;
pub mod graph;
pub mod history;
pub mod inference;
pub mod likelihood;
pub mod oracle;
pub mod params;
pub mod report;
pub mod util;

pub use error::{Error, Result};
pub use forest::{Forest, Ordering};
pub use graph::LabeledGraph;
pub use inference::RootDistribution;
pub use params::{ModelParams, Variant};

/// Version tag written into every JSON document the crate produces.
pub const SCHEMA_VERSION: &str = "1.0";
