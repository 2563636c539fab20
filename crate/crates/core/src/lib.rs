//! Hierarchical coarse/fine species classification.
//!
//! A shared dense trunk feeds a coarse (group) head from its shallow layer and
//! one fine (species) head per group from its deep layer. Species scores are the
//! product of the group probability and the within-group probability, so they
//! form a single distribution over all species. Per-frame scores are aggregated
//! over a track (one individual fish) by averaging or majority vote, and a
//! confidence threshold can send low-confidence predictions back to the group
//! level.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod taxonomy;
pub mod training;

pub use error::{Error, Result};
pub use taxonomy::Taxonomy;
