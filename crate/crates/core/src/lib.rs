//! Narrative-strategy extraction, protagonist valence arcs, arc
//! similarity and strategy-steered remixing of user drafts.

pub mod analysis;
pub mod arc;
pub mod config;
pub mod corpus;
pub mod gateway;
pub mod model;
pub mod pipeline;
pub mod remix;
pub mod search;
pub mod store;
pub mod text;
