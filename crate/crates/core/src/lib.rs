//! Detection of spam in short text messages: entity extraction, lexical
//! normalization, cluster matching, handcrafted feature vectors, a random
//! forest classifier and sender-level behaviour aggregation.

pub mod baseline;
pub mod cluster;
pub mod data;
pub mod entity;
pub mod error;
pub mod eval;
pub mod mela;
pub mod message;
pub mod model;
pub mod mpa;
pub mod pipeline;
pub mod simgen;
pub mod textnorm;
pub mod tld;

pub use error::{Error, Result};
pub use message::{Label, Message};
