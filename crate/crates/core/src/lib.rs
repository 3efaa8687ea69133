//! Discovery of subjectively interesting cycles in directed, non-negatively
//! weighted graphs.
//!
//! The pipeline: fit a maximum-entropy background model to the analyst's
//! prior beliefs ([`background`]), turn observed edge weights into
//! surprisal weights ([`interestingness`]), then search for simple cycles
//! maximizing the ratio of information content to description length with
//! exact ([`oracle`]) or heuristic ([`mmc`], [`steiner`]) solvers, and mine
//! cycles iteratively ([`mining`]).

pub mod background;
pub mod graph;
pub mod interestingness;
pub mod mining;
pub mod mmc;
pub mod oracle;
pub mod steiner;

pub use graph::{Cycle, DiGraph, GraphError, IdMode};
pub use interestingness::{ICDLParams, SurprisalGraph};
