pub mod syntax;
pub mod extract;
pub mod graph;
pub mod diff;
pub mod resolve;
pub mod retrieval;
pub mod migrate;
pub mod eval;
