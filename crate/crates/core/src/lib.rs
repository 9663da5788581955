//! Active learning of depth-bounded decision trees over Boolean features,
//! driven by projected model counting over a CNF version space.

pub mod cnf;
pub mod count;
pub mod dimacs;
pub mod encode;
pub mod learn;
pub mod sat;
pub mod tree;
