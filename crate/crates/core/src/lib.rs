//! County-level COVID-19 risk analysis: cluster counties into risk levels on
//! their positive and death rates, train classifiers on those labels, and
//! attribute risk to county features with permutation importance, Gini
//! importance and TreeSHAP.

pub mod balance;
pub mod cluster;
pub mod explain;
pub mod ingest;
pub mod learn;
pub mod matrix;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use matrix::Matrix;
