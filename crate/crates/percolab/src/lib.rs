//! percolab: a simulation and verification laboratory for bootstrap
//! percolation on implicit high-dimensional graphs.
//!
//! The crate provides
//! * implicit graph families (hypercubes, permutahedra, star products,
//!   Cartesian products, middle layers) with canonical vertex encodings and
//!   adjacency oracles ([`graph`]),
//! * exact synchronous evolution of r-neighbour, majority and
//!   relaxed-threshold processes ([`engine`]),
//! * locality-exact per-vertex round probabilities on graphs too large to
//!   enumerate ([`local`]),
//! * executable structural property checks, witness construction and the
//!   permutahedron isometry test ([`verify`]),
//! * percolation-probability estimation, threshold bisection, closed-form
//!   evaluators and the star-product layer analysis ([`lab`]).

pub mod cli;
pub mod engine;
pub mod error;
pub mod graph;
pub mod lab;
pub mod local;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
