//! Finite-element optimized Schwarz methods with cross-points.
//!
//! A Q1 discretization of `eta u - lap u = f` on a rectangle is split into a
//! grid of subdomains that exchange Robin traces. Two ways of handling the
//! cross-points where several subdomains meet are provided: auxiliary
//! variables per subdomain pair, and complete communication through the
//! Dirichlet and Neumann values of every incident subdomain.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod osm;
pub mod transmission;

pub use assembly::{InterfaceMatrix, Load, SubdomainSystem, SystemParams};
pub use error::{Error, Result};
pub use graph::{split_flow, verify_flow, EdgeFlow, FlowGraph};
pub use mesh::{CrossPointTopology, Decomposition, Mesh, NodeClass};
pub use osm::{
    convergence_factor, degenerate_model, energy_series, run_osm, solve_mono, Engine, IterationReport, Method,
    OsmConfig, Rhs, Start, Traces,
};
pub use transmission::{AuxTraces, CompleteTraces, CrossPointOperators, Interfaces};
