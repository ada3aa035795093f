//! p-modulus of time-respecting path families on temporal graphs.
//!
//! A temporal graph here is a contact sequence: a multigraph whose edges carry
//! a finite set of availability times. A time-respecting path traverses its
//! edges at strictly increasing times. A temporal penalty function discounts
//! paths that take long to traverse, which turns the family into a family of
//! weighted objects on the aggregated (static) graph. Its p-modulus is the
//! minimum p-energy of a density that gives every path length at least one:
//!
//! ```text
//!     Mod_{p,σ}(Γ) = min { Σ σ(e) ρ(e)^p : ρ ≥ 0, Nρ ≥ 1 }
//! ```
//!
//! Modules:
//!
//! * [`tempgraph`]: graph model, contact-sequence ingestion, component extraction.
//! * [`penalty`]: penalty functions and the four usage modes.
//! * [`paths`]: time-respecting paths, exhaustive enumeration and the
//!   minimum-length search used as the separation oracle.
//! * [`solver`]: energy, the constraint-generation modulus solver, dual plan
//!   recovery, sweeps and a brute-force reference solver.
//! * [`fixtures`]: small graphs with closed-form modulus values.

pub mod error;
pub mod fixtures;
pub mod paths;
pub mod penalty;
pub mod solver;
pub mod tempgraph;

pub use error::{Error, Result};
pub use paths::{enumerate_trp, min_length_trp, EnumerateOptions, Step, TemporalPath};
pub use penalty::{phi_eval, psi, rho_length, usage_row, PenaltyConfig, PenaltyMode, PhiKind, PhiSpec, UsageRow};
pub use solver::{
    brute_force_modulus, delta_p_metric, dual_recover, energy, expected_overlap, lambda_sweep, modulus, p_sweep,
    restricted_solve, sigma_derivative_check, Density, Exponent, FamilyKind, FamilySpec, ModulusResult, SolverOptions,
};
pub use tempgraph::{
    aggregate, largest_weakly_connected_component, parse_contact_sequence, EdgeId, EdgeRecord, GraphBuilder,
    ParseOptions, StaticGraph, TemporalGraph, VertexId,
};
