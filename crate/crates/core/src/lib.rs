//! Desk-scale numerical toolkit for the dilute-Bose-gas ground-state
//! lower-bound construction.
//!
//! The crate solves the two-body scattering and ball-Neumann problems,
//! builds the nearest-neighbor trial factors and soft potentials on torus
//! configurations, evaluates Temple-inequality cell certificates, runs the
//! box-doubling combinatorics exactly, maintains the length-scale/error
//! ledger, and cross-checks everything against an independent few-body
//! finite-difference eigensolver.
//!
//! Hot loops (Monte Carlo integrals, exhaustive sweeps, eigensolver
//! matvecs) run on rayon when the default `parallel` feature is enabled
//! and fall back to sequential iteration without it. Results are
//! bit-identical either way: random streams are keyed by task index and
//! reductions run over ordered partials.

pub mod acceptance;
pub mod cellbound;
pub mod configspace;
pub mod doubling;
pub mod linalg;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod scales;
pub mod twobody;

pub use cellbound::{temple_lower_bound, TempleInput};
pub use configspace::{NeighborStructure, ParticleConfig};
pub use doubling::{DoublingSchedule, PiecewiseQuadratic};
pub use scales::ScaleSet;
pub use twobody::{PotentialSpec, RadialSolution};
